// Acceptance harness: end-to-end checks of the decomposition pipeline on the
// bundled problems. Prints one [PASS]/[FAIL] line per criterion; the exit
// code is the number of failed criteria. Progress goes to stderr so the
// criterion lines stay clean on stdout.

#include <openbox/openbox.hpp>

#include "support.hpp"

#include <chrono>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace openbox;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) { return format_double(v); }

struct Scoreboard {
    int failures = 0;

    void note(int idx, const std::string& name, bool pass, const std::string& detail) {
        std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << idx << " " << name << ": "
                  << detail << "\n"
                  << std::flush;
        if (!pass) ++failures;
    }
};

/// One dataset with its trained network and decomposition.
struct Problem {
    std::string name;
    Dataset train_set;
    Dataset test_set;
    Network net;
    InterpretationModel model;
    double decompose_seconds = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

Problem make_problem(std::string name, Dataset train_set, Dataset test_set,
                     const std::vector<std::size_t>& arch, const TrainConfig& cfg,
                     std::size_t threads) {
    std::cerr << "  [" << name << "] training " << train_set.size() << " instances..."
              << std::endl;
    Network net = train(arch, train_set.x, train_set.y, cfg);
    const double train_acc = accuracy(net, train_set.x, train_set.y);
    const double test_acc = accuracy(net, test_set.x, test_set.y);

    DecompositionOptions opts;
    opts.threads = threads;
    const auto t0 = Clock::now();
    InterpretationModel model = decompose(net, train_set.x, opts);
    const double dt = seconds_since(t0);
    std::cerr << "  [" << name << "] accuracy " << fmt(train_acc) << "/" << fmt(test_acc)
              << ", " << model.size() << " regions in " << fmt(dt) << "s" << std::endl;
    return {std::move(name), std::move(train_set), std::move(test_set),
            std::move(net),  std::move(model),     dt,
            train_acc,       test_acc};
}

// -----------------------------------------------------------------------------
// 1. The collapsed affine maps reproduce the network's probabilities.

void criterion_exactness(Scoreboard& sb, const std::vector<Problem>& problems,
                         std::size_t threads) {
    bool pass = true;
    std::string detail;
    for (const Problem& p : problems) {
        const ExactnessReport on_train = exactness_report(p.net, p.model, p.train_set, threads);
        const ExactnessReport on_test = exactness_report(p.net, p.model, p.test_set, threads);
        const double worst = std::max(on_train.max_diff, on_test.max_diff);
        pass = pass && worst < 1e-9 && p.decompose_seconds < 60.0;
        if (!detail.empty()) detail += "; ";
        detail += p.name + " max diff " + fmt(worst) + " (" +
                  std::to_string(p.train_set.size() + p.test_set.size()) +
                  " instances), decomposed in " + fmt(p.decompose_seconds) + "s";
    }
    sb.note(1, "exactness", pass, detail + "; bound 1e-9, budget 60s");
}

// -----------------------------------------------------------------------------
// 2. The polytopes partition the data: membership <=> configuration match.

std::size_t partition_violations(const Problem& p, const Matrix& x, std::size_t threads) {
    std::vector<std::size_t> bad(x.rows(), 0);
    parallel_for(x.rows(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto row = x.row(i);
            const Configuration c = conf(p.net, row);
            for (const auto& [cfg, entry] : p.model.entries()) {
                const bool inside = contains(entry.polytope, row);
                if (inside != (cfg == c)) ++bad[i];
            }
        }
    });
    std::size_t total = 0;
    for (const std::size_t v : bad) total += v;
    return total;
}

void criterion_partition(Scoreboard& sb, const std::vector<Problem>& problems,
                         std::size_t threads) {
    std::size_t violations = 0, pairs_checked = 0;
    for (const Problem& p : problems) {
        violations += partition_violations(p, p.train_set.x, threads);
        violations += partition_violations(p, p.test_set.x, threads);
        pairs_checked += (p.train_set.size() + p.test_set.size()) * p.model.size();
    }
    sb.note(2, "partition", violations == 0,
            std::to_string(violations) + " violations over " + std::to_string(pairs_checked) +
                " instance x region membership tests");
}

// -----------------------------------------------------------------------------
// 3. The decompositions stay small.

void criterion_region_counts(Scoreboard& sb, const std::vector<Problem>& problems) {
    bool pass = true;
    std::string detail;
    for (const Problem& p : problems) {
        const std::size_t limit = p.train_set.dim() == 2 ? 2000 : 200;
        pass = pass && p.model.size() < limit;
        if (!detail.empty()) detail += "; ";
        detail += p.name + " " + std::to_string(p.model.size()) + " regions (limit " +
                  std::to_string(limit) + ")";
    }
    sb.note(3, "region counts", pass, detail);
}

// -----------------------------------------------------------------------------
// 4. Redundancy removal is sound (sampling) and agrees with an independent
//    oracle on small random polytopes.

void criterion_redundancy(Scoreboard& sb, const std::vector<Problem>& problems,
                          std::size_t threads) {
    // (a) Sampling soundness on real polytopes, preferring ones where the
    // screening actually removed something.
    struct Item {
        const Polytope* poly;
        const BoundingBox* box;
    };
    std::vector<Item> pool, padding;
    for (const Problem& p : problems) {
        if (!p.model.box()) continue;
        for (const auto& [cfg, entry] : p.model.entries()) {
            bool any_removed = false;
            for (const HalfSpace& h : entry.polytope.constraints)
                any_removed = any_removed || h.redundant;
            (any_removed ? pool : padding).push_back({&entry.polytope, &*p.model.box()});
        }
    }
    const std::size_t with_removals = pool.size();
    pool.insert(pool.end(), padding.begin(), padding.end());
    if (pool.size() > 100) pool.resize(100);

    std::vector<std::size_t> bad(pool.size(), 0);
    parallel_for(pool.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i)
            bad[i] = redundancy_violations(*pool[i].poly, *pool[i].box, 10000,
                                           9000 + static_cast<std::uint64_t>(i));
    });
    std::size_t sample_violations = 0;
    for (const std::size_t v : bad) sample_violations += v;

    // (b) Flag-for-flag agreement with the fixpoint oracle on random
    // low-dimensional polytopes, skipping borderline generators.
    Rng rng(4242);
    std::size_t compared = 0, mismatched = 0;
    for (int trial = 0; trial < 300 && compared < 60; ++trial) {
        Polytope p;
        p.dim = 2 + rng.below(2);
        const std::size_t m = 3 + rng.below(4);
        for (std::size_t i = 0; i < m; ++i) {
            Vec w(p.dim);
            for (double& v : w) v = rng.uniform(-1.0, 1.0);
            p.constraints.push_back({std::move(w), rng.uniform(-1.0, 1.0), rng.uniform() < 0.5,
                                     2, static_cast<int>(i) + 1, false});
        }
        BoundingBox box{Vec(p.dim, -4.0), Vec(p.dim, 4.0)};
        if (testsupport::redundancy_borderline(p, box)) continue;
        const std::vector<bool> oracle = testsupport::exhaustive_redundant(p, box, 1e-7);
        Polytope mine = p;
        const RedundancyResult res = remove_redundant(mine, box);
        if (res.empty_in_box) continue;
        ++compared;
        for (std::size_t i = 0; i < m; ++i)
            if (mine.constraints[i].redundant != oracle[i]) ++mismatched;
    }

    const bool pass = sample_violations == 0 && mismatched == 0 && compared >= 40;
    sb.note(4, "redundancy", pass,
            std::to_string(sample_violations) + " sampling violations over " +
                std::to_string(pool.size()) + " polytopes (" + std::to_string(with_removals) +
                " with removals) x 10000 box samples; oracle mismatches " +
                std::to_string(mismatched) + " over " + std::to_string(compared) +
                " random polytopes");
}

// -----------------------------------------------------------------------------
// 5. Same-region neighbors get bit-identical explanations; a solid share of
//    sampled neighbors on the image pairs is same-region.

void criterion_consistency(Scoreboard& sb, const std::vector<Problem>& problems,
                           std::size_t threads) {
    bool pass = true;
    std::string detail;
    for (const Problem& p : problems) {
        const ConsistencyReport rep =
            consistency_report(p.net, p.model, p.test_set, 600, 42, threads);
        std::size_t not_exact = 0;
        for (const ConsistencyRow& r : rep.rows)
            if (r.same_region && r.cosine != 1.0) ++not_exact;
        pass = pass && not_exact == 0;
        const bool needs_share = p.train_set.dim() != 2;
        if (needs_share) pass = pass && rep.fraction_exact >= 0.30;
        if (!detail.empty()) detail += "; ";
        detail += p.name + " " + std::to_string(rep.same_region_pairs) + "/" +
                  std::to_string(rep.rows.size()) + " same-region (all cosine 1), exact share " +
                  fmt(rep.fraction_exact) + (needs_share ? " (floor 0.3)" : "");
    }
    sb.note(5, "consistency", pass, detail);
}

// -----------------------------------------------------------------------------
// 6. The trainer: correct gradients, solves XOR, and the sparse nonnegative
//    regime produces what it promises.

void criterion_trainer(Scoreboard& sb, const Dataset& syn_train) {
    Rng rng(300);
    double worst_grad = 0.0;
    for (const auto& sizes :
         {std::vector<std::size_t>{2, 4, 2}, std::vector<std::size_t>{3, 5, 4, 3}}) {
        const Network net = testsupport::random_network(rng, sizes, 0.8);
        Matrix x(6, sizes.front());
        std::vector<int> y(6);
        for (double& v : x.data()) v = rng.uniform(-1.0, 1.0);
        for (int& v : y) v = static_cast<int>(rng.below(sizes.back()));
        worst_grad = std::max(worst_grad, gradient_check(net, x, y));
    }

    // XOR with jittered corners, the classic nonlinear sanity problem.
    Matrix xx(64, 2);
    std::vector<int> xy(64);
    {
        const double cx[4] = {0.0, 0.0, 1.0, 1.0};
        const double cy[4] = {0.0, 1.0, 0.0, 1.0};
        const int lab[4] = {0, 1, 1, 0};
        Rng jitter(13);
        for (std::size_t i = 0; i < 64; ++i) {
            xx(i, 0) = cx[i % 4] + jitter.uniform(-0.05, 0.05);
            xx(i, 1) = cy[i % 4] + jitter.uniform(-0.05, 0.05);
            xy[i] = lab[i % 4];
        }
    }
    TrainConfig xor_cfg;
    xor_cfg.epochs = 600;
    xor_cfg.batch_size = 16;
    xor_cfg.learning_rate = 0.3;
    xor_cfg.seed = 2;
    const Network xor_net = train({2, 4, 2, 2}, xx, xy, xor_cfg);
    const double xor_acc = accuracy(xor_net, xx, xy);

    // Sparse nonnegative regime on the synthetic problem.
    TrainConfig ns_cfg;
    ns_cfg.epochs = 100;
    ns_cfg.batch_size = 32;
    ns_cfg.learning_rate = 0.3;
    ns_cfg.seed = 5;
    ns_cfg.l1 = 2e-3;
    ns_cfg.nonneg = true;
    const Network ns_net = train({2, 4, 16, 2, 2}, syn_train.x, syn_train.y, ns_cfg);
    double min_param = std::numeric_limits<double>::infinity();
    std::size_t weight_count = 0, weight_zeros = 0;
    for (std::size_t l = 0; l + 1 < ns_net.depth(); ++l) {
        for (const double v : ns_net.weight(l).data()) {
            min_param = std::min(min_param, v);
            ++weight_count;
            if (v == 0.0) ++weight_zeros;
        }
        for (const double v : ns_net.bias(l)) min_param = std::min(min_param, v);
    }
    const double zero_share =
        static_cast<double>(weight_zeros) / static_cast<double>(weight_count);
    const double ns_acc = accuracy(ns_net, syn_train.x, syn_train.y);

    const bool pass = worst_grad < 1e-4 && xor_acc == 1.0 && min_param >= 0.0 &&
                      zero_share >= 0.5;
    sb.note(6, "trainer", pass,
            "gradient error " + fmt(worst_grad) + " (bound 1e-4); XOR accuracy " + fmt(xor_acc) +
                "; sparse nonneg: min param " + fmt(min_param) + ", exact-zero share " +
                fmt(zero_share) + " (floor 0.5), accuracy " + fmt(ns_acc));
}

// -----------------------------------------------------------------------------
// 7. The image-pair networks generalize.

void criterion_accuracy(Scoreboard& sb, const std::vector<Problem>& problems) {
    bool pass = true;
    std::string detail;
    for (const Problem& p : problems) {
        if (p.train_set.dim() == 2) continue;
        const double floor = p.name == "pair1" ? 0.98 : 0.82;
        pass = pass && p.test_accuracy >= floor;
        if (!detail.empty()) detail += "; ";
        detail += p.name + " test accuracy " + fmt(p.test_accuracy) + " (floor " + fmt(floor) +
                  ")";
    }
    sb.note(7, "generalization", pass, detail);
}

// -----------------------------------------------------------------------------
// 8. Knocking out the m features the decomposition names moves predictions
//    more than knocking out m random ones.

void criterion_hacking(Scoreboard& sb, const std::vector<Problem>& problems,
                       std::size_t threads) {
    bool pass = true;
    std::string detail;
    for (const Problem& p : problems) {
        if (p.train_set.dim() == 2) continue;
        const HackReport rep =
            hack_report(p.net, p.model, p.test_set, {10, 20, 40}, 600, 42, threads);
        std::string cells;
        for (const HackCell& c : rep.cells) {
            const bool cell_ok =
                c.guided.cpp > c.random.cpp && c.guided.flips >= c.random.flips;
            pass = pass && cell_ok;
            cells += " m=" + std::to_string(c.m) + " cpp " + fmt(c.guided.cpp) + ">" +
                     fmt(c.random.cpp) + " flips " + std::to_string(c.guided.flips) + ">=" +
                     std::to_string(c.random.flips);
        }
        if (!detail.empty()) detail += ";";
        detail += p.name + " (" + std::to_string(rep.cells.front().guided.rows.size()) +
                  " instances)" + cells;
    }
    sb.note(8, "feature hacking", pass, detail);
}

// -----------------------------------------------------------------------------
// 9. The LP solver: strong duality and guaranteed termination with clean
//    certificates on degenerate inputs.

void criterion_lp(Scoreboard& sb) {
    Rng rng(2025);
    double worst_gap = 0.0;
    bool solved_all = true;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.below(4), m = 1 + rng.below(4);
        Matrix a(m, n);
        for (double& v : a.data()) v = rng.uniform(0.1, 1.0);
        Vec b(m), c(n);
        for (double& v : b) v = rng.uniform(0.5, 1.5);
        for (double& v : c) v = rng.uniform(-1.0, 1.0);

        LinearProgram primal(n);
        primal.objective = c;
        for (std::size_t j = 0; j < n; ++j)
            primal.set_bounds(j, 0.0, std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < m; ++i)
            primal.add_constraint(Vec(a.row(i).begin(), a.row(i).end()), Relation::LessEq, b[i]);

        LinearProgram dual(m);
        for (std::size_t i = 0; i < m; ++i) {
            dual.objective[i] = -b[i];
            dual.set_bounds(i, 0.0, std::numeric_limits<double>::infinity());
        }
        for (std::size_t j = 0; j < n; ++j) {
            Vec col(m);
            for (std::size_t i = 0; i < m; ++i) col[i] = a(i, j);
            dual.add_constraint(std::move(col), Relation::GreaterEq, c[j]);
        }
        const LpOutcome po = solve(primal), dout = solve(dual);
        if (po.status != LpStatus::Optimal || dout.status != LpStatus::Optimal) {
            solved_all = false;
            continue;
        }
        worst_gap = std::max(worst_gap, std::abs(po.optimum + dout.optimum) /
                                            std::max(1.0, std::abs(po.optimum)));
    }

    std::size_t degenerate_ok = 0;
    double worst_cert = 0.0;
    const std::size_t degenerate_trials = 200;
    Rng gen(777);
    for (std::size_t trial = 0; trial < degenerate_trials; ++trial) {
        const std::size_t n = 1 + gen.below(6);
        LinearProgram lp(n);
        for (std::size_t j = 0; j < n; ++j) {
            lp.objective[j] = gen.uniform(-1.0, 1.0);
            const double roll = gen.uniform();
            if (roll < 0.2) {
            } else if (roll < 0.3) {
                const double v = gen.uniform(-1.0, 1.0);
                lp.set_bounds(j, v, v);
            } else {
                lp.set_bounds(j, -2.0, 2.0);
            }
        }
        const std::size_t m = gen.below(10);
        std::vector<Vec> previous;
        for (std::size_t i = 0; i < m; ++i) {
            Vec row(n);
            const double roll = gen.uniform();
            if (roll < 0.15 && !previous.empty()) {
                row = previous[gen.below(previous.size())];
            } else if (roll < 0.25) {
                for (double& v : row) v = static_cast<double>(gen.below(3)) - 1.0;
            } else {
                for (double& v : row) v = gen.uniform(-1.0, 1.0);
            }
            previous.push_back(row);
            const double r2 = gen.uniform();
            lp.add_constraint(std::move(row),
                              r2 < 0.7   ? Relation::LessEq
                              : r2 < 0.9 ? Relation::GreaterEq
                                         : Relation::Equal,
                              gen.uniform(-1.0, 1.0));
        }
        try {
            const LpOutcome out = solve(lp);
            if (out.status == LpStatus::Optimal) worst_cert = std::max(worst_cert, out.max_violation);
            ++degenerate_ok;
        } catch (const Error&) {
        }
    }

    const bool pass = solved_all && worst_gap <= 1e-6 && degenerate_ok == degenerate_trials &&
                      worst_cert <= 1e-8;
    sb.note(9, "lp solver", pass,
            "duality gap " + fmt(worst_gap) + " over 50 programs (bound 1e-6); " +
                std::to_string(degenerate_ok) + "/" + std::to_string(degenerate_trials) +
                " degenerate programs solved, worst certificate violation " + fmt(worst_cert));
}

// -----------------------------------------------------------------------------
// 10. The command-line pipeline is byte-reproducible.

void criterion_reproducibility(Scoreboard& sb, const fs::path& work) {
    const fs::path log = work / "cli.log";
    const auto pipeline = [&log](const fs::path& dir, const std::string& threads) -> bool {
        fs::remove_all(dir);
        const std::string d = dir.string();
        if (testsupport::run_cli("data syn --train 2000 --test 500 --seed 11 --out-dir " + d,
                                 log) != 0)
            return false;
        if (testsupport::run_cli("train --data " + d + "/train.obx --arch 2,4,16,2,2"
                                 " --epochs 25 --batch 32 --lr 0.25 --seed 4 --out " +
                                     d + "/net.json",
                                 log) != 0)
            return false;
        if (testsupport::run_cli("openbox --net " + d + "/net.json --data " + d +
                                     "/train.obx --out " + d + "/model.json --threads " + threads,
                                 log) != 0)
            return false;
        return testsupport::run_cli("report exactness --net " + d + "/net.json --model " + d +
                                        "/model.json --data " + d + "/test.obx --out-dir " + d +
                                        "/rep --threads " + threads,
                                    log) == 0;
    };

    const fs::path a = work / "repro_a", b = work / "repro_b";
    const bool ran = pipeline(a, "2") && pipeline(b, "1");
    bool identical = ran;
    std::string differing;
    if (ran) {
        for (const char* f : {"train.obx", "test.obx", "net.json", "model.json",
                              "rep/exactness.csv", "rep/exactness.json"}) {
            if (testsupport::read_file(a / f) != testsupport::read_file(b / f)) {
                identical = false;
                differing += std::string(" ") + f;
            }
        }
    }
    sb.note(10, "reproducibility", ran && identical,
            ran ? (identical ? "two pipeline runs byte-identical across 6 files "
                               "(different thread counts)"
                             : "files differ:" + differing)
                : "pipeline run failed, see " + log.string());
}

} // namespace

int main() {
    const fs::path work = OPENBOX_WORK_DIR;
    fs::create_directories(work);
    const std::size_t threads = resolve_threads(0);
    std::cerr << "workspace " << work << ", " << threads << " threads" << std::endl;

    const fs::path idx_dir = work / "idx";
    if (!fs::exists(idx_dir / "train-images-idx3-ubyte")) {
        std::cerr << "  writing image fixture..." << std::endl;
        testsupport::write_fixture_idx_dir(idx_dir);
    }

    std::vector<Problem> problems;
    {
        Rng rng(0);
        Dataset syn_train = gen_syn(8000, rng.next_u64());
        Dataset syn_test = gen_syn(2000, rng.next_u64());
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.batch_size = 32;
        cfg.learning_rate = 0.25;
        cfg.seed = 3;
        problems.push_back(make_problem("syn", std::move(syn_train), std::move(syn_test),
                                        {2, 4, 16, 2, 2}, cfg, threads));
    }
    {
        PairSplits s = load_fmnist_pair(idx_dir, 9, 8);
        TrainConfig cfg;
        cfg.epochs = 20;
        cfg.batch_size = 32;
        cfg.learning_rate = 0.02;
        cfg.seed = 1;
        cfg.hidden_bias_init = 1.0;
        problems.push_back(make_problem("pair1", std::move(s.train), std::move(s.test),
                                        {784, 8, 2, 2}, cfg, threads));
    }
    {
        PairSplits s = load_fmnist_pair(idx_dir, 4, 2);
        TrainConfig cfg;
        cfg.epochs = 20;
        cfg.batch_size = 32;
        cfg.learning_rate = 0.02;
        cfg.seed = 1;
        cfg.hidden_bias_init = 1.0;
        problems.push_back(make_problem("pair2", std::move(s.train), std::move(s.test),
                                        {784, 8, 2, 2}, cfg, threads));
    }

    Scoreboard sb;
    criterion_exactness(sb, problems, threads);
    criterion_partition(sb, problems, threads);
    criterion_region_counts(sb, problems);
    criterion_redundancy(sb, problems, threads);
    criterion_consistency(sb, problems, threads);
    criterion_trainer(sb, problems[0].train_set);
    criterion_accuracy(sb, problems);
    criterion_hacking(sb, problems, threads);
    criterion_lp(sb);
    criterion_reproducibility(sb, work);

    std::cerr << (sb.failures == 0 ? "all criteria passed" : "criteria failed") << std::endl;
    return sb.failures;
}
