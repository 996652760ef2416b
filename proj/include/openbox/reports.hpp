#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "data.hpp"
#include "interpretation.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "train.hpp"

namespace openbox {

/// Shortest round-trip decimal form; used everywhere numbers written by two
/// code paths must compare byte-identical.
inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

/// Cosine similarity with pinned edge cases: bitwise-identical vectors give
/// exactly 1.0 (no square roots involved, so "the same region gives the same
/// features" is checkable with ==), and a zero vector against a nonzero one
/// gives 0.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
    if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

namespace detail {

/// Collapsed output map of one configuration: the model's copy when the
/// configuration was observed at build time, a fresh derivation otherwise.
/// Reports never insert into the model.
inline AffinePrefix output_map_for(const Network& net, const InterpretationModel& model,
                                   const Configuration& c, bool* fresh = nullptr) {
    if (const ModelEntry* e = model.find(c)) {
        if (fresh) *fresh = false;
        return e->output;
    }
    if (fresh) *fresh = true;
    return fold_configuration(net, c).back();
}

inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t want,
                                               std::uint64_t seed) {
    if (want >= n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    Rng rng(seed);
    std::vector<std::size_t> picked = rng.sample_without_replacement(n, want);
    std::sort(picked.begin(), picked.end());
    return picked;
}

/// Stream-independent per-instance seed so parallel partitioning cannot
/// change which random numbers an instance sees.
inline std::uint64_t instance_seed(std::uint64_t seed, std::size_t index) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 0x100));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Exactness: network output vs collapsed affine map, instance by instance.

struct ExactnessRow {
    std::size_t index = 0;
    double p_net = 0.0; // probability of the network's predicted class
    double p_llc = 0.0; // same class under the collapsed map
    double diff = 0.0;  // largest probability difference over all classes
};

struct ExactnessReport {
    std::vector<ExactnessRow> rows;
    double max_diff = 0.0;
    double mean_diff = 0.0;
    std::size_t fresh_instances = 0; // instances whose configuration the model had not seen

    nlohmann::json summary_json() const {
        return {{"instances", rows.size()},
                {"max_diff", max_diff},
                {"mean_diff", mean_diff},
                {"fresh_instances", fresh_instances}};
    }
};

inline ExactnessReport exactness_report(const Network& net, const InterpretationModel& model,
                                        const Dataset& data, std::size_t threads = 1) {
    model.check_matches(net);
    ExactnessReport rep;
    rep.rows.resize(data.size());
    std::vector<std::uint8_t> fresh(data.size(), 0);
    parallel_for(data.size(), resolve_threads(threads), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto x = data.x.row(i);
            const ForwardTrace t = forward(net, x);
            bool was_fresh = false;
            const AffinePrefix out = detail::output_map_for(net, model, t.configuration, &was_fresh);
            fresh[i] = was_fresh;
            const Vec p = softmax(affine(out.W, x, out.b));
            double diff = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k)
                diff = std::max(diff, std::abs(p[k] - t.output[k]));
            const std::size_t c = predicted_class(t.output);
            rep.rows[i] = {i, t.output[c], p[c], diff};
        }
    });
    double total = 0.0;
    for (const ExactnessRow& r : rep.rows) {
        rep.max_diff = std::max(rep.max_diff, r.diff);
        total += r.diff;
    }
    rep.mean_diff = rep.rows.empty() ? 0.0 : total / static_cast<double>(rep.rows.size());
    for (const std::uint8_t f : fresh) rep.fresh_instances += f;
    return rep;
}

// ---------------------------------------------------------------------------
// Consistency: decision features of an instance vs its nearest neighbor.

struct ConsistencyRow {
    std::size_t index = 0;
    std::size_t neighbor = 0;
    double cosine = 0.0;
    bool same_region = false;
};

struct ConsistencyReport {
    std::vector<ConsistencyRow> rows;
    double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0, mean = 0.0;
    double fraction_exact = 0.0;    // cosine exactly 1.0
    std::size_t same_region_pairs = 0;

    nlohmann::json summary_json() const {
        return {{"pairs", rows.size()},       {"min", min},
                {"q25", q25},                 {"median", median},
                {"q75", q75},                 {"max", max},
                {"mean", mean},               {"fraction_exact", fraction_exact},
                {"same_region_pairs", same_region_pairs}};
    }
};

/// For each sampled instance, find its Euclidean nearest neighbor in the
/// dataset and compare decision-feature vectors (both taken for the sampled
/// instance's predicted class, each from its own region's collapsed map).
/// Neighbors in the same region see the identical map, so their cosine is
/// exactly 1 by construction -- that is the property worth reporting on.
inline ConsistencyReport consistency_report(const Network& net, const InterpretationModel& model,
                                            const Dataset& data, std::size_t sample_count,
                                            std::uint64_t seed, std::size_t threads = 1) {
    model.check_matches(net);
    if (data.size() < 2) throw DataError("consistency needs at least two instances");
    const std::vector<std::size_t> picked =
        detail::sample_indices(data.size(), sample_count, seed);

    ConsistencyReport rep;
    rep.rows.resize(picked.size());
    parallel_for(picked.size(), resolve_threads(threads), [&](std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s) {
            const std::size_t i = picked[s];
            const auto xi = data.x.row(i);
            std::size_t best = i == 0 ? 1 : 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < data.size(); ++j) {
                if (j == i) continue;
                const auto xj = data.x.row(j);
                double d2 = 0.0;
                for (std::size_t k = 0; k < xj.size(); ++k) {
                    const double diff = xi[k] - xj[k];
                    d2 += diff * diff;
                }
                if (d2 < best_d) {
                    best_d = d2;
                    best = j;
                }
            }
            const ForwardTrace ti = forward(net, xi);
            const Configuration cj = conf(net, data.x.row(best));
            const std::size_t cls = predicted_class(ti.output);
            const AffinePrefix mi = detail::output_map_for(net, model, ti.configuration);
            const AffinePrefix mj = detail::output_map_for(net, model, cj);
            const double cos = cosine_similarity(mi.W.row(cls), mj.W.row(cls));
            rep.rows[s] = {i, best, cos, ti.configuration == cj};
        }
    });

    Vec cosines;
    cosines.reserve(rep.rows.size());
    double total = 0.0;
    for (const ConsistencyRow& r : rep.rows) {
        cosines.push_back(r.cosine);
        total += r.cosine;
        rep.same_region_pairs += r.same_region;
        rep.fraction_exact += r.cosine == 1.0;
    }
    if (!cosines.empty()) {
        std::sort(cosines.begin(), cosines.end());
        const auto quantile = [&cosines](double q) {
            const std::size_t idx = static_cast<std::size_t>(
                q * static_cast<double>(cosines.size() - 1) + 0.5);
            return cosines[std::min(idx, cosines.size() - 1)];
        };
        rep.min = cosines.front();
        rep.q25 = quantile(0.25);
        rep.median = quantile(0.5);
        rep.q75 = quantile(0.75);
        rep.max = cosines.back();
        rep.mean = total / static_cast<double>(cosines.size());
        rep.fraction_exact /= static_cast<double>(cosines.size());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Feature hacking: knock out the m most influential features vs m random
// ones and measure how much the prediction moves.

struct HackRow {
    std::size_t index = 0;
    double p_before = 0.0;
    double p_after = 0.0;
    bool flipped = false;
};

struct HackArm {
    double cpp = 0.0;             // mean |p_before - p_after| of the predicted class
    std::size_t flips = 0;        // instances whose predicted label changed
    double flip_fraction = 0.0;
    std::vector<HackRow> rows;
};

struct HackCell {
    std::size_t m = 0;
    HackArm guided; // top-m features by |decision feature| of the predicted class
    HackArm random; // m uniformly chosen features, per-instance seeded
};

struct HackReport {
    std::vector<HackCell> cells;

    nlohmann::json summary_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const HackCell& c : cells) {
            arr.push_back({{"m", c.m},
                           {"guided", {{"cpp", c.guided.cpp},
                                       {"flips", c.guided.flips},
                                       {"flip_fraction", c.guided.flip_fraction}}},
                           {"random", {{"cpp", c.random.cpp},
                                       {"flips", c.random.flips},
                                       {"flip_fraction", c.random.flip_fraction}}}});
        }
        return {{"cells", arr}};
    }
};

inline HackReport hack_report(const Network& net, const InterpretationModel& model,
                              const Dataset& data, const std::vector<std::size_t>& ms,
                              std::size_t sample_count, std::uint64_t seed,
                              std::size_t threads = 1) {
    model.check_matches(net);
    const std::vector<std::size_t> picked =
        detail::sample_indices(data.size(), sample_count, seed);
    const std::size_t d = data.dim();

    HackReport rep;
    for (const std::size_t m : ms) {
        HackCell cell;
        cell.m = m;
        cell.guided.rows.resize(picked.size());
        cell.random.rows.resize(picked.size());
        parallel_for(picked.size(), resolve_threads(threads), [&](std::size_t b, std::size_t e) {
            for (std::size_t s = b; s < e; ++s) {
                const std::size_t i = picked[s];
                const auto x = data.x.row(i);
                const ForwardTrace t = forward(net, x);
                const std::size_t cls = predicted_class(t.output);
                const double before = t.output[cls];

                const auto zero_and_score = [&](const std::vector<std::size_t>& idx,
                                                HackRow& row) {
                    Vec mod(x.begin(), x.end());
                    for (const std::size_t j : idx) mod[j] = 0.0;
                    const ForwardTrace after = forward(net, mod);
                    row = {i, before, after.output[cls],
                           predicted_class(after.output) != cls};
                };

                // Guided arm: largest |coefficient| first, ties by index.
                const AffinePrefix out = detail::output_map_for(net, model, t.configuration);
                const auto gamma = out.W.row(cls);
                std::vector<std::size_t> order(d);
                for (std::size_t j = 0; j < d; ++j) order[j] = j;
                std::stable_sort(order.begin(), order.end(),
                                 [&gamma](std::size_t a, std::size_t b2) {
                                     return std::abs(gamma[a]) > std::abs(gamma[b2]);
                                 });
                order.resize(std::min(m, d));
                zero_and_score(order, cell.guided.rows[s]);

                Rng rng(detail::instance_seed(seed, i));
                zero_and_score(rng.sample_without_replacement(d, std::min(m, d)),
                               cell.random.rows[s]);
            }
        });
        for (HackArm* arm : {&cell.guided, &cell.random}) {
            double total = 0.0;
            for (const HackRow& r : arm->rows) {
                total += std::abs(r.p_before - r.p_after);
                arm->flips += r.flipped;
            }
            if (!arm->rows.empty()) {
                arm->cpp = total / static_cast<double>(arm->rows.size());
                arm->flip_fraction =
                    static_cast<double>(arm->flips) / static_cast<double>(arm->rows.size());
            }
        }
        rep.cells.push_back(std::move(cell));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Debugging: decision-feature overlays for misclassified instances.

struct DebugRecord {
    std::size_t index = 0;
    int label = 0;
    int predicted = 0;
    double p_predicted = 0.0;
    Vec features_predicted; // decision features of the predicted class
    Vec features_label;     // decision features of the true class
};

struct DebugReport {
    std::vector<DebugRecord> records;
    std::size_t misclassified = 0;
    double accuracy = 0.0;

    nlohmann::json summary_json() const {
        return {{"misclassified", misclassified},
                {"accuracy", accuracy},
                {"records", records.size()}};
    }
};

/// Collect up to `limit` misclassified instances (0 = all) with the
/// decision features behind the wrong prediction and behind the true class,
/// ready to overlay on the input.
inline DebugReport debug_report(const Network& net, const InterpretationModel& model,
                                const Dataset& data, std::size_t limit = 0) {
    model.check_matches(net);
    DebugReport rep;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.x.row(i);
        const ForwardTrace t = forward(net, x);
        const int pred = static_cast<int>(predicted_class(t.output));
        if (pred == data.y[i]) {
            ++hits;
            continue;
        }
        ++rep.misclassified;
        if (limit != 0 && rep.records.size() >= limit) continue;
        const AffinePrefix out = detail::output_map_for(net, model, t.configuration);
        DebugRecord rec;
        rec.index = i;
        rec.label = data.y[i];
        rec.predicted = pred;
        rec.p_predicted = t.output[static_cast<std::size_t>(pred)];
        rec.features_predicted = decision_features({out}, static_cast<std::size_t>(pred));
        rec.features_label = decision_features({out}, static_cast<std::size_t>(data.y[i]));
        rep.records.push_back(std::move(rec));
    }
    rep.accuracy = data.size() ? static_cast<double>(hits) / static_cast<double>(data.size()) : 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Boundary-feature table for the most populated regions.

struct PbfTableRow {
    Configuration configuration;
    std::size_t support = 0;            // build-time support stored in the model
    std::vector<std::size_t> class_counts; // dataset instances in the region, per label
    double accuracy = 0.0;              // collapsed map vs labels on those instances
    struct ConstraintCell {
        int layer = 0;
        int neuron = 0;
        std::string sense; // ">", "<=", or "/" when redundant
    };
    std::vector<ConstraintCell> constraints;
};

struct PbfTable {
    std::vector<PbfTableRow> rows;
    std::size_t covered_instances = 0;
    std::size_t dataset_size = 0;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const PbfTableRow& r : rows) {
            nlohmann::json cons = nlohmann::json::array();
            for (const auto& c : r.constraints)
                cons.push_back({{"layer", c.layer}, {"neuron", c.neuron}, {"sense", c.sense}});
            arr.push_back({{"configuration", r.configuration.states},
                           {"support", r.support},
                           {"class_counts", r.class_counts},
                           {"accuracy", r.accuracy},
                           {"constraints", cons}});
        }
        return {{"rows", arr},
                {"covered_instances", covered_instances},
                {"dataset_size", dataset_size}};
    }
};

/// The top_j regions by support, with per-class instance counts, the
/// collapsed map's accuracy inside each region, and every boundary
/// constraint's sense ("/" marks constraints redundancy analysis removed).
/// Requires a model whose redundancy flags were computed.
inline PbfTable pbf_table(const Network& net, const InterpretationModel& model,
                          const Dataset& data, std::size_t top_j) {
    model.check_matches(net);
    if (!model.reduced())
        throw DomainError("pbf table needs a model built with redundancy analysis");

    std::vector<const ModelEntry*> order;
    for (const auto& [c, e] : model.entries()) order.push_back(&e);
    std::stable_sort(order.begin(), order.end(), [](const ModelEntry* a, const ModelEntry* b) {
        return a->support > b->support;
    });
    if (order.size() > top_j) order.resize(top_j);

    // Group the dataset by configuration once.
    std::map<Configuration, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < data.size(); ++i)
        members[conf(net, data.x.row(i))].push_back(i);

    const std::size_t classes = net.class_count();
    PbfTable table;
    table.dataset_size = data.size();
    for (const ModelEntry* e : order) {
        PbfTableRow row;
        row.configuration = e->configuration;
        row.support = e->support;
        row.class_counts.assign(classes, 0);
        const auto it = members.find(e->configuration);
        std::size_t hits = 0, total = 0;
        if (it != members.end()) {
            for (const std::size_t i : it->second) {
                row.class_counts[static_cast<std::size_t>(data.y[i])] += 1;
                const Vec p = softmax(affine(e->output.W, data.x.row(i), e->output.b));
                hits += static_cast<int>(predicted_class(p)) == data.y[i];
                ++total;
            }
        }
        row.accuracy = total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
        table.covered_instances += total;
        for (const HalfSpace& h : e->polytope.constraints) {
            row.constraints.push_back(
                {h.layer, h.neuron, h.redundant ? "/" : (h.strict_greater ? ">" : "<=")});
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

/// Fixed-width text rendering of the table, one region per line.
inline std::string render_pbf_table(const PbfTable& t) {
    std::string out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const PbfTableRow& row = t.rows[r];
        out += "region " + std::to_string(r + 1) + ": support=" + std::to_string(row.support);
        out += " counts=[";
        for (std::size_t k = 0; k < row.class_counts.size(); ++k) {
            if (k) out += ",";
            out += std::to_string(row.class_counts[k]);
        }
        out += "] accuracy=" + format_double(row.accuracy) + " |";
        for (const auto& c : row.constraints)
            out += " z(" + std::to_string(c.layer) + "," + std::to_string(c.neuron) + ")" + c.sense;
        out += "\n";
    }
    out += "covered " + std::to_string(t.covered_instances) + " of " +
           std::to_string(t.dataset_size) + " instances\n";
    return out;
}

// ---------------------------------------------------------------------------
// File emitters.

inline void write_text_file(const std::string& content, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw DataError("failed writing " + path.string());
}

inline void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
    write_text_file(j.dump(2) + "\n", path);
}

inline void write_exactness_csv(const ExactnessReport& rep, const std::filesystem::path& path) {
    std::string out = "index,p_net,p_llc,abs_diff\n";
    for (const ExactnessRow& r : rep.rows)
        out += std::to_string(r.index) + "," + format_double(r.p_net) + "," +
               format_double(r.p_llc) + "," + format_double(r.diff) + "\n";
    write_text_file(out, path);
}

inline void write_consistency_csv(const ConsistencyReport& rep,
                                  const std::filesystem::path& path) {
    std::string out = "index,neighbor,cosine,same_region\n";
    for (const ConsistencyRow& r : rep.rows)
        out += std::to_string(r.index) + "," + std::to_string(r.neighbor) + "," +
               format_double(r.cosine) + "," + (r.same_region ? "1" : "0") + "\n";
    write_text_file(out, path);
}

inline void write_hack_csv(const HackReport& rep, const std::filesystem::path& path) {
    std::string out = "m,source,index,p_before,p_after,flipped\n";
    for (const HackCell& c : rep.cells) {
        const auto dump_arm = [&out, &c](const char* name, const HackArm& arm) {
            for (const HackRow& r : arm.rows)
                out += std::to_string(c.m) + "," + name + "," + std::to_string(r.index) + "," +
                       format_double(r.p_before) + "," + format_double(r.p_after) + "," +
                       (r.flipped ? "1" : "0") + "\n";
        };
        dump_arm("guided", c.guided);
        dump_arm("random", c.random);
    }
    write_text_file(out, path);
}

/// Write a signed overlay vector as two grayscale PGM images (P5, maxval
/// 255): positive part and negative part, both scaled by the vector's
/// largest magnitude.
inline void write_overlay_pgm(std::span<const double> v, std::size_t width, std::size_t height,
                              const std::filesystem::path& positive_path,
                              const std::filesystem::path& negative_path) {
    if (v.size() != width * height)
        throw DimensionError("overlay size does not match image dimensions");
    double peak = 0.0;
    for (const double x : v) peak = std::max(peak, std::abs(x));
    const auto emit = [&](const std::filesystem::path& path, double sign) {
        std::string body = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
        body.reserve(body.size() + v.size());
        for (const double x : v) {
            const double s = peak == 0.0 ? 0.0 : std::max(0.0, sign * x) / peak;
            body.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * s))));
        }
        write_text_file(body, path);
    };
    emit(positive_path, 1.0);
    emit(negative_path, -1.0);
}

} // namespace openbox
