// Command-line front end: dataset generation, training, decomposition into
// local linear classifiers, the analysis reports, and a verification pass.
//
// Exit codes: 0 success, 1 usage error, 2 data/model error, 3 verification
// failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <openbox/openbox.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw openbox::DataError("cannot open " + path.string() + " for digesting");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    return openbox::hex64(openbox::fnv1a64(std::span<const char>(bytes.data(), bytes.size())));
}

/// Records one run: resolved options, seeds, input/output digests, timings.
/// Timings vary run to run, so manifests are the one output class callers
/// must not byte-compare; everything else the tool writes is reproducible.
class Manifest {
public:
    explicit Manifest(std::string subcommand) : start_(std::chrono::steady_clock::now()) {
        j_["subcommand"] = std::move(subcommand);
        j_["options"] = json::object();
        j_["inputs"] = json::object();
        j_["outputs"] = json::object();
    }

    template <typename T>
    void option(const std::string& key, const T& value) {
        j_["options"][key] = value;
    }
    void input(const fs::path& p) { j_["inputs"][p.string()] = file_digest(p); }
    void output(const fs::path& p) { j_["outputs"][p.string()] = file_digest(p); }

    void write(const fs::path& path) {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        j_["timings"]["total_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        openbox::write_json_file(j_, path);
    }

private:
    json j_;
    std::chrono::steady_clock::time_point start_;
};

std::size_t default_threads() {
    if (const char* env = std::getenv("OPENBOX_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end && *end == '\0') return static_cast<std::size_t>(v);
        std::cerr << "warning: ignoring invalid OPENBOX_THREADS value \"" << env << "\"\n";
    }
    return 1;
}

std::vector<std::size_t> parse_size_list(const std::string& s, const char* what) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(item, &pos);
            if (pos != item.size() || v == 0) throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw CLI::ValidationError(std::string(what) + ": \"" + item +
                                       "\" is not a positive integer");
        }
    }
    if (out.empty()) throw CLI::ValidationError(std::string(what) + ": empty list");
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw openbox::DataError("cannot create directory " + dir.string());
}

// ---------------------------------------------------------------------------

struct DataSynArgs {
    std::size_t n_train = 8000;
    std::size_t n_test = 2000;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int run_data_syn(const DataSynArgs& a) {
    ensure_dir(a.out_dir);
    Manifest man("data syn");
    man.option("train", a.n_train);
    man.option("test", a.n_test);
    man.option("seed", a.seed);
    man.option("out-dir", a.out_dir);
    std::cout << "seed: " << a.seed << "\n";

    // One stream, train first: the test split never overlaps the train draw.
    openbox::Rng rng(a.seed);
    const openbox::Dataset train = openbox::gen_syn(a.n_train, rng.next_u64());
    const openbox::Dataset test = openbox::gen_syn(a.n_test, rng.next_u64());

    const fs::path train_path = fs::path(a.out_dir) / "train.obx";
    const fs::path test_path = fs::path(a.out_dir) / "test.obx";
    openbox::save_dataset(train, train_path);
    openbox::save_dataset(test, test_path);
    man.output(train_path);
    man.output(test_path);
    man.write(fs::path(a.out_dir) / "data_manifest.json");
    std::cout << "wrote " << train_path.string() << " (" << train.size() << " instances), "
              << test_path.string() << " (" << test.size() << " instances)\n";
    return 0;
}

struct DataFmnistArgs {
    std::string dir;
    int class_a = 9;
    int class_b = 8;
    std::size_t train_cap = 4000;
    std::size_t test_cap = 3000;
    std::string out_dir;
};

int run_data_fmnist(const DataFmnistArgs& a) {
    std::string dir = a.dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("OPENBOX_FMNIST_DIR")) dir = env;
    }
    if (dir.empty())
        throw openbox::DataError("no IDX directory: pass --dir or set OPENBOX_FMNIST_DIR");
    ensure_dir(a.out_dir);
    Manifest man("data fmnist");
    man.option("dir", dir);
    man.option("class-a", a.class_a);
    man.option("class-b", a.class_b);
    man.option("train-cap", a.train_cap);
    man.option("test-cap", a.test_cap);
    man.option("out-dir", a.out_dir);
    for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"})
        man.input(fs::path(dir) / name);

    const openbox::PairSplits splits =
        openbox::load_fmnist_pair(dir, a.class_a, a.class_b, a.train_cap, a.test_cap);
    const fs::path train_path = fs::path(a.out_dir) / "train.obx";
    const fs::path test_path = fs::path(a.out_dir) / "test.obx";
    openbox::save_dataset(splits.train, train_path);
    openbox::save_dataset(splits.test, test_path);
    man.output(train_path);
    man.output(test_path);
    man.write(fs::path(a.out_dir) / "data_manifest.json");
    std::cout << "wrote " << train_path.string() << " (" << splits.train.size()
              << " instances), " << test_path.string() << " (" << splits.test.size()
              << " instances)\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string arch;
    openbox::TrainConfig cfg;
    std::string out;
};

int run_train(const TrainArgs& a) {
    const std::vector<std::size_t> arch = parse_size_list(a.arch, "--arch");
    Manifest man("train");
    man.option("data", a.data);
    man.option("arch", arch);
    man.option("epochs", a.cfg.epochs);
    man.option("batch", a.cfg.batch_size);
    man.option("lr", a.cfg.learning_rate);
    man.option("seed", a.cfg.seed);
    man.option("l1", a.cfg.l1);
    man.option("nonneg", a.cfg.nonneg);
    man.option("init-scale", a.cfg.init_scale);
    man.option("hidden-bias", a.cfg.hidden_bias_init);
    man.option("out", a.out);
    man.input(a.data);
    std::cout << "seed: " << a.cfg.seed << "\n";

    const openbox::Dataset data = openbox::load_dataset(a.data);
    const openbox::Network net = openbox::train(arch, data.x, data.y, a.cfg);
    openbox::save_network(net, a.out);
    man.output(a.out);
    man.write(fs::path(a.out).string() + ".manifest.json");
    std::cout << "train accuracy: "
              << openbox::format_double(openbox::accuracy(net, data.x, data.y)) << "\n"
              << "wrote " << a.out << " (fingerprint " << openbox::hex64(net.fingerprint())
              << ")\n";
    return 0;
}

struct DecomposeArgs {
    std::string net;
    std::string data;
    std::string out;
    bool skip_redundancy = false;
    double eps = 1e-7;
    std::size_t threads = 0;
};

int run_decompose(const DecomposeArgs& a) {
    Manifest man("openbox");
    man.option("net", a.net);
    man.option("data", a.data);
    man.option("out", a.out);
    man.option("skip-redundancy", a.skip_redundancy);
    man.option("eps", a.eps);
    man.option("threads", a.threads);
    man.input(a.net);
    man.input(a.data);

    const openbox::Network net = openbox::load_network(a.net);
    const openbox::Dataset data = openbox::load_dataset(a.data);
    openbox::DecompositionOptions opts;
    opts.run_redundancy = !a.skip_redundancy;
    opts.redundancy_eps = a.eps;
    opts.threads = a.threads;
    openbox::DecompositionStats stats;
    const openbox::InterpretationModel model = openbox::decompose(net, data.x, opts, &stats);
    openbox::save_model(model, a.out);
    man.output(a.out);
    man.write(fs::path(a.out).string() + ".manifest.json");
    std::cout << "regions: " << model.size() << " (from " << stats.processed << " instances";
    if (stats.skipped) std::cout << ", skipped " << stats.skipped << " non-finite";
    std::cout << ")\nwrote " << a.out << "\n";
    return 0;
}

struct ReportArgs {
    std::string net;
    std::string model;
    std::string data;
    std::string out_dir;
    std::size_t threads = 0;
    // consistency / hack
    std::size_t samples = 600;
    std::uint64_t seed = 0;
    std::string ms = "10,20,40";
    // debug
    std::size_t limit = 20;
    std::size_t width = 0, height = 0;
    // pbf
    std::size_t top = 3;
};

struct LoadedTriple {
    openbox::Network net;
    openbox::InterpretationModel model;
    openbox::Dataset data;
};

LoadedTriple load_triple(const ReportArgs& a, Manifest& man) {
    man.option("net", a.net);
    man.option("model", a.model);
    man.option("data", a.data);
    man.option("out-dir", a.out_dir);
    man.option("threads", a.threads);
    man.input(a.net);
    man.input(a.model);
    man.input(a.data);
    return {openbox::load_network(a.net), openbox::load_model(a.model),
            openbox::load_dataset(a.data)};
}

int run_report_exactness(const ReportArgs& a) {
    ensure_dir(a.out_dir);
    Manifest man("report exactness");
    const LoadedTriple t = load_triple(a, man);
    const openbox::ExactnessReport rep =
        openbox::exactness_report(t.net, t.model, t.data, a.threads);
    const fs::path csv = fs::path(a.out_dir) / "exactness.csv";
    const fs::path js = fs::path(a.out_dir) / "exactness.json";
    openbox::write_exactness_csv(rep, csv);
    openbox::write_json_file(rep.summary_json(), js);
    man.output(csv);
    man.output(js);
    man.write(fs::path(a.out_dir) / "exactness_manifest.json");
    std::cout << "max |p_net - p_llc|: " << openbox::format_double(rep.max_diff) << " over "
              << rep.rows.size() << " instances\n";
    return 0;
}

int run_report_consistency(const ReportArgs& a) {
    ensure_dir(a.out_dir);
    Manifest man("report consistency");
    const LoadedTriple t = load_triple(a, man);
    man.option("samples", a.samples);
    man.option("seed", a.seed);
    std::cout << "seed: " << a.seed << "\n";
    const openbox::ConsistencyReport rep =
        openbox::consistency_report(t.net, t.model, t.data, a.samples, a.seed, a.threads);
    const fs::path csv = fs::path(a.out_dir) / "consistency.csv";
    const fs::path js = fs::path(a.out_dir) / "consistency.json";
    openbox::write_consistency_csv(rep, csv);
    openbox::write_json_file(rep.summary_json(), js);
    man.output(csv);
    man.output(js);
    man.write(fs::path(a.out_dir) / "consistency_manifest.json");
    std::cout << "median cosine: " << openbox::format_double(rep.median)
              << ", exact ones: " << openbox::format_double(rep.fraction_exact) << "\n";
    return 0;
}

int run_report_hack(const ReportArgs& a) {
    ensure_dir(a.out_dir);
    Manifest man("report hack");
    const LoadedTriple t = load_triple(a, man);
    const std::vector<std::size_t> ms = parse_size_list(a.ms, "--m");
    man.option("m", ms);
    man.option("samples", a.samples);
    man.option("seed", a.seed);
    std::cout << "seed: " << a.seed << "\n";
    const openbox::HackReport rep =
        openbox::hack_report(t.net, t.model, t.data, ms, a.samples, a.seed, a.threads);
    const fs::path csv = fs::path(a.out_dir) / "hack.csv";
    const fs::path js = fs::path(a.out_dir) / "hack.json";
    openbox::write_hack_csv(rep, csv);
    openbox::write_json_file(rep.summary_json(), js);
    man.output(csv);
    man.output(js);
    man.write(fs::path(a.out_dir) / "hack_manifest.json");
    for (const openbox::HackCell& c : rep.cells)
        std::cout << "m=" << c.m << " guided cpp=" << openbox::format_double(c.guided.cpp)
                  << " flips=" << c.guided.flips
                  << " | random cpp=" << openbox::format_double(c.random.cpp)
                  << " flips=" << c.random.flips << "\n";
    return 0;
}

int run_report_debug(const ReportArgs& a) {
    ensure_dir(a.out_dir);
    Manifest man("report debug");
    const LoadedTriple t = load_triple(a, man);
    man.option("limit", a.limit);
    const openbox::DebugReport rep = openbox::debug_report(t.net, t.model, t.data, a.limit);

    json records = json::array();
    std::size_t w = a.width, h = a.height;
    if (w == 0 && h == 0) {
        // 28x28 is the one image shape the bundled pipelines produce; other
        // square inputs also render.
        const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(
            static_cast<double>(t.data.dim()))));
        if (side * side == t.data.dim()) w = h = side;
    }
    std::vector<fs::path> overlays;
    for (const openbox::DebugRecord& r : rep.records) {
        records.push_back({{"index", r.index},
                           {"label", r.label},
                           {"predicted", r.predicted},
                           {"p_predicted", r.p_predicted},
                           {"features_predicted", r.features_predicted},
                           {"features_label", r.features_label}});
        if (w * h == t.data.dim() && w != 0) {
            const std::string stem = "debug_" + std::to_string(r.index);
            const fs::path pp = fs::path(a.out_dir) / (stem + "_predicted_pos.pgm");
            const fs::path pn = fs::path(a.out_dir) / (stem + "_predicted_neg.pgm");
            const fs::path lp = fs::path(a.out_dir) / (stem + "_label_pos.pgm");
            const fs::path ln = fs::path(a.out_dir) / (stem + "_label_neg.pgm");
            openbox::write_overlay_pgm(r.features_predicted, w, h, pp, pn);
            openbox::write_overlay_pgm(r.features_label, w, h, lp, ln);
            overlays.insert(overlays.end(), {pp, pn, lp, ln});
        }
    }
    json out = rep.summary_json();
    out["records"] = std::move(records);
    const fs::path js = fs::path(a.out_dir) / "debug.json";
    openbox::write_json_file(out, js);
    man.output(js);
    for (const fs::path& p : overlays) man.output(p);
    man.write(fs::path(a.out_dir) / "debug_manifest.json");
    std::cout << "misclassified: " << rep.misclassified << " of " << t.data.size()
              << " (accuracy " << openbox::format_double(rep.accuracy) << "), " << overlays.size()
              << " overlay images\n";
    return 0;
}

int run_report_pbf(const ReportArgs& a) {
    ensure_dir(a.out_dir);
    Manifest man("report pbf");
    const LoadedTriple t = load_triple(a, man);
    man.option("top", a.top);
    const openbox::PbfTable table = openbox::pbf_table(t.net, t.model, t.data, a.top);
    const fs::path js = fs::path(a.out_dir) / "pbf.json";
    const fs::path txt = fs::path(a.out_dir) / "pbf.txt";
    openbox::write_json_file(table.to_json(), js);
    const std::string rendered = openbox::render_pbf_table(table);
    openbox::write_text_file(rendered, txt);
    man.output(js);
    man.output(txt);
    man.write(fs::path(a.out_dir) / "pbf_manifest.json");
    std::cout << rendered;
    return 0;
}

struct VerifyArgs {
    std::string net;
    std::string model;
    std::string data;
    std::size_t partition_limit = 2000;
    std::size_t redundancy_samples = 1000;
    std::size_t redundancy_polytopes = 50;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

int run_verify(const VerifyArgs& a) {
    const openbox::Network net = openbox::load_network(a.net);
    const openbox::InterpretationModel model = openbox::load_model(a.model);
    const openbox::Dataset data = openbox::load_dataset(a.data);
    const std::size_t threads = openbox::resolve_threads(a.threads);
    bool ok = true;
    const auto check = [&ok](const std::string& name, bool pass, const std::string& detail) {
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
        ok = ok && pass;
    };

    model.check_matches(net); // throws StaleModelError (exit 2) on mismatch
    std::cout << "fingerprint: " << openbox::hex64(model.fingerprint()) << " (matches)\n";

    const openbox::ExactnessReport ex = openbox::exactness_report(net, model, data, threads);
    check("exactness", ex.max_diff < 1e-9,
          "max diff " + openbox::format_double(ex.max_diff) + " over " +
              std::to_string(ex.rows.size()) + " instances");

    // Partition: membership in an entry's polytope must coincide with the
    // forward pass landing on that entry's configuration.
    const std::size_t n_check = a.partition_limit == 0
                                    ? data.size()
                                    : std::min(a.partition_limit, data.size());
    std::vector<std::size_t> violations(n_check, 0);
    openbox::parallel_for(n_check, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto x = data.x.row(i);
            const openbox::Configuration c = openbox::conf(net, x);
            for (const auto& [cfg, entry] : model.entries()) {
                const bool inside = openbox::contains(entry.polytope, x);
                if (inside != (cfg == c)) ++violations[i];
            }
        }
    });
    std::size_t bad = 0;
    for (const std::size_t v : violations) bad += v;
    check("partition", bad == 0,
          std::to_string(bad) + " violations over " + std::to_string(n_check) +
              " instances x " + std::to_string(model.size()) + " regions");

    if (model.reduced() && model.box()) {
        std::size_t tested = 0, bad_samples = 0;
        for (const auto& [cfg, entry] : model.entries()) {
            if (tested >= a.redundancy_polytopes) break;
            bad_samples += openbox::redundancy_violations(entry.polytope, *model.box(),
                                                          a.redundancy_samples,
                                                          a.seed + tested);
            ++tested;
        }
        check("redundancy", bad_samples == 0,
              std::to_string(bad_samples) + " violations over " + std::to_string(tested) +
                  " regions x " + std::to_string(a.redundancy_samples) + " samples");
    } else {
        std::cout << "[SKIP] redundancy: model was built without redundancy analysis\n";
    }

    if (!ok) return 3;
    std::cout << "verified\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decompose piecewise-linear networks into exact local linear classifiers"};
    app.require_subcommand(1);
    const std::size_t env_threads = default_threads();

    // --- data ---
    auto* data_cmd = app.add_subcommand("data", "Generate or import datasets");
    data_cmd->require_subcommand(1);
    DataSynArgs syn_args;
    auto* syn = data_cmd->add_subcommand("syn", "Sample the 2-D synthetic problem");
    syn->add_option("--train", syn_args.n_train, "training instances");
    syn->add_option("--test", syn_args.n_test, "test instances");
    syn->add_option("--seed", syn_args.seed, "RNG seed");
    syn->add_option("--out-dir", syn_args.out_dir, "output directory")->required();

    DataFmnistArgs fm_args;
    auto* fm = data_cmd->add_subcommand("fmnist", "Extract a two-class split from IDX files");
    fm->add_option("--dir", fm_args.dir, "directory with the four IDX files "
                                         "(default: $OPENBOX_FMNIST_DIR)");
    fm->add_option("--class-a", fm_args.class_a, "original label mapped to 0")->required();
    fm->add_option("--class-b", fm_args.class_b, "original label mapped to 1")->required();
    fm->add_option("--train-cap", fm_args.train_cap, "max training instances per class");
    fm->add_option("--test-cap", fm_args.test_cap, "max test instances per class");
    fm->add_option("--out-dir", fm_args.out_dir, "output directory")->required();

    // --- train ---
    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "Train a ReLU classifier with SGD");
    tr->add_option("--data", train_args.data, "training dataset (.obx)")->required();
    tr->add_option("--arch", train_args.arch, "layer sizes, e.g. 2,4,16,2,2")->required();
    tr->add_option("--epochs", train_args.cfg.epochs, "training epochs");
    tr->add_option("--batch", train_args.cfg.batch_size, "mini-batch size");
    tr->add_option("--lr", train_args.cfg.learning_rate, "learning rate");
    tr->add_option("--seed", train_args.cfg.seed, "RNG seed");
    tr->add_option("--l1", train_args.cfg.l1, "L1 penalty on weights");
    tr->add_flag("--nonneg", train_args.cfg.nonneg, "project weights and biases onto >= 0");
    tr->add_option("--init-scale", train_args.cfg.init_scale, "multiplier on the init bound");
    tr->add_option("--hidden-bias", train_args.cfg.hidden_bias_init,
                   "initial hidden-layer bias (keeps narrow ReLU layers alive)");
    tr->add_option("--out", train_args.out, "output network JSON")->required();

    // --- openbox (decompose) ---
    DecomposeArgs dec_args;
    dec_args.threads = env_threads;
    auto* dec = app.add_subcommand(
        "openbox", "Decompose a network into local linear classifiers over a dataset");
    dec->alias("decompose");
    dec->add_option("--net", dec_args.net, "network JSON")->required();
    dec->add_option("--data", dec_args.data, "dataset (.obx)")->required();
    dec->add_option("--out", dec_args.out, "output model JSON")->required();
    dec->add_flag("--skip-redundancy", dec_args.skip_redundancy,
                  "keep all constraints, skip the LP screening");
    dec->add_option("--eps", dec_args.eps, "redundancy tolerance");
    dec->add_option("--threads", dec_args.threads,
                    "worker threads (0 = all cores; default $OPENBOX_THREADS or 1)");

    // --- report ---
    ReportArgs rep_args;
    rep_args.threads = env_threads;
    auto* rep = app.add_subcommand("report", "Run an analysis over net + model + data");
    rep->require_subcommand(1);
    const auto add_common = [&rep_args](CLI::App* sub) {
        sub->add_option("--net", rep_args.net, "network JSON")->required();
        sub->add_option("--model", rep_args.model, "model JSON")->required();
        sub->add_option("--data", rep_args.data, "dataset (.obx)")->required();
        sub->add_option("--out-dir", rep_args.out_dir, "output directory")->required();
        sub->add_option("--threads", rep_args.threads, "worker threads (0 = all cores)");
    };
    auto* rex = rep->add_subcommand("exactness", "Network vs collapsed map, per instance");
    add_common(rex);
    auto* rco = rep->add_subcommand("consistency", "Decision features vs nearest neighbor");
    add_common(rco);
    rco->add_option("--samples", rep_args.samples, "sampled instances");
    rco->add_option("--seed", rep_args.seed, "sampling seed");
    auto* rha = rep->add_subcommand("hack", "Guided vs random feature knockout");
    add_common(rha);
    rha->add_option("--m", rep_args.ms, "knockout sizes, e.g. 10,20,40");
    rha->add_option("--samples", rep_args.samples, "sampled instances");
    rha->add_option("--seed", rep_args.seed, "sampling seed");
    auto* rde = rep->add_subcommand("debug", "Overlays for misclassified instances");
    add_common(rde);
    rde->add_option("--limit", rep_args.limit, "max records (0 = all)");
    rde->add_option("--width", rep_args.width, "image width for PGM overlays");
    rde->add_option("--height", rep_args.height, "image height for PGM overlays");
    auto* rpb = rep->add_subcommand("pbf", "Boundary features of the top regions");
    add_common(rpb);
    rpb->add_option("--top", rep_args.top, "regions to include");

    // --- verify ---
    VerifyArgs ver_args;
    ver_args.threads = env_threads;
    auto* ver = app.add_subcommand("verify", "Check a net + model + data triple");
    ver->add_option("--net", ver_args.net, "network JSON")->required();
    ver->add_option("--model", ver_args.model, "model JSON")->required();
    ver->add_option("--data", ver_args.data, "dataset (.obx)")->required();
    ver->add_option("--partition-limit", ver_args.partition_limit,
                    "instances for the partition check (0 = all)");
    ver->add_option("--redundancy-samples", ver_args.redundancy_samples,
                    "box samples per region");
    ver->add_option("--redundancy-polytopes", ver_args.redundancy_polytopes,
                    "regions to sample");
    ver->add_option("--seed", ver_args.seed, "sampling seed");
    ver->add_option("--threads", ver_args.threads, "worker threads (0 = all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1; // contract: usage problems exit 1
    }

    try {
        if (syn->parsed()) return run_data_syn(syn_args);
        if (fm->parsed()) return run_data_fmnist(fm_args);
        if (tr->parsed()) return run_train(train_args);
        if (dec->parsed()) return run_decompose(dec_args);
        if (rex->parsed()) return run_report_exactness(rep_args);
        if (rco->parsed()) return run_report_consistency(rep_args);
        if (rha->parsed()) return run_report_hack(rep_args);
        if (rde->parsed()) return run_report_debug(rep_args);
        if (rpb->parsed()) return run_report_pbf(rep_args);
        if (ver->parsed()) return run_verify(ver_args);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1; // malformed option values are usage errors
    } catch (const openbox::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
