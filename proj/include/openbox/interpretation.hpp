#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "closed_form.hpp"
#include "errors.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "polytope.hpp"

namespace openbox {

/// One region of the decomposition: the configuration, the collapsed output
/// map that replaces the network there, the governing polytope, how many
/// processed instances landed in it, and up to 8 example instance ids (the
/// smallest ids seen, so the set is independent of processing order).
struct ModelEntry {
    Configuration configuration;
    AffinePrefix output;
    Polytope polytope;
    std::size_t support = 0;
    std::vector<std::size_t> examples;
};

struct DecompositionOptions {
    bool run_redundancy = true;
    double redundancy_eps = 1e-7;
    std::optional<BoundingBox> box; // default: data range expanded by 10%
    std::size_t threads = 1;
};

/// Counters from one decomposition build; instances that could not be
/// processed (non-finite values) are skipped and surfaced here.
struct DecompositionStats {
    std::size_t processed = 0;
    std::size_t skipped = 0;
};

inline constexpr std::size_t kMaxExamplesPerEntry = 8;
inline constexpr std::size_t kNoInstanceId = static_cast<std::size_t>(-1);

namespace detail {
inline void note_example(std::vector<std::size_t>& examples, std::size_t id) {
    if (id == kNoInstanceId) return;
    auto it = std::lower_bound(examples.begin(), examples.end(), id);
    if (it != examples.end() && *it == id) return;
    examples.insert(it, id);
    if (examples.size() > kMaxExamplesPerEntry) examples.resize(kMaxExamplesPerEntry);
}
} // namespace detail

/// The complete set of local linear classifiers extracted from one network:
/// a map from observed activation configuration to its region and collapsed
/// affine map. Bound to the source network by fingerprint; applying it to
/// any other network fails with StaleModelError.
class InterpretationModel {
public:
    InterpretationModel(std::uint64_t fingerprint, std::optional<BoundingBox> box,
                        bool run_redundancy, double redundancy_eps = 1e-7)
        : fingerprint_(fingerprint),
          box_(std::move(box)),
          run_redundancy_(run_redundancy),
          redundancy_eps_(redundancy_eps) {}

    std::uint64_t fingerprint() const { return fingerprint_; }
    const std::optional<BoundingBox>& box() const { return box_; }
    bool reduced() const { return run_redundancy_; }

    const std::map<Configuration, ModelEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    std::size_t total_support() const {
        std::size_t n = 0;
        for (const auto& [c, e] : entries_) n += e.support;
        return n;
    }

    const ModelEntry* find(const Configuration& c) const {
        const auto it = entries_.find(c);
        return it == entries_.end() ? nullptr : &it->second;
    }

    void check_matches(const Network& net) const {
        if (net.fingerprint() != fingerprint_)
            throw StaleModelError("interpretation was built for a different network "
                                  "(fingerprint " + hex64(fingerprint_) + ", network has " +
                                  hex64(net.fingerprint()) + ")");
    }

    /// Account one instance: bump its configuration's entry if present, else
    /// derive the new region's closed form and polytope and insert it.
    const ModelEntry& update(const Network& net, std::span<const double> x,
                             std::size_t instance_id = kNoInstanceId) {
        check_matches(net);
        const Configuration c = conf(net, x);
        auto it = entries_.find(c);
        if (it == entries_.end()) {
            ModelEntry entry = derive_entry(net, c);
            it = entries_.emplace(c, std::move(entry)).first;
        }
        it->second.support += 1;
        detail::note_example(it->second.examples, instance_id);
        return it->second;
    }

    /// Insert a pre-built entry (used by the parallel builder).
    ModelEntry& insert(ModelEntry entry) {
        const Configuration key = entry.configuration;
        return entries_.emplace(key, std::move(entry)).first->second;
    }

    /// Full derivation for one configuration, without touching the model.
    ModelEntry derive_entry(const Network& net, const Configuration& c) const {
        ModelEntry e;
        e.configuration = c;
        std::vector<AffinePrefix> prefixes = fold_configuration(net, c);
        e.polytope = build_polytope(net, prefixes, c);
        e.output = std::move(prefixes.back());
        if (run_redundancy_ && box_) remove_redundant(e.polytope, *box_, redundancy_eps_);
        return e;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["fingerprint"] = hex64(fingerprint_);
        j["reduced"] = run_redundancy_;
        if (box_) j["bbox"] = {{"lo", box_->lo}, {"hi", box_->hi}};
        auto& arr = j["entries"] = nlohmann::json::array();
        for (const auto& [c, e] : entries_) {
            nlohmann::json je;
            je["configuration"] = c.states;
            auto& wh = je["W_hat"] = nlohmann::json::array();
            for (std::size_t i = 0; i < e.output.W.rows(); ++i) {
                const auto r = e.output.W.row(i);
                wh.push_back(Vec(r.begin(), r.end()));
            }
            je["b_hat"] = e.output.b;
            auto& cons = je["polytope"]["constraints"] = nlohmann::json::array();
            for (const HalfSpace& h : e.polytope.constraints) {
                cons.push_back({{"coeff", h.coeff},
                                {"bound", h.bound},
                                {"sense", h.strict_greater ? "gt" : "leq"},
                                {"layer", h.layer},
                                {"neuron", h.neuron},
                                {"redundant", h.redundant}});
            }
            je["support"] = e.support;
            je["examples"] = e.examples;
            arr.push_back(std::move(je));
        }
        return j;
    }

    static InterpretationModel from_json(const nlohmann::json& j) {
        try {
            const std::string fp = j.at("fingerprint").get<std::string>();
            if (fp.size() != 16) throw ParseError("model fingerprint must be 16 hex digits");
            const std::uint64_t fingerprint = std::stoull(fp, nullptr, 16);
            std::optional<BoundingBox> box;
            if (j.contains("bbox")) {
                BoundingBox b;
                b.lo = j.at("bbox").at("lo").get<Vec>();
                b.hi = j.at("bbox").at("hi").get<Vec>();
                if (b.lo.size() != b.hi.size()) throw ParseError("model bbox is ragged");
                box = std::move(b);
            }
            InterpretationModel model(fingerprint, std::move(box),
                                      j.value("reduced", false));
            for (const auto& je : j.at("entries")) {
                ModelEntry e;
                e.configuration.states = je.at("configuration").get<std::vector<std::uint8_t>>();
                const auto wh = je.at("W_hat").get<std::vector<Vec>>();
                e.output.b = je.at("b_hat").get<Vec>();
                if (wh.empty() || wh.size() != e.output.b.size())
                    throw ParseError("model entry W_hat/b_hat shapes disagree");
                e.output.W = Matrix(wh.size(), wh[0].size());
                for (std::size_t i = 0; i < wh.size(); ++i) {
                    if (wh[i].size() != wh[0].size())
                        throw ParseError("model entry W_hat is ragged");
                    std::copy(wh[i].begin(), wh[i].end(), e.output.W.row(i).begin());
                }
                e.polytope.dim = e.output.W.cols();
                e.polytope.reduced = model.reduced();
                for (const auto& jc : je.at("polytope").at("constraints")) {
                    HalfSpace h;
                    h.coeff = jc.at("coeff").get<Vec>();
                    if (h.coeff.size() != e.polytope.dim)
                        throw ParseError("model constraint dimension mismatch");
                    h.bound = jc.at("bound").get<double>();
                    const std::string sense = jc.at("sense").get<std::string>();
                    if (sense != "gt" && sense != "leq")
                        throw ParseError("model constraint sense must be \"gt\" or \"leq\"");
                    h.strict_greater = sense == "gt";
                    h.layer = jc.at("layer").get<int>();
                    h.neuron = jc.at("neuron").get<int>();
                    h.redundant = jc.at("redundant").get<bool>();
                    e.polytope.constraints.push_back(std::move(h));
                }
                e.support = je.at("support").get<std::size_t>();
                e.examples = je.at("examples").get<std::vector<std::size_t>>();
                model.insert(std::move(e));
            }
            return model;
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(std::string("model JSON: ") + ex.what());
        } catch (const std::invalid_argument&) {
            throw ParseError("model fingerprint is not hexadecimal");
        } catch (const std::out_of_range&) {
            throw ParseError("model fingerprint is not hexadecimal");
        }
    }

private:
    std::uint64_t fingerprint_;
    std::optional<BoundingBox> box_;
    bool run_redundancy_;
    double redundancy_eps_ = 1e-7;
    std::map<Configuration, ModelEntry> entries_;
};

/// Decompose a network over a dataset: find every activation configuration
/// the instances realize and derive each one's local linear classifier.
///
/// Work is two passes. Pass one computes configurations and groups
/// instances (parallel over instances, per-instance cost linear in the
/// network size). Pass two derives the closed form, polytope and redundancy
/// flags once per distinct configuration (parallel over configurations).
/// Both passes write to position-determined slots and all merging follows
/// index order, so the result is identical for any thread count.
inline InterpretationModel decompose(const Network& net, const Matrix& instances,
                                     const DecompositionOptions& opts = {},
                                     DecompositionStats* stats = nullptr) {
    if (instances.rows() > 0 && instances.cols() != net.input_dim())
        throw DimensionError("decompose: dataset dimension " + std::to_string(instances.cols()) +
                             " does not match network input " +
                             std::to_string(net.input_dim()));

    BoundingBox box = opts.box ? *opts.box
                               : (instances.rows() > 0 ? bounding_box_of(instances)
                                                       : BoundingBox{Vec(net.input_dim(), 0.0),
                                                                     Vec(net.input_dim(), 0.0)});
    InterpretationModel model(net.fingerprint(), std::move(box), opts.run_redundancy,
                              opts.redundancy_eps);

    const std::size_t n = instances.rows();
    const std::size_t threads = resolve_threads(opts.threads);

    // Pass 1: configuration per instance; non-finite rows are skipped.
    std::vector<Configuration> confs(n);
    std::vector<std::uint8_t> ok(n, 0);
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto row = instances.row(i);
            if (!all_finite(row)) continue;
            confs[i] = conf(net, row);
            ok[i] = 1;
        }
    });

    struct Group {
        std::size_t support = 0;
        std::vector<std::size_t> examples;
    };
    std::map<Configuration, Group> groups;
    for (std::size_t i = 0; i < n; ++i) {
        if (!ok[i]) continue;
        Group& g = groups[std::move(confs[i])];
        g.support += 1;
        detail::note_example(g.examples, i);
    }
    if (stats) {
        stats->processed = 0;
        for (const auto& [c, g] : groups) stats->processed += g.support;
        stats->skipped = n - stats->processed;
    }

    // Pass 2: one derivation per distinct configuration.
    std::vector<const Configuration*> keys;
    keys.reserve(groups.size());
    for (const auto& [c, g] : groups) keys.push_back(&c);
    std::vector<ModelEntry> derived(keys.size());
    parallel_for(keys.size(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) derived[i] = model.derive_entry(net, *keys[i]);
    });

    for (std::size_t i = 0; i < keys.size(); ++i) {
        ModelEntry& e = derived[i];
        const Group& g = groups.at(*keys[i]);
        e.support = g.support;
        e.examples = g.examples;
        model.insert(std::move(e));
    }
    return model;
}

inline void save_model(const InterpretationModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << model.to_json().dump() << '\n';
    if (!out) throw DataError("failed writing " + path.string());
}

inline InterpretationModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return InterpretationModel::from_json(j);
}

} // namespace openbox
