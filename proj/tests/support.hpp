#pragma once

// Shared test fixtures and independent oracles. This header is deliberately
// framework-free: both the Catch2 suite and the standalone acceptance
// harness include it.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <openbox/openbox.hpp>

namespace testsupport {

namespace fs = std::filesystem;

/// Tiny hand-checkable network: identity first layer, then a 2x2 mixing
/// layer. Every expected value used against it was computed by hand.
///   W0 = I, b0 = 0;  W1 = [[1,-1],[-1,1]], b1 = 0;  ReLU.
inline openbox::Network net_a() {
    return openbox::Network({2, 2, 2},
                            {openbox::Matrix{{1.0, 0.0}, {0.0, 1.0}},
                             openbox::Matrix{{1.0, -1.0}, {-1.0, 1.0}}},
                            {openbox::Vec{0.0, 0.0}, openbox::Vec{0.0, 0.0}},
                            openbox::ActivationSpec::relu());
}

inline openbox::Configuration config_of(std::initializer_list<int> states) {
    openbox::Configuration c;
    for (const int s : states) c.states.push_back(static_cast<std::uint8_t>(s));
    return c;
}

/// Random fully-connected ReLU network for property tests.
inline openbox::Network random_network(openbox::Rng& rng,
                                       const std::vector<std::size_t>& sizes,
                                       double scale = 1.0) {
    std::vector<openbox::Matrix> weights;
    std::vector<openbox::Vec> biases;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        openbox::Matrix w(sizes[l + 1], sizes[l]);
        for (double& v : w.data()) v = rng.uniform(-scale, scale);
        weights.push_back(std::move(w));
        openbox::Vec b(sizes[l + 1]);
        for (double& v : b) v = rng.uniform(-scale, scale);
        biases.push_back(std::move(b));
    }
    return openbox::Network(sizes, std::move(weights), std::move(biases),
                            openbox::ActivationSpec::relu());
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem = "openbox-test") {
        static std::atomic<unsigned> counter{0};
        path_ = fs::temp_directory_path() /
                (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Run the CLI binary; returns the process exit code, with stdout+stderr
/// appended to log_path.
inline int run_cli(const std::string& args, const fs::path& log_path = "/dev/null") {
    const std::string cmd = std::string(OPENBOX_BIN_DIR) + "/openbox " + args + " >>" +
                            log_path.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------
// Independent LP oracle: brute-force vertex enumeration. Only sensible for a
// handful of variables, which is exactly where it is used.

/// Gaussian elimination with partial pivoting; false when near-singular.
inline bool solve_linear(openbox::Matrix a, openbox::Vec b, openbox::Vec& out) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-10) return false;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out[i] = b[i] / a(i, i);
    return true;
}

/// Maximum of the objective over the feasible region by checking every
/// vertex (every n-subset of tight constraints, bounds included as rows).
/// Requires a bounded region; nullopt means no feasible vertex, i.e. the
/// region is empty.
inline std::optional<double> brute_force_lp_max(const openbox::LinearProgram& lp,
                                                double feas_tol = 1e-7) {
    const std::size_t n = lp.variable_count();
    std::vector<openbox::Vec> rows;
    openbox::Vec rhs;
    for (const openbox::LpConstraint& c : lp.rows) {
        if (c.rel != openbox::Relation::GreaterEq) {
            rows.push_back(c.coeff);
            rhs.push_back(c.rhs);
        }
        if (c.rel != openbox::Relation::LessEq) {
            openbox::Vec neg = c.coeff;
            for (double& v : neg) v = -v;
            rows.push_back(std::move(neg));
            rhs.push_back(-c.rhs);
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isfinite(lp.upper[j])) {
            openbox::Vec e(n, 0.0);
            e[j] = 1.0;
            rows.push_back(std::move(e));
            rhs.push_back(lp.upper[j]);
        }
        if (std::isfinite(lp.lower[j])) {
            openbox::Vec e(n, 0.0);
            e[j] = -1.0;
            rows.push_back(std::move(e));
            rhs.push_back(-lp.lower[j]);
        }
    }

    const std::size_t m = rows.size();
    std::optional<double> best;
    std::vector<std::size_t> pick(n, 0);
    // Enumerate all strictly increasing index tuples of length n.
    const auto advance = [&pick, m, n]() -> bool {
        std::size_t i = n;
        while (i-- > 0) {
            if (++pick[i] <= m - (n - i)) {
                for (std::size_t k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
                return true;
            }
        }
        return false;
    };
    if (m < n) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i) pick[i] = i;
    do {
        openbox::Matrix a(n, n);
        openbox::Vec b(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) a(i, j) = rows[pick[i]][j];
            b[i] = rhs[pick[i]];
        }
        openbox::Vec x;
        if (!solve_linear(a, b, x)) continue;
        bool feasible = true;
        for (std::size_t r = 0; r < m && feasible; ++r)
            feasible = openbox::dot(rows[r], x) <= rhs[r] + feas_tol;
        if (!feasible) continue;
        const double val = openbox::dot(lp.objective, x);
        if (!best || val > *best) best = val;
    } while (advance());
    return best;
}

// ---------------------------------------------------------------------------
// Independent redundancy oracle: judge every constraint by one LP against all
// constraints not yet flagged, iterating to a fixpoint. No sequential
// pruning order; disagreement with the production path on a clearly
// non-borderline input is a bug in one of them.

inline std::vector<bool> exhaustive_redundant(const openbox::Polytope& p,
                                              const openbox::BoundingBox& box, double eps) {
    using namespace openbox;
    const std::size_t m = p.constraints.size();
    std::vector<bool> flag(m, false);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < m; ++i) {
            if (flag[i]) continue;
            LinearProgram lp(p.dim);
            for (std::size_t j = 0; j < p.dim; ++j) lp.set_bounds(j, box.lo[j], box.hi[j]);
            for (std::size_t k = 0; k < m; ++k) {
                if (k == i || flag[k]) continue;
                const HalfSpace& h = p.constraints[k];
                lp.add_constraint(h.coeff,
                                  h.strict_greater ? Relation::GreaterEq : Relation::LessEq,
                                  h.bound);
            }
            const HalfSpace& hi = p.constraints[i];
            lp.objective = hi.coeff;
            if (hi.strict_greater)
                for (double& v : lp.objective) v = -v;
            const LpOutcome out = solve(lp);
            if (out.status != LpStatus::Optimal) return flag; // empty region: stop
            const double reach = hi.strict_greater ? -out.optimum : out.optimum;
            const bool redundant = hi.strict_greater ? reach >= hi.bound - eps
                                                     : reach <= hi.bound + eps;
            if (redundant) {
                flag[i] = true;
                changed = true;
            }
        }
    }
    return flag;
}

/// True when any constraint's verdict flips between a loose and a tight
/// tolerance: the generator produced a case too close to call, which both
/// the production path and the oracle may legitimately decide differently.
inline bool redundancy_borderline(const openbox::Polytope& p, const openbox::BoundingBox& box,
                                  double band = 1e-5) {
    const std::vector<bool> tight = exhaustive_redundant(p, box, band);
    const std::vector<bool> loose = exhaustive_redundant(p, box, -band);
    return tight != loose;
}

// ---------------------------------------------------------------------------
// Deterministic image-pair fixture in the standard IDX file layout. Four
// classes carry real mass (9, 8, 4, 2); 9-vs-8 is an easy shape contrast,
// 4-vs-2 shares a torso silhouette and differs in collar and front opening,
// which per-image brightness jitter and pixel noise partly wash out.

inline std::vector<std::uint8_t> fixture_image(int cls, openbox::Rng& rng) {
    std::array<double, 28 * 28> px{};
    const auto block = [&px](int r0, int r1, int c0, int c1, double v) {
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) px[static_cast<std::size_t>(r * 28 + c)] =
                std::max(px[static_cast<std::size_t>(r * 28 + c)], v);
    };
    const auto darken = [&px](int r0, int r1, int c0, int c1, double v) {
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) px[static_cast<std::size_t>(r * 28 + c)] = v;
    };
    switch (cls) {
        case 9: // boot-like: low sole plus heel block
            block(14, 25, 2, 20, 215.0);
            block(17, 26, 14, 26, 185.0);
            break;
        case 8: // bag-like: tall body with a handle gap on top
            block(6, 24, 4, 24, 200.0);
            block(2, 7, 10, 18, 150.0);
            darken(8, 12, 9, 19, 60.0);
            break;
        case 4: // coat-like: torso, sleeves, wide collar, front opening
            block(4, 26, 6, 22, 175.0);
            block(8, 18, 0, 5, 140.0);
            block(8, 18, 23, 28, 140.0);
            block(2, 5, 8, 20, 120.0);
            darken(6, 26, 13, 15, 40.0);
            break;
        case 2: // pullover-like: same torso and sleeves, narrow neck, no opening
            block(4, 26, 6, 22, 175.0);
            block(8, 18, 0, 5, 140.0);
            block(8, 18, 23, 28, 140.0);
            block(2, 5, 11, 17, 120.0);
            break;
        default: // filler classes, each a distinct small block
            block(2 * cls, 2 * cls + 8, 4 + cls, 12 + cls, 160.0);
            break;
    }
    const double scale = rng.uniform(0.72, 1.0);
    std::vector<std::uint8_t> out(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double v = px[i] * scale + rng.uniform(-32.0, 32.0);
        out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

inline void write_fixture_split(const fs::path& images_path, const fs::path& labels_path,
                                std::size_t per_main_class, std::size_t per_filler_class,
                                openbox::Rng& rng) {
    std::vector<int> labels;
    for (int cls = 0; cls < 10; ++cls) {
        const bool main_class = cls == 9 || cls == 8 || cls == 4 || cls == 2;
        const std::size_t count = main_class ? per_main_class : per_filler_class;
        labels.insert(labels.end(), count, cls);
    }
    rng.shuffle(labels);

    openbox::IdxTensor images;
    images.dims = {labels.size(), 28, 28};
    images.data.reserve(labels.size() * 784);
    openbox::IdxTensor label_tensor;
    label_tensor.dims = {labels.size()};
    for (const int cls : labels) {
        const std::vector<std::uint8_t> img = fixture_image(cls, rng);
        images.data.insert(images.data.end(), img.begin(), img.end());
        label_tensor.data.push_back(static_cast<std::uint8_t>(cls));
    }
    openbox::write_idx(images, images_path);
    openbox::write_idx(label_tensor, labels_path);
}

/// Write all four IDX files the pair loader expects. Train split holds 4200
/// images per main class (so the standard 4000 cap engages), test holds
/// 3100 (cap 3000).
inline void write_fixture_idx_dir(const fs::path& dir, std::uint64_t seed = 424242,
                                  std::size_t train_per_class = 4200,
                                  std::size_t test_per_class = 3100) {
    fs::create_directories(dir);
    openbox::Rng rng(seed);
    write_fixture_split(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
                        train_per_class, 8, rng);
    write_fixture_split(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte",
                        test_per_class, 8, rng);
}

} // namespace testsupport
