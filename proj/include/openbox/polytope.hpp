#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "closed_form.hpp"
#include "lp.hpp"
#include "matrix.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace openbox {

/// One linear constraint of a polytope: coeff . x > bound when
/// strict_greater, else coeff . x <= bound. The (layer, neuron) pair names
/// the hidden neuron whose activation boundary produced it, in 1-based
/// presentation numbering where the input layer is layer 1.
struct HalfSpace {
    Vec coeff;
    double bound = 0.0;
    bool strict_greater = false;
    int layer = 0;
    int neuron = 0;
    bool redundant = false;
};

/// Convex region of input space, an intersection of half-spaces. `reduced`
/// records whether redundancy analysis has run (a reduced polytope with no
/// redundant flags set is different from one never analyzed).
struct Polytope {
    std::size_t dim = 0;
    std::vector<HalfSpace> constraints;
    bool reduced = false;
};

/// Axis-aligned box, the domain all redundancy reasoning is relative to.
struct BoundingBox {
    Vec lo, hi;

    std::size_t dim() const { return lo.size(); }

    bool contains(std::span<const double> x) const {
        for (std::size_t j = 0; j < x.size(); ++j)
            if (x[j] < lo[j] || x[j] > hi[j]) return false;
        return true;
    }
};

/// Per-coordinate data range expanded by 10% of the range on each side.
/// Constant coordinates stay degenerate on purpose: the domain of interest
/// has no extent there.
inline BoundingBox bounding_box_of(const Matrix& instances, double expand = 0.1) {
    if (instances.rows() == 0) throw DataError("bounding box of an empty dataset");
    const std::size_t d = instances.cols();
    BoundingBox box;
    box.lo.assign(d, std::numeric_limits<double>::infinity());
    box.hi.assign(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < instances.rows(); ++i) {
        const auto r = instances.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            box.lo[j] = std::min(box.lo[j], r[j]);
            box.hi[j] = std::max(box.hi[j], r[j]);
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        const double margin = expand * (box.hi[j] - box.lo[j]);
        box.lo[j] -= margin;
        box.hi[j] += margin;
    }
    return box;
}

/// The region of input space on which a configuration holds.
///
/// A hidden neuron pinned to piece q demands lo_q < z <= hi_q of its
/// pre-activation, and the folded prefixes express that pre-activation as an
/// affine function of the input; each finite interval end therefore yields
/// one half-space over the input. Every input satisfies all constraints
/// exactly when the network's forward pass lands on this configuration.
inline Polytope build_polytope(const Network& net, const std::vector<AffinePrefix>& prefixes,
                               const Configuration& c) {
    if (c.states.size() != net.hidden_unit_count())
        throw DimensionError("build_polytope: configuration does not match network");
    if (prefixes.size() != net.depth() - 1)
        throw DimensionError("build_polytope: prefix list does not match network depth");

    Polytope p;
    p.dim = net.input_dim();
    std::size_t state_pos = 0;
    for (std::size_t l = 0; l + 2 < net.depth(); ++l) {
        const AffinePrefix& pref = prefixes[l];
        for (std::size_t i = 0; i < pref.W.rows(); ++i) {
            const auto& piece = net.activation().piece(c.states[state_pos]);
            const auto row = pref.W.row(i);
            Vec w(row.begin(), row.end());
            const double offset = pref.b[i];
            // Presentation numbering: input layer is 1, first hidden is 2.
            const int layer = static_cast<int>(l) + 2;
            const int neuron = static_cast<int>(i) + 1;
            if (std::isfinite(piece.lo))
                p.constraints.push_back({w, piece.lo - offset, true, layer, neuron, false});
            if (std::isfinite(piece.hi))
                p.constraints.push_back({std::move(w), piece.hi - offset, false, layer, neuron, false});
            ++state_pos;
        }
    }
    return p;
}

/// Exact membership: every constraint holds, strict ones strictly. No
/// tolerance on purpose -- the constraints are built from the same floating
/// arithmetic the forward pass uses, so agreement is exact, and any epsilon
/// would blur the partition property this is used to check.
inline bool contains(const Polytope& p, std::span<const double> x) {
    if (x.size() != p.dim) throw DimensionError("contains: point dimension mismatch");
    for (const HalfSpace& h : p.constraints) {
        const double lhs = dot(h.coeff, x);
        if (h.strict_greater ? !(lhs > h.bound) : !(lhs <= h.bound)) return false;
    }
    return true;
}

struct RedundancyResult {
    std::size_t removed = 0;
    bool empty_in_box = false;
};

/// Mark constraints no other constraint set implies, relative to a box.
///
/// Classic one-LP-per-constraint screening: constraint i is redundant when
/// maximizing its (normalized <=) left-hand side over the OTHER remaining
/// constraints plus the box cannot exceed its own bound. Already-removed
/// constraints stay out of later subproblems, so each survivor is
/// irredundant relative to the final set. Strict constraints are closed for
/// the LP; ties within eps count as redundant. A region with no point inside
/// the box is reported back with nothing marked: redundancy is meaningless
/// there, and the caller may want to know (such regions cannot contain data).
inline RedundancyResult remove_redundant(Polytope& p, const BoundingBox& box, double eps = 1e-7) {
    if (box.dim() != p.dim) throw DimensionError("remove_redundant: box dimension mismatch");
    RedundancyResult res;

    // Normalized view: row i means n_i . x <= b_i.
    const std::size_t m = p.constraints.size();
    std::vector<Vec> normal(m);
    Vec bound(m);
    for (std::size_t i = 0; i < m; ++i) {
        const HalfSpace& h = p.constraints[i];
        if (h.coeff.size() != p.dim)
            throw DimensionError("remove_redundant: constraint dimension mismatch");
        normal[i] = h.coeff;
        bound[i] = h.bound;
        if (h.strict_greater) {
            for (double& v : normal[i]) v = -v;
            bound[i] = -bound[i];
        }
        p.constraints[i].redundant = false;
    }

    // Feasibility probe over the full set (strict sides closed). Dropping a
    // constraint only enlarges the feasible set, so when this passes every
    // per-constraint subproblem below is feasible too.
    {
        LinearProgram lp(p.dim);
        for (std::size_t j = 0; j < p.dim; ++j) lp.set_bounds(j, box.lo[j], box.hi[j]);
        for (std::size_t k = 0; k < m; ++k)
            lp.add_constraint(normal[k], Relation::LessEq, bound[k]);
        if (solve(lp).status == LpStatus::Infeasible) {
            res.empty_in_box = true;
            p.reduced = true;
            return res;
        }
    }

    for (std::size_t i = 0; i < m; ++i) {
        LinearProgram lp(p.dim);
        lp.objective = normal[i];
        for (std::size_t j = 0; j < p.dim; ++j) lp.set_bounds(j, box.lo[j], box.hi[j]);
        for (std::size_t k = 0; k < m; ++k) {
            if (k == i || p.constraints[k].redundant) continue;
            lp.add_constraint(normal[k], Relation::LessEq, bound[k]);
        }
        const LpOutcome out = solve(lp);
        if (out.status == LpStatus::Optimal && out.optimum <= bound[i] + eps) {
            p.constraints[i].redundant = true;
            ++res.removed;
        }
    }
    p.reduced = true;
    return res;
}

/// Sampling check of redundancy soundness: draw uniform points in the box
/// and count points that satisfy every kept constraint but violate some
/// removed one. A correct reduction returns 0 for any sample.
inline std::size_t redundancy_violations(const Polytope& p, const BoundingBox& box,
                                         std::size_t samples, std::uint64_t seed) {
    Rng rng(seed);
    Vec x(p.dim);
    std::size_t bad = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t j = 0; j < p.dim; ++j) x[j] = rng.uniform(box.lo[j], box.hi[j]);
        bool kept_ok = true;
        for (const HalfSpace& h : p.constraints) {
            if (h.redundant) continue;
            const double lhs = dot(h.coeff, x);
            if (h.strict_greater ? !(lhs > h.bound) : !(lhs <= h.bound)) {
                kept_ok = false;
                break;
            }
        }
        if (!kept_ok) continue;
        for (const HalfSpace& h : p.constraints) {
            if (!h.redundant) continue;
            const double lhs = dot(h.coeff, x);
            if (h.strict_greater ? !(lhs > h.bound) : !(lhs <= h.bound)) {
                ++bad;
                break;
            }
        }
    }
    return bad;
}

/// A configuration's complete local model: the affine maps that replace the
/// network on its region, and the region itself.
struct LocalLinearClassifier {
    Configuration configuration;
    std::vector<AffinePrefix> prefixes;
    Polytope polytope;

    const AffinePrefix& output_map() const { return prefixes.back(); }
};

} // namespace openbox
