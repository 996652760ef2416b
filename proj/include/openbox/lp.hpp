#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace openbox {

enum class Relation { LessEq, GreaterEq, Equal };
enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpConstraint {
    Vec coeff;
    Relation rel;
    double rhs;
};

/// maximize objective . x  subject to row constraints and per-variable
/// bounds (either side may be infinite).
struct LinearProgram {
    explicit LinearProgram(std::size_t n)
        : objective(n, 0.0),
          lower(n, -std::numeric_limits<double>::infinity()),
          upper(n, std::numeric_limits<double>::infinity()) {}

    std::size_t variable_count() const { return objective.size(); }

    void add_constraint(Vec coeff, Relation rel, double rhs) {
        if (coeff.size() != variable_count())
            throw DimensionError("constraint length does not match variable count");
        rows.push_back({std::move(coeff), rel, rhs});
    }

    void set_bounds(std::size_t j, double lo, double hi) {
        if (j >= variable_count()) throw DimensionError("bound index out of range");
        lower[j] = lo;
        upper[j] = hi;
    }

    Vec objective;
    std::vector<LpConstraint> rows;
    Vec lower, upper;
};

struct LpOutcome {
    LpStatus status = LpStatus::Infeasible;
    double optimum = 0.0;
    Vec solution;
    /// Largest constraint/bound violation of the returned solution; filled
    /// for Optimal outcomes so callers can assert the certificate.
    double max_violation = 0.0;
};

/// Largest violation of any row or bound by a candidate point.
inline double lp_violation(const LinearProgram& lp, std::span<const double> x) {
    double worst = 0.0;
    for (const LpConstraint& r : lp.rows) {
        const double lhs = dot(r.coeff, x);
        double v = 0.0;
        if (r.rel == Relation::LessEq) v = lhs - r.rhs;
        else if (r.rel == Relation::GreaterEq) v = r.rhs - lhs;
        else v = std::abs(lhs - r.rhs);
        worst = std::max(worst, v);
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (std::isfinite(lp.lower[j])) worst = std::max(worst, lp.lower[j] - x[j]);
        if (std::isfinite(lp.upper[j])) worst = std::max(worst, x[j] - lp.upper[j]);
    }
    return worst;
}

namespace detail {

/// Bounded-variable two-phase primal simplex on a dense tableau.
///
/// Variable bounds are handled natively (nonbasic variables sit at either
/// bound and may re-enter by "bound flip"), which keeps box constraints out
/// of the row set -- essential when the box has hundreds of coordinates.
/// Rows are normalized to a.x <= rhs with one slack each; rows whose slack
/// would start negative get a phase-1 artificial. Pivoting is Dantzig's
/// largest-gain rule, switching to Bland's smallest-index rule (which cannot
/// cycle) after 2*(rows+columns) iterations.
class Simplex {
    static constexpr double kPivotTol = 1e-9;
    static constexpr double kGainTol = 1e-9;
    static constexpr double kFeasTol = 1e-7;
    static constexpr double kRatioTieTol = 1e-9;

    enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };

public:
    explicit Simplex(const LinearProgram& lp) : n_(lp.variable_count()) {
        validate(lp);

        // Normalize rows: <= kept, >= negated, == split into both.
        std::vector<std::pair<const LpConstraint*, bool>> normalized; // (row, negate)
        for (const LpConstraint& r : lp.rows) {
            if (r.rel != Relation::GreaterEq) normalized.push_back({&r, false});
            if (r.rel != Relation::LessEq) normalized.push_back({&r, true});
        }
        m_ = normalized.size();

        cols_ = n_ + m_; // structurals then slacks; artificials appended below
        lower_.assign(cols_, 0.0);
        upper_.assign(cols_, std::numeric_limits<double>::infinity());
        std::copy(lp.lower.begin(), lp.lower.end(), lower_.begin());
        std::copy(lp.upper.begin(), lp.upper.end(), upper_.begin());

        state_.assign(cols_, VarState::AtLower);
        for (std::size_t j = 0; j < n_; ++j) {
            if (std::isfinite(lower_[j])) state_[j] = VarState::AtLower;
            else if (std::isfinite(upper_[j])) state_[j] = VarState::AtUpper;
            else state_[j] = VarState::FreeZero;
        }

        work_.assign(m_, Vec());
        beta_.assign(m_, 0.0);
        basis_.assign(m_, 0);
        std::vector<std::size_t> needs_artificial;
        for (std::size_t i = 0; i < m_; ++i) {
            const auto [row, negate] = normalized[i];
            Vec& w = work_[i];
            w.assign(cols_, 0.0);
            const double sign = negate ? -1.0 : 1.0;
            for (std::size_t j = 0; j < n_; ++j) w[j] = sign * row->coeff[j];
            w[n_ + i] = 1.0;
            const double rhs = sign * row->rhs;
            double residual = rhs;
            for (std::size_t j = 0; j < n_; ++j) residual -= w[j] * nonbasic_value(j);
            if (residual >= 0.0) {
                basis_[i] = n_ + i;
                state_[n_ + i] = VarState::Basic;
                beta_[i] = residual;
            } else {
                needs_artificial.push_back(i);
                beta_[i] = residual; // fixed up once the artificial column exists
            }
        }

        artificial_start_ = cols_;
        if (!needs_artificial.empty()) {
            const std::size_t extra = needs_artificial.size();
            cols_ += extra;
            lower_.resize(cols_, 0.0);
            upper_.resize(cols_, std::numeric_limits<double>::infinity());
            state_.resize(cols_, VarState::AtLower);
            for (Vec& w : work_) w.resize(cols_, 0.0);
            for (std::size_t k = 0; k < extra; ++k) {
                const std::size_t i = needs_artificial[k];
                const std::size_t aj = artificial_start_ + k;
                // a.x + s - t = rhs with t basic: negate the row so the
                // basis column carries +1 and the tableau stays B^-1 A.
                for (double& v : work_[i]) v = -v;
                work_[i][aj] = 1.0;
                basis_[i] = aj;
                state_[aj] = VarState::Basic;
                beta_[i] = -beta_[i];
            }
        }
    }

    LpOutcome solve(const LinearProgram& lp) {
        LpOutcome out;

        if (artificial_start_ < cols_) {
            Vec phase1(cols_, 0.0);
            for (std::size_t j = artificial_start_; j < cols_; ++j) phase1[j] = -1.0;
            if (run_phase(phase1) == PhaseResult::Unbounded)
                throw Error("simplex: phase 1 reported unbounded");
            double infeasibility = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (basis_[i] >= artificial_start_) infeasibility += std::max(0.0, beta_[i]);
            if (infeasibility > kFeasTol) {
                out.status = LpStatus::Infeasible;
                return out;
            }
            // Pin every artificial at zero for phase 2.
            for (std::size_t j = artificial_start_; j < cols_; ++j) upper_[j] = 0.0;
        }

        Vec phase2(cols_, 0.0);
        std::copy(lp.objective.begin(), lp.objective.end(), phase2.begin());
        if (run_phase(phase2) == PhaseResult::Unbounded) {
            out.status = LpStatus::Unbounded;
            return out;
        }

        out.status = LpStatus::Optimal;
        out.solution.assign(n_, 0.0);
        Vec full(cols_, 0.0);
        for (std::size_t j = 0; j < cols_; ++j)
            if (state_[j] != VarState::Basic) full[j] = nonbasic_value(j);
        for (std::size_t i = 0; i < m_; ++i) full[basis_[i]] = beta_[i];
        std::copy(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n_),
                  out.solution.begin());
        out.optimum = dot(lp.objective, out.solution);
        out.max_violation = lp_violation(lp, out.solution);
        return out;
    }

private:
    enum class PhaseResult { Optimal, Unbounded };

    static void validate(const LinearProgram& lp) {
        if (!all_finite(lp.objective)) throw DomainError("LP objective has non-finite entries");
        for (const LpConstraint& r : lp.rows) {
            if (!all_finite(r.coeff) || !std::isfinite(r.rhs))
                throw DomainError("LP constraint has non-finite entries");
        }
        for (std::size_t j = 0; j < lp.variable_count(); ++j) {
            if (std::isnan(lp.lower[j]) || std::isnan(lp.upper[j]) || lp.lower[j] > lp.upper[j])
                throw DomainError("LP variable bounds are invalid");
        }
    }

    double nonbasic_value(std::size_t j) const {
        switch (state_[j]) {
            case VarState::AtLower: return lower_[j];
            case VarState::AtUpper: return upper_[j];
            default: return 0.0;
        }
    }

    PhaseResult run_phase(const Vec& cost) {
        // Reduced costs from scratch: d = c - c_B^T (B^-1 A).
        Vec d = cost;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            const Vec& w = work_[i];
            for (std::size_t j = 0; j < cols_; ++j) d[j] -= cb * w[j];
        }
        for (std::size_t i = 0; i < m_; ++i) d[basis_[i]] = 0.0;

        const std::size_t bland_after = 2 * (m_ + cols_);
        const std::size_t hard_cap = 10000 + 200 * (m_ + cols_);
        for (std::size_t iter = 0;; ++iter) {
            if (iter > hard_cap) throw Error("simplex: iteration cap exceeded");
            const bool bland = iter >= bland_after;

            // --- entering variable ---
            std::size_t enter = cols_;
            double dir = 0.0, best_gain = kGainTol;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (state_[j] == VarState::Basic || lower_[j] == upper_[j]) continue;
                double gain = 0.0, sgn = 0.0;
                const bool can_up = state_[j] != VarState::AtUpper;
                const bool can_down = state_[j] != VarState::AtLower;
                if (can_up && d[j] > best_gain) { gain = d[j]; sgn = 1.0; }
                if (can_down && -d[j] > best_gain && -d[j] > gain) { gain = -d[j]; sgn = -1.0; }
                if (sgn != 0.0) {
                    enter = j;
                    dir = sgn;
                    if (bland) break;  // smallest improving index
                    best_gain = gain;  // largest gain
                }
            }
            if (enter == cols_) return PhaseResult::Optimal;

            // --- ratio test ---
            double t_row = std::numeric_limits<double>::infinity();
            std::size_t leave = m_;
            bool leave_at_upper = false;
            for (std::size_t i = 0; i < m_; ++i) {
                const double y = work_[i][enter];
                if (std::abs(y) <= kPivotTol) continue;
                const double delta = dir * y; // beta_i decreases at rate delta
                const std::size_t bi = basis_[i];
                double t;
                bool at_upper;
                if (delta > 0.0) {
                    if (!std::isfinite(lower_[bi])) continue;
                    t = (beta_[i] - lower_[bi]) / delta;
                    at_upper = false;
                } else {
                    if (!std::isfinite(upper_[bi])) continue;
                    t = (upper_[bi] - beta_[i]) / (-delta);
                    at_upper = true;
                }
                t = std::max(t, 0.0);
                const bool better =
                    t < t_row - kRatioTieTol ||
                    (t <= t_row + kRatioTieTol && leave != m_ &&
                     (bland ? basis_[i] < basis_[leave]
                            : std::abs(y) > std::abs(work_[leave][enter])));
                if (leave == m_ ? t < t_row : better) {
                    t_row = t;
                    leave = i;
                    leave_at_upper = at_upper;
                }
            }
            const double span = upper_[enter] - lower_[enter]; // inf unless both finite
            const double t_star = std::min(t_row, span);
            if (!std::isfinite(t_star)) return PhaseResult::Unbounded;

            if (span <= t_row) {
                // Bound flip: the entering variable crosses to its other
                // bound before any basic variable blocks.
                for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * work_[i][enter] * span;
                state_[enter] =
                    state_[enter] == VarState::AtLower ? VarState::AtUpper : VarState::AtLower;
                continue;
            }

            // --- pivot ---
            const double enter_value = nonbasic_value(enter) + dir * t_star;
            for (std::size_t i = 0; i < m_; ++i)
                if (i != leave) beta_[i] -= dir * work_[i][enter] * t_star;

            const std::size_t leaving_var = basis_[leave];
            state_[leaving_var] = leave_at_upper ? VarState::AtUpper : VarState::AtLower;

            Vec& prow = work_[leave];
            const double piv = prow[enter];
            for (double& v : prow) v /= piv;
            prow[enter] = 1.0;
            for (std::size_t i = 0; i < m_; ++i) {
                if (i == leave) continue;
                Vec& w = work_[i];
                const double f = w[enter];
                if (f == 0.0) continue;
                for (std::size_t j = 0; j < cols_; ++j) w[j] -= f * prow[j];
                w[enter] = 0.0;
            }
            const double fd = d[enter];
            if (fd != 0.0) {
                for (std::size_t j = 0; j < cols_; ++j) d[j] -= fd * prow[j];
            }
            d[enter] = 0.0;

            basis_[leave] = enter;
            state_[enter] = VarState::Basic;
            beta_[leave] = enter_value;
        }
    }

    std::size_t n_ = 0;    // structural variables
    std::size_t m_ = 0;    // normalized rows
    std::size_t cols_ = 0; // structurals + slacks + artificials
    std::size_t artificial_start_ = 0;
    std::vector<Vec> work_; // current tableau B^-1 A, one Vec per row
    Vec beta_;              // value of each row's basic variable
    std::vector<std::size_t> basis_;
    std::vector<VarState> state_;
    Vec lower_, upper_;
};

} // namespace detail

/// Solve a linear program. Always returns (Optimal with a certificate-checked
/// solution, Infeasible, or Unbounded); malformed input throws.
inline LpOutcome solve(const LinearProgram& lp) {
    detail::Simplex s(lp);
    return s.solve(lp);
}

} // namespace openbox
