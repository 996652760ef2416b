#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"

namespace openbox {

/// One linear piece of an activation: value slope*z + intercept on the
/// half-open interval (lo, hi].
struct ActivationPiece {
    double lo;
    double hi;
    double slope;
    double intercept;
};

/// A piecewise linear activation function with finitely many pieces whose
/// intervals partition the real line. Intervals are left-open/right-closed,
/// so a boundary point belongs to the piece on its left; for ReLU that puts
/// z = 0 on the zero-slope piece, matching the subgradient the trainer uses.
class ActivationSpec {
public:
    ActivationSpec(std::string name, std::vector<ActivationPiece> pieces)
        : name_(std::move(name)), pieces_(std::move(pieces)) {
        validate();
    }

    static ActivationSpec relu() {
        const double inf = std::numeric_limits<double>::infinity();
        return ActivationSpec("relu", {{-inf, 0.0, 0.0, 0.0}, {0.0, inf, 1.0, 0.0}});
    }

    static ActivationSpec by_name(const std::string& name) {
        if (name == "relu") return relu();
        throw ParseError("unknown activation \"" + name + "\"");
    }

    const std::string& name() const { return name_; }
    std::size_t piece_count() const { return pieces_.size(); }
    const ActivationPiece& piece(std::size_t q) const { return pieces_[q]; }

    /// 0-based index of the piece whose interval contains z.
    std::size_t piece_index(double z) const {
        if (std::isnan(z)) throw DomainError("activation input is NaN");
        // k is tiny (2 for ReLU); a scan is both clear and fast.
        for (std::size_t q = 0; q + 1 < pieces_.size(); ++q)
            if (z <= pieces_[q].hi) return q;
        return pieces_.size() - 1;
    }

    double apply(double z) const {
        const ActivationPiece& p = pieces_[piece_index(z)];
        return p.slope * z + p.intercept;
    }

    bool operator==(const ActivationSpec& o) const {
        if (name_ != o.name_ || pieces_.size() != o.pieces_.size()) return false;
        for (std::size_t q = 0; q < pieces_.size(); ++q) {
            const auto& a = pieces_[q];
            const auto& b = o.pieces_[q];
            if (a.lo != b.lo || a.hi != b.hi || a.slope != b.slope || a.intercept != b.intercept)
                return false;
        }
        return true;
    }

private:
    void validate() const {
        if (pieces_.empty()) throw DomainError("activation needs at least one piece");
        const double inf = std::numeric_limits<double>::infinity();
        if (pieces_.front().lo != -inf || pieces_.back().hi != inf)
            throw DomainError("activation pieces must cover the whole real line");
        for (std::size_t q = 0; q < pieces_.size(); ++q) {
            const auto& p = pieces_[q];
            if (!(p.lo < p.hi)) throw DomainError("activation piece interval is empty");
            if (!std::isfinite(p.slope) || !std::isfinite(p.intercept))
                throw DomainError("activation piece has non-finite slope or intercept");
            if (q + 1 < pieces_.size() && pieces_[q + 1].lo != p.hi)
                throw DomainError("activation piece intervals must be contiguous");
        }
    }

    std::string name_;
    std::vector<ActivationPiece> pieces_;
};

} // namespace openbox
