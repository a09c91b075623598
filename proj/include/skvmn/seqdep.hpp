#pragma once

// Discretization of attention vectors into identity vectors via triangular
// membership functions, and the per-sequence hop lookup that links each step
// to its most recent same-identity predecessor.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "skvmn/errors.hpp"
#include "skvmn/tensor.hpp"

namespace skvmn {

struct TriangularRange {
    double a = 0.0;  // left foot
    double b = 0.0;  // peak
    double c = 0.0;  // right foot

    void validate() const {
        if (!(a < b && b < c))
            throw ConfigError("triangular range requires a < b < c, got (" + std::to_string(a) +
                              "," + std::to_string(b) + "," + std::to_string(c) + ")");
    }
};

// mu(x) = max(min((x-a)/(b-a), (c-x)/(c-b)), 0)
inline double membership(double x, const TriangularRange& r) {
    r.validate();
    const double up = (x - r.a) / (r.b - r.a);
    const double down = (r.c - x) / (r.c - r.b);
    return std::max(std::min(up, down), 0.0);
}

// The three value ranges low(0) / medium(1) / high(2). Defaults cover the
// attention simplex [0,1]; all triples are configurable per dataset.
struct RangeSet {
    TriangularRange low{-0.5, 0.0, 0.5};
    TriangularRange medium{0.0, 0.5, 1.0};
    TriangularRange high{0.5, 1.0, 1.5};

    void validate() const {
        low.validate();
        medium.validate();
        high.validate();
    }
};

using IdentityVector = std::vector<std::uint8_t>;

inline std::uint8_t classify(double x, const RangeSet& ranges) {
    const double m[3] = {membership(x, ranges.low), membership(x, ranges.medium),
                         membership(x, ranges.high)};
    // argmax; ties break toward the lower code
    std::uint8_t best = 0;
    for (std::uint8_t k = 1; k < 3; ++k)
        if (m[k] > m[best]) best = k;
    return best;
}

inline IdentityVector identity_vector(const std::vector<double>& w, const RangeSet& ranges) {
    ranges.validate();
    IdentityVector codes(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) codes[i] = classify(w[i], ranges);
    return codes;
}

inline IdentityVector identity_vector(const Tensor& w, const RangeSet& ranges) {
    return identity_vector(w.data(), ranges);
}

// Per-sequence map from identity vector to the most recent (hidden, cell)
// pair. Hidden/cell stay live tensors so gradients flow across hop links.
class HopState {
public:
    struct Entry {
        Tensor hidden;
        Tensor cell;
        int step = -1;
    };

    std::optional<Entry> lookup(const IdentityVector& id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void store(const IdentityVector& id, Tensor hidden, Tensor cell, int step) {
        if (step <= last_step_)
            throw ContractError("store_hop: step " + std::to_string(step) +
                                " not greater than last stored step " + std::to_string(last_step_));
        last_step_ = step;
        entries_[id] = Entry{std::move(hidden), std::move(cell), step};
    }

    std::size_t size() const { return entries_.size(); }
    void clear() {
        entries_.clear();
        last_step_ = -1;
    }

    // Drops tape history while carrying values across chunk boundaries.
    void detach_all() {
        for (auto& [id, e] : entries_) {
            e.hidden = e.hidden.detached();
            e.cell = e.cell.detached();
        }
    }

private:
    std::map<IdentityVector, Entry> entries_;
    int last_step_ = -1;
};

}  // namespace skvmn
