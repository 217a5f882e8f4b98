#pragma once

#include <algorithm>
#include <vector>

#include "porogen/core/errors.hpp"

namespace porogen {

/// K-class partition of the porosity axis; the conditioning vocabulary shared
/// by corpus, model, evaluation and well-log synthesis.
struct PorosityBinning {
    std::vector<double> edges; // strictly increasing, K+1 values
    bool clamp_outside = true;

    static PorosityBinning equal_width(int num_classes, double lo, double hi,
                                       bool clamp = true) {
        if (num_classes < 2) throw ConfigError("binning: need at least 2 classes");
        if (!(lo < hi)) throw ConfigError("binning: lo must be < hi");
        PorosityBinning b;
        b.clamp_outside = clamp;
        b.edges.resize(std::size_t(num_classes) + 1);
        for (int k = 0; k <= num_classes; ++k)
            b.edges[std::size_t(k)] = lo + (hi - lo) * double(k) / double(num_classes);
        return b;
    }

    /// Default partition: 10 equal bins over [0, 0.75].
    static PorosityBinning default_bins() { return equal_width(10, 0.0, 0.75); }

    int num_classes() const { return int(edges.size()) - 1; }

    void validate() const {
        if (edges.size() < 3) throw ConfigError("binning: need at least 2 classes");
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (!(edges[i - 1] < edges[i]))
                throw ConfigError("binning: edges must be strictly increasing");
    }

    /// Index k with edges[k] <= phi < edges[k+1]; phi == edges[K] maps to K-1.
    /// Out-of-range values clamp to the end bins when clamp_outside, else throw.
    int bin_for(double phi) const {
        validate();
        const int K = num_classes();
        if (phi < edges.front()) {
            if (clamp_outside) return 0;
            throw DomainError("bin_for: porosity below binning range");
        }
        if (phi > edges.back()) {
            if (clamp_outside) return K - 1;
            throw DomainError("bin_for: porosity above binning range");
        }
        if (phi == edges.back()) return K - 1;
        const auto it = std::upper_bound(edges.begin(), edges.end(), phi);
        return int(it - edges.begin()) - 1;
    }

    double lo(int k) const { return edges[std::size_t(k)]; }
    double hi(int k) const { return edges[std::size_t(k) + 1]; }

    /// Representative porosity of a class: the bin midpoint.
    double midpoint(int k) const { return 0.5 * (lo(k) + hi(k)); }

    bool operator==(const PorosityBinning& o) const {
        return edges == o.edges && clamp_outside == o.clamp_outside;
    }
};

} // namespace porogen
