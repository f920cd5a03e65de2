#pragma once

#include "fpgnn/mrf.hpp"
#include "fpgnn/rng.hpp"

#include <cmath>
#include <vector>

namespace fpgnn::testutil {

struct MrfSpec {
    std::size_t n = 4;
    std::size_t k = 2;
    double density = 0.5;
    /// log psi entries are uniform in [-coupling, coupling].
    double coupling = 1.0;
    /// Random spanning tree instead of an Erdos-Renyi graph.
    bool tree = false;
};

inline PairwiseMrf random_mrf(const MrfSpec& s, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<std::vector<double>> phi(s.n, std::vector<double>(s.k));
    for (auto& row : phi)
        for (double& v : row) v = std::exp(rng.uniform(-1.0, 1.0));
    std::vector<PairwiseMrf::EdgePotential> edges;
    auto add = [&](std::size_t i, std::size_t j) {
        PairwiseMrf::EdgePotential e{i, j, std::vector<double>(s.k * s.k)};
        for (double& v : e.psi) v = std::exp(rng.uniform(-s.coupling, s.coupling));
        edges.push_back(std::move(e));
    };
    if (s.tree) {
        for (std::size_t v = 1; v < s.n; ++v) add(rng() % v, v);
    } else {
        for (std::size_t i = 0; i < s.n; ++i)
            for (std::size_t j = i + 1; j < s.n; ++j)
                if (rng.uniform() < s.density) add(i, j);
    }
    return PairwiseMrf(s.k, phi, std::move(edges));
}

/// Largest per-node total variation distance between two marginal tables.
inline double max_total_variation(const Tensor& p, const Tensor& q) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double tv = 0.0;
        for (std::size_t a = 0; a < p.cols(); ++a) tv += std::abs(p(i, a) - q(i, a));
        worst = std::max(worst, 0.5 * tv);
    }
    return worst;
}

} // namespace fpgnn::testutil
