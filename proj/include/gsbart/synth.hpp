#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gsbart/common.hpp"

namespace gsbart {

// Synthetic dataset with the noiseless target kept alongside.
struct SyntheticData {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> features;
    std::vector<double> y;
    std::vector<double> truth;
    // graph-step extras
    std::vector<std::pair<int, int>> graph_edges;
    std::vector<int> graph_bins;

    std::string to_csv() const {
        std::ostringstream os;
        os.precision(17);
        for (const auto& fname : feature_names) os << fname << ",";
        os << "y,truth\n";
        for (std::size_t i = 0; i < y.size(); ++i) {
            for (const auto& col : features) os << col[i] << ",";
            os << y[i] << "," << truth[i] << "\n";
        }
        return os.str();
    }
};

// Friedman benchmark: five uniform covariates, mean
// 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4, normal noise.
inline SyntheticData generate_friedman(int n, double sigma, std::uint64_t seed) {
    if (n < 10) throw ValidationError("synthetic data: n must be >= 10");
    Rng rng(seed);
    SyntheticData d;
    d.feature_names = {"x1", "x2", "x3", "x4", "x5"};
    d.features.assign(5, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 5; ++j) d.features[j][i] = rng.uniform();
    for (int i = 0; i < n; ++i) {
        const double f = 10.0 * std::sin(M_PI * d.features[0][i] * d.features[1][i]) +
                         20.0 * std::pow(d.features[2][i] - 0.5, 2.0) + 10.0 * d.features[3][i];
        d.truth.push_back(f);
        d.y.push_back(f + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0));
    }
    return d;
}

inline constexpr double kStepLevels[4] = {-3.0, -1.0, 1.0, 3.0};
inline constexpr double kStepBreaks[3] = {0.25, 0.5, 0.75};

// Piecewise-constant function of x1 with three irrelevant covariates.
inline SyntheticData generate_chain_step(int n, double sigma, std::uint64_t seed) {
    if (n < 10) throw ValidationError("synthetic data: n must be >= 10");
    Rng rng(seed);
    SyntheticData d;
    d.feature_names = {"x1", "x2", "x3", "x4"};
    d.features.assign(4, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j) d.features[j][i] = rng.uniform();
    for (int i = 0; i < n; ++i) {
        const double x = d.features[0][i];
        int level = 0;
        while (level < 3 && x > kStepBreaks[level]) ++level;
        const double f = kStepLevels[level];
        d.truth.push_back(f);
        d.y.push_back(f + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0));
    }
    return d;
}

// Piecewise-constant function over the quadrants of a grid structural graph;
// samples are assigned to grid cells at random and carry one irrelevant
// covariate. Emits the edge list and bin assignment alongside the data.
inline SyntheticData generate_graph_step(int n, double sigma, std::uint64_t seed, int side = 6) {
    if (n < 10) throw ValidationError("synthetic data: n must be >= 10");
    if (side < 2) throw ValidationError("graph-step: grid side must be >= 2");
    Rng rng(seed);
    SyntheticData d;
    d.feature_names = {"x1"};
    d.features.assign(1, std::vector<double>(n));
    const int nv = side * side;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            const int v = r * side + c;
            if (c + 1 < side) d.graph_edges.push_back({v, v + 1});
            if (r + 1 < side) d.graph_edges.push_back({v, v + side});
        }
    for (int i = 0; i < n; ++i) {
        d.features[0][i] = rng.uniform();
        const int v = static_cast<int>(rng.uniform_index(nv));
        d.graph_bins.push_back(v);
        const int r = v / side, c = v % side;
        const int quadrant = (r >= side / 2 ? 2 : 0) + (c >= side / 2 ? 1 : 0);
        const double f = kStepLevels[quadrant];
        d.truth.push_back(f);
        d.y.push_back(f + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0));
    }
    return d;
}

inline SyntheticData generate_synthetic(const std::string& kind, int n, double sigma,
                                        std::uint64_t seed) {
    if (kind == "friedman") return generate_friedman(n, sigma, seed);
    if (kind == "chain-step") return generate_chain_step(n, sigma, seed);
    if (kind == "graph-step") return generate_graph_step(n, sigma, seed);
    throw ValidationError("unknown synthetic kind '" + kind +
                          "' (expected friedman, chain-step, or graph-step)");
}

}  // namespace gsbart
