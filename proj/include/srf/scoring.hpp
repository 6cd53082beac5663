#pragma once

#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "srf/autodiff.hpp"

namespace srf {

// --- Scoring rule descriptions -------------------------------------------

struct EnergyScore {
    double beta = 1.0;  // strictly proper for 0 < beta < 2
};

struct KernelScore {
    double gamma;  // Gaussian kernel bandwidth, > 0
};

struct VariogramScore {
    double p = 1.0;
    Array weights;  // d x d, nonnegative, symmetric
};

struct WeightedSum;

using ScoringRule = std::variant<EnergyScore, KernelScore, VariogramScore, WeightedSum>;

struct WeightedSum {
    std::vector<std::pair<double, ScoringRule>> terms;  // weights strictly positive
};

// Throws std::invalid_argument when an invariant is violated.
void validate(const ScoringRule& rule);

std::string describe(const ScoringRule& rule);

// --- Ensembles and estimators --------------------------------------------

// m generated samples in R^d for one conditioning window, graph-backed so
// estimates differentiate through them.
struct ForecastEnsemble {
    Var samples;  // (m, d)

    std::size_t size() const { return samples.value().shape[0]; }
    std::size_t dim() const { return samples.value().shape[1]; }
};

// (2/m) sum_j ||x_j - y||^beta - (1/(m(m-1))) sum_{j != k} ||x_j - x_k||^beta
Var energy_score_estimate(const ForecastEnsemble& ens, const Array& y, double beta);

// (1/(m(m-1))) sum_{j != k} k(x_j, x_k) - (2/m) sum_j k(x_j, y),
// k(a, b) = exp(-||a - b||^2 / (2 gamma^2))
Var kernel_score_estimate(const ForecastEnsemble& ens, const Array& y, double gamma);

// (1/m) sum_k sum_{i,j} w_ij (|y_i - y_j|^p - |x_{k,i} - x_{k,j}|^p)^2
Var variogram_score_estimate(const ForecastEnsemble& ens, const Array& y, double p,
                             const Array& weights);

Var weighted_sum_estimate(const ForecastEnsemble& ens, const Array& y, const WeightedSum& spec);

Var score_estimate(const ScoringRule& rule, const ForecastEnsemble& ens, const Array& y);

// Plain-value estimate without gradient bookkeeping.
double score_estimate_value(const ScoringRule& rule, const Array& samples, const Array& y);

// --- Tuning and weight matrices ------------------------------------------

// Median of pairwise Euclidean distances over the target vectors. Inputs
// larger than `cap` are subsampled uniformly without replacement (seeded).
double tune_gaussian_bandwidth(const Array& targets, std::uint64_t seed = 2026,
                               std::size_t cap = 5000);

// w_ij = 1 / (cyclic distance between i and j on a loop of length d), zero diagonal.
Array cyclic_weight_matrix(std::size_t d);

// Inverse Euclidean distance on an (n_lat x n_lon) grid with cyclic longitude,
// in grid-index units; zero diagonal. Component index = lat * n_lon + lon.
Array grid_weight_matrix(std::size_t n_lat, std::size_t n_lon, std::size_t cap = 8192);

}  // namespace srf
