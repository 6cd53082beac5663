#include "srf/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace srf {

namespace {

void check_ensemble(const ForecastEnsemble& ens, const Array& y, const char* op) {
    if (ens.samples.value().rank() != 2)
        throw std::invalid_argument(std::string(op) + ": ensemble must be (m, d), got " +
                                    shape_str(ens.samples.value().shape));
    if (y.rank() != 1)
        throw std::invalid_argument(std::string(op) + ": observation must be a vector, got " +
                                    shape_str(y.shape));
    if (ens.dim() != y.shape[0])
        throw std::invalid_argument(std::string(op) + ": ensemble shape " +
                                    shape_str(ens.samples.value().shape) +
                                    " does not match observation " + shape_str(y.shape));
}

void check_pair_count(const ForecastEnsemble& ens, const char* op) {
    if (ens.size() < 2)
        throw std::invalid_argument(std::string(op) + ": m >= 2 required, the U-statistic factor "
                                                      "1/(m(m-1)) is undefined at m = " +
                                    std::to_string(ens.size()));
}

}  // namespace

void validate(const ScoringRule& rule) {
    struct Visitor {
        void operator()(const EnergyScore& s) const {
            if (!(s.beta > 0.0 && s.beta < 2.0))
                throw std::invalid_argument("energy score: beta must lie in (0, 2), got " +
                                            std::to_string(s.beta));
        }
        void operator()(const KernelScore& s) const {
            if (!(s.gamma > 0.0))
                throw std::invalid_argument("kernel score: gamma must be > 0, got " +
                                            std::to_string(s.gamma));
        }
        void operator()(const VariogramScore& s) const {
            if (!(s.p > 0.0))
                throw std::invalid_argument("variogram score: p must be > 0, got " +
                                            std::to_string(s.p));
            const Array& w = s.weights;
            if (w.rank() != 2 || w.shape[0] != w.shape[1])
                throw std::invalid_argument("variogram score: weights must be square, got " +
                                            shape_str(w.shape));
            const std::size_t d = w.shape[0];
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    if (w.at(i, j) < 0.0)
                        throw std::invalid_argument("variogram score: negative weight at (" +
                                                    std::to_string(i) + ", " + std::to_string(j) +
                                                    ")");
                    if (w.at(i, j) != w.at(j, i))
                        throw std::invalid_argument("variogram score: weights not symmetric at (" +
                                                    std::to_string(i) + ", " + std::to_string(j) +
                                                    ")");
                }
        }
        void operator()(const WeightedSum& s) const {
            if (s.terms.empty())
                throw std::invalid_argument("weighted sum score: empty term list");
            for (const auto& [w, sub] : s.terms) {
                if (!(w > 0.0))
                    throw std::invalid_argument("weighted sum score: weights must be > 0, got " +
                                                std::to_string(w));
                validate(sub);
            }
        }
    };
    std::visit(Visitor{}, rule);
}

std::string describe(const ScoringRule& rule) {
    struct Visitor {
        std::string operator()(const EnergyScore& s) const {
            std::ostringstream os;
            os << "energy(beta=" << s.beta << ")";
            return os.str();
        }
        std::string operator()(const KernelScore& s) const {
            std::ostringstream os;
            os << "kernel(gamma=" << s.gamma << ")";
            return os.str();
        }
        std::string operator()(const VariogramScore& s) const {
            std::ostringstream os;
            os << "variogram(p=" << s.p << ", d=" << s.weights.shape[0] << ")";
            return os.str();
        }
        std::string operator()(const WeightedSum& s) const {
            std::ostringstream os;
            os << "sum(";
            for (std::size_t i = 0; i < s.terms.size(); ++i) {
                if (i) os << " + ";
                os << s.terms[i].first << "*" << describe(s.terms[i].second);
            }
            os << ")";
            return os.str();
        }
    };
    return std::visit(Visitor{}, rule);
}

Var energy_score_estimate(const ForecastEnsemble& ens, const Array& y, double beta) {
    check_ensemble(ens, y, "energy score");
    check_pair_count(ens, "energy score");
    const double m = static_cast<double>(ens.size());

    Var y_row(y, false);
    Var dist_to_y = norm_last_axis(sub(ens.samples, y_row));
    Var term1 = scale(sum_all(pow_op(dist_to_y, beta)), 2.0 / m);

    // unordered pairs carry factor 2 to recover the ordered j != k sum
    Var pair_dist = norm_last_axis(pairwise_diff(ens.samples));
    Var term2 = scale(sum_all(pow_op(pair_dist, beta)), 2.0 / (m * (m - 1.0)));

    return sub(term1, term2);
}

Var kernel_score_estimate(const ForecastEnsemble& ens, const Array& y, double gamma) {
    check_ensemble(ens, y, "kernel score");
    check_pair_count(ens, "kernel score");
    if (!(gamma > 0.0))
        throw std::invalid_argument("kernel score: gamma must be > 0, got " + std::to_string(gamma));
    const double m = static_cast<double>(ens.size());
    const double neg_inv = -1.0 / (2.0 * gamma * gamma);

    Var pd = pairwise_diff(ens.samples);
    Var k_pairs = exp_op(scale(sum_last_axis(mul(pd, pd)), neg_inv));
    Var term1 = scale(sum_all(k_pairs), 2.0 / (m * (m - 1.0)));

    Var dy = sub(ens.samples, Var(y, false));
    Var k_y = exp_op(scale(sum_last_axis(mul(dy, dy)), neg_inv));
    Var term2 = scale(sum_all(k_y), 2.0 / m);

    return sub(term1, term2);
}

Var variogram_score_estimate(const ForecastEnsemble& ens, const Array& y, double p,
                             const Array& weights) {
    check_ensemble(ens, y, "variogram score");
    const std::size_t d = ens.dim();
    if (weights.rank() != 2 || weights.shape[0] != d || weights.shape[1] != d)
        throw std::invalid_argument("variogram score: weight matrix " + shape_str(weights.shape) +
                                    " does not match dimension " + std::to_string(d));
    if (!(p > 0.0))
        throw std::invalid_argument("variogram score: p must be > 0, got " + std::to_string(p));
    const std::size_t m = ens.size();
    if (m < 1) throw std::invalid_argument("variogram score: empty ensemble");

    const std::size_t npairs = d * (d - 1) / 2;
    if (npairs == 0) return Var(Array::scalar(0.0), false);  // single component, all terms vanish

    // Combined weight per unordered component pair; the i = j summands are
    // identically zero and dropped.
    Array combined_w = Array::zeros({npairs});
    Array y_part = Array::zeros({npairs});
    Array selection = Array::zeros({d, npairs});  // right factor: samples (m,d) x (d,npairs)
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j, ++idx) {
            combined_w.data[idx] = weights.at(i, j) + weights.at(j, i);
            y_part.data[idx] = std::pow(std::abs(y.data[i] - y.data[j]), p);
            selection.at(i, idx) = 1.0;
            selection.at(j, idx) = -1.0;
        }

    Var comp_diff = matmul(ens.samples, Var(selection, false));        // (m, npairs)
    Var x_part = pow_op(abs_op(comp_diff), p);
    Var resid = sub(Var(y_part, false), x_part);                       // broadcast row
    Var weighted = mul(mul(resid, resid), Var(combined_w, false));     // broadcast row
    return scale(sum_all(weighted), 1.0 / static_cast<double>(m));
}

Var weighted_sum_estimate(const ForecastEnsemble& ens, const Array& y, const WeightedSum& spec) {
    if (spec.terms.empty()) throw std::invalid_argument("weighted sum score: empty term list");
    Var total;
    for (const auto& [w, sub_rule] : spec.terms) {
        Var term = scale(score_estimate(sub_rule, ens, y), w);
        total = total.defined() ? add(total, term) : term;
    }
    return total;
}

Var score_estimate(const ScoringRule& rule, const ForecastEnsemble& ens, const Array& y) {
    struct Visitor {
        const ForecastEnsemble& ens;
        const Array& y;
        Var operator()(const EnergyScore& s) const { return energy_score_estimate(ens, y, s.beta); }
        Var operator()(const KernelScore& s) const { return kernel_score_estimate(ens, y, s.gamma); }
        Var operator()(const VariogramScore& s) const {
            return variogram_score_estimate(ens, y, s.p, s.weights);
        }
        Var operator()(const WeightedSum& s) const { return weighted_sum_estimate(ens, y, s); }
    };
    return std::visit(Visitor{ens, y}, rule);
}

double score_estimate_value(const ScoringRule& rule, const Array& samples, const Array& y) {
    ForecastEnsemble ens{Var(samples, false)};
    return score_estimate(rule, ens, y).value().data[0];
}

namespace {

double median_of(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double tune_gaussian_bandwidth(const Array& targets, std::uint64_t seed, std::size_t cap) {
    if (targets.rank() != 2)
        throw std::invalid_argument("bandwidth tuning: targets must be (n, d), got " +
                                    shape_str(targets.shape));
    const std::size_t n_all = targets.shape[0];
    const std::size_t d = targets.shape[1];
    if (n_all < 2)
        throw std::invalid_argument("bandwidth tuning: need at least 2 target vectors, got " +
                                    std::to_string(n_all));

    std::vector<std::size_t> rows(n_all);
    std::iota(rows.begin(), rows.end(), 0);
    if (n_all > cap) {
        std::mt19937_64 rng(seed);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(cap);
        std::sort(rows.begin(), rows.end());
    }
    const std::size_t n = rows.size();

    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    if (d > 64) {
        // expanded-norm trick: ||a-b||^2 = ||a||^2 + ||b||^2 - 2 a.b
        std::vector<double> sq(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = targets.data.data() + rows[i] * d;
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += r[c] * r[c];
            sq[i] = s;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = targets.data.data() + rows[i] * d;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double* rj = targets.data.data() + rows[j] * d;
                double dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) dot += ri[c] * rj[c];
                dists.push_back(std::sqrt(std::max(0.0, sq[i] + sq[j] - 2.0 * dot)));
            }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = targets.data.data() + rows[i] * d;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double* rj = targets.data.data() + rows[j] * d;
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = ri[c] - rj[c];
                    s += diff * diff;
                }
                dists.push_back(std::sqrt(s));
            }
        }
    }

    const double gamma = median_of(dists);
    if (!(gamma > 0.0))
        throw std::invalid_argument(
            "bandwidth tuning: median pairwise distance is zero; targets are degenerate");
    return gamma;
}

Array cyclic_weight_matrix(std::size_t d) {
    if (d < 2)
        throw std::invalid_argument("cyclic weight matrix: d >= 2 required, got " +
                                    std::to_string(d));
    Array w = Array::zeros({d, d});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            if (i == j) continue;
            const std::size_t gap = i > j ? i - j : j - i;
            const std::size_t dist = std::min(gap, d - gap);
            w.at(i, j) = 1.0 / static_cast<double>(dist);
        }
    return w;
}

Array grid_weight_matrix(std::size_t n_lat, std::size_t n_lon, std::size_t cap) {
    if (n_lat < 1 || n_lon < 2)
        throw std::invalid_argument("grid weight matrix: need n_lat >= 1 and n_lon >= 2, got " +
                                    std::to_string(n_lat) + " x " + std::to_string(n_lon));
    const std::size_t n = n_lat * n_lon;
    if (n > cap)
        throw std::invalid_argument("grid weight matrix: " + std::to_string(n) +
                                    " grid cells exceed the configured cap of " +
                                    std::to_string(cap));
    Array w = Array::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lat_i = i / n_lon, lon_i = i % n_lon;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const std::size_t lat_j = j / n_lon, lon_j = j % n_lon;
            const double dlat = static_cast<double>(lat_i > lat_j ? lat_i - lat_j : lat_j - lat_i);
            const std::size_t lon_gap = lon_i > lon_j ? lon_i - lon_j : lon_j - lon_i;
            const double dlon = static_cast<double>(std::min(lon_gap, n_lon - lon_gap));
            w.at(i, j) = 1.0 / std::sqrt(dlat * dlat + dlon * dlon);
        }
    }
    return w;
}

}  // namespace srf
