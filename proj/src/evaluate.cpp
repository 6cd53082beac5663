#include "srf/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "srf/rng.hpp"
#include "srf/train.hpp"

namespace srf {

namespace {

void check_pair(const Array& forecasts, const Array& verifications, const char* op) {
    if (forecasts.rank() != 2 || verifications.rank() != 2 ||
        forecasts.shape != verifications.shape)
        throw std::invalid_argument(std::string(op) + ": forecasts " + shape_str(forecasts.shape) +
                                    " and verifications " + shape_str(verifications.shape) +
                                    " must be matching (N, d) arrays");
    if (forecasts.shape[0] < 2)
        throw std::invalid_argument(std::string(op) + ": need N >= 2 cases");
}

double median_inplace(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double nrmse(const Array& point_forecasts, const Array& verifications,
             std::vector<double>* per_component) {
    check_pair(point_forecasts, verifications, "nrmse");
    const std::size_t n = verifications.shape[0], d = verifications.shape[1];
    double total = 0.0;
    if (per_component) per_component->clear();
    for (std::size_t j = 0; j < d; ++j) {
        double sq = 0.0;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t t = 0; t < n; ++t) {
            const double y = verifications.at(t, j);
            const double e = point_forecasts.at(t, j) - y;
            sq += e * e;
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
        if (!(hi - lo > 0.0))
            throw std::invalid_argument("nrmse: verification range is zero for component " +
                                        std::to_string(j));
        const double value = std::sqrt(sq / static_cast<double>(n)) / (hi - lo);
        if (per_component) per_component->push_back(value);
        total += value;
    }
    return total / static_cast<double>(d);
}

double r_squared(const Array& point_forecasts, const Array& verifications,
                 std::vector<double>* per_component) {
    check_pair(point_forecasts, verifications, "r_squared");
    const std::size_t n = verifications.shape[0], d = verifications.shape[1];
    double total = 0.0;
    if (per_component) per_component->clear();
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t t = 0; t < n; ++t) mean += verifications.at(t, j);
        mean /= static_cast<double>(n);
        double ss_res = 0.0, ss_tot = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double y = verifications.at(t, j);
            const double r = y - point_forecasts.at(t, j);
            ss_res += r * r;
            ss_tot += (y - mean) * (y - mean);
        }
        if (!(ss_tot > 0.0))
            throw std::invalid_argument("r_squared: verification variance is zero for component " +
                                        std::to_string(j));
        const double value = 1.0 - ss_res / ss_tot;
        if (per_component) per_component->push_back(value);
        total += value;
    }
    return total / static_cast<double>(d);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
    if (sorted.size() == 1) return sorted[0];
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const double clipped = std::min(std::max(pos, 0.0), static_cast<double>(sorted.size() - 1));
    const std::size_t lo = static_cast<std::size_t>(std::floor(clipped));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = clipped - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::pair<double, CalibrationCurve> calibration_error(const Array& ensembles,
                                                      const Array& verifications,
                                                      std::vector<double>* per_component) {
    if (ensembles.rank() != 3)
        throw std::invalid_argument("calibration: ensembles must be (N, m, d), got " +
                                    shape_str(ensembles.shape));
    const std::size_t n = ensembles.shape[0], m = ensembles.shape[1], d = ensembles.shape[2];
    if (verifications.rank() != 2 || verifications.shape[0] != n || verifications.shape[1] != d)
        throw std::invalid_argument("calibration: verifications " + shape_str(verifications.shape) +
                                    " do not match ensembles " + shape_str(ensembles.shape));
    if (m < 20)
        throw std::invalid_argument("calibration: m >= 20 required for meaningful extreme "
                                    "quantiles, got m = " +
                                    std::to_string(m));
    if (n < 1) throw std::invalid_argument("calibration: need N >= 1");

    CalibrationCurve curve;
    curve.alpha_grid.resize(100);
    for (std::size_t j = 0; j < 100; ++j)
        curve.alpha_grid[j] = static_cast<double>(j + 1) / 101.0;
    curve.coverage.assign(d, std::vector<double>(100, 0.0));

    if (per_component) per_component->clear();
    double total = 0.0;
    std::vector<double> sorted(m);
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<std::size_t> counts(100, 0);
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t s = 0; s < m; ++s) sorted[s] = ensembles.data[(t * m + s) * d + c];
            std::sort(sorted.begin(), sorted.end());
            const double y = verifications.at(t, c);
            for (std::size_t j = 0; j < 100; ++j) {
                const double alpha = curve.alpha_grid[j];
                const double lo = quantile_sorted(sorted, (1.0 - alpha) / 2.0);
                const double hi = quantile_sorted(sorted, (1.0 + alpha) / 2.0);
                if (lo <= y && y <= hi) ++counts[j];
            }
        }
        std::vector<double> devs(100);
        for (std::size_t j = 0; j < 100; ++j) {
            curve.coverage[c][j] = static_cast<double>(counts[j]) / static_cast<double>(n);
            devs[j] = std::abs(curve.coverage[c][j] - curve.alpha_grid[j]);
        }
        const double err = median_inplace(devs);
        if (per_component) per_component->push_back(err);
        total += err;
    }
    return {total / static_cast<double>(d), std::move(curve)};
}

EnsembleStats ensemble_stats(const Array& ensembles, double central_level) {
    if (ensembles.rank() != 3)
        throw std::invalid_argument("ensemble_stats: need (N, m, d), got " +
                                    shape_str(ensembles.shape));
    if (!(central_level > 0.0 && central_level < 1.0))
        throw std::invalid_argument("ensemble_stats: central level must lie in (0, 1)");
    const std::size_t n = ensembles.shape[0], m = ensembles.shape[1], d = ensembles.shape[2];
    if (m < 1) throw std::invalid_argument("ensemble_stats: empty ensembles");

    EnsembleStats st;
    st.level = central_level;
    st.mean = Array::zeros({n, d});
    st.median = Array::zeros({n, d});
    st.lower = Array::zeros({n, d});
    st.upper = Array::zeros({n, d});
    const double q_lo = (1.0 - central_level) / 2.0;
    const double q_hi = (1.0 + central_level) / 2.0;

    std::vector<double> sorted(m);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                sorted[k] = ensembles.data[(t * m + k) * d + c];
                s += sorted[k];
            }
            std::sort(sorted.begin(), sorted.end());
            st.mean.at(t, c) = s / static_cast<double>(m);
            st.median.at(t, c) = quantile_sorted(sorted, 0.5);
            st.lower.at(t, c) = quantile_sorted(sorted, q_lo);
            st.upper.at(t, c) = quantile_sorted(sorted, q_hi);
        }
    return st;
}

EvaluationReport evaluate_ensembles(const Array& ensembles, const Array& verifications,
                                    EvaluationArtifacts* artifacts) {
    EvaluationReport report;
    report.ensemble_size = ensembles.shape[1];
    EnsembleStats stats = ensemble_stats(ensembles, 0.99);
    report.nrmse = nrmse(stats.mean, verifications, &report.per_component_nrmse);
    report.r_squared = r_squared(stats.mean, verifications, &report.per_component_r2);
    auto [cal, curve] = calibration_error(ensembles, verifications, &report.per_component_cal);
    report.calibration_error = cal;
    report.curve = std::move(curve);
    if (artifacts) {
        artifacts->verifications = verifications;
        artifacts->stats = std::move(stats);
    }
    return report;
}

EvaluationReport evaluate_model(const GeneratorModel& gen, const WindowedDataset& test_normalized,
                                const std::optional<Normalizer>& normalizer, std::size_t m_eval,
                                std::uint64_t seed, EvaluationArtifacts* artifacts) {
    if (test_normalized.size() == 0) throw std::invalid_argument("evaluate: empty test dataset");
    if (m_eval < 20)
        throw std::invalid_argument("evaluate: m_eval >= 20 required, got " +
                                    std::to_string(m_eval));
    const std::size_t n = test_normalized.size();
    Array latents = draw_latents(n * m_eval, gen.latent_dim, mix_seed(seed, 0xe7a1));
    Array ensembles = sample_forecasts(gen, test_normalized, m_eval, latents);
    Array verifications = test_normalized.targets;
    if (normalizer) {
        ensembles = normalizer->invert(ensembles);
        verifications = normalizer->invert(verifications);
    }
    return evaluate_ensembles(ensembles, verifications, artifacts);
}

void write_report_json(const std::string& path, const EvaluationReport& report,
                       const std::string& method) {
    nlohmann::ordered_json j;
    j["method"] = method;
    j["calibration_error"] = report.calibration_error;
    j["nrmse"] = report.nrmse;
    j["r_squared"] = report.r_squared;
    j["ensemble_size"] = report.ensemble_size;
    j["alpha_grid"] = "100 equally spaced levels j/101, j = 1..100";
    j["per_component"] = {{"calibration_error", report.per_component_cal},
                          {"nrmse", report.per_component_nrmse},
                          {"r_squared", report.per_component_r2}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_table_row_csv(const std::string& path, const EvaluationReport& report,
                         const std::string& method) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "method,cal_error,nrmse,r2\n";
    out << method << "," << format_double(report.calibration_error) << ","
        << format_double(report.nrmse) << "," << format_double(report.r_squared) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_forecast_csv(const std::string& path, const EvaluationArtifacts& artifacts) {
    const Array& v = artifacts.verifications;
    const std::size_t n = v.shape[0], d = v.shape[1];
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "index";
    for (std::size_t c = 0; c < d; ++c)
        out << ",verification_" << c << ",mean_" << c << ",median_" << c << ",lo99_" << c
            << ",hi99_" << c;
    out << "\n";
    for (std::size_t t = 0; t < n; ++t) {
        out << t;
        for (std::size_t c = 0; c < d; ++c)
            out << "," << format_double(v.at(t, c)) << ","
                << format_double(artifacts.stats.mean.at(t, c)) << ","
                << format_double(artifacts.stats.median.at(t, c)) << ","
                << format_double(artifacts.stats.lower.at(t, c)) << ","
                << format_double(artifacts.stats.upper.at(t, c));
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace srf
