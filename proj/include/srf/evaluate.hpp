#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srf/dataset.hpp"
#include "srf/model.hpp"

namespace srf {

// Empirical coverage of nested central credible intervals per component,
// over 100 equally spaced nominal levels in (0, 1).
struct CalibrationCurve {
    std::vector<double> alpha_grid;       // j / 101 for j = 1..100
    std::vector<std::vector<double>> coverage;  // [component][alpha index]
};

struct EvaluationReport {
    double calibration_error = 0.0;  // in [0, 1]
    double nrmse = 0.0;
    double r_squared = 0.0;
    std::vector<double> per_component_cal;
    std::vector<double> per_component_nrmse;
    std::vector<double> per_component_r2;
    std::size_t ensemble_size = 0;
    CalibrationCurve curve;
};

// Per component RMSE / (max - min of the verification), averaged.
double nrmse(const Array& point_forecasts, const Array& verifications,
             std::vector<double>* per_component = nullptr);

// Per component 1 - SSres/SStot against the verification mean, averaged.
double r_squared(const Array& point_forecasts, const Array& verifications,
                 std::vector<double>* per_component = nullptr);

// Linear interpolation of order statistics at position q * (n - 1).
double quantile_sorted(const std::vector<double>& sorted, double q);

// ensembles: (N, m, d); verifications: (N, d). Per component, the median over
// the alpha grid of |empirical coverage - alpha|, then the component mean.
// m >= 20 enforced.
std::pair<double, CalibrationCurve> calibration_error(const Array& ensembles,
                                                      const Array& verifications,
                                                      std::vector<double>* per_component = nullptr);

struct EnsembleStats {
    Array mean;    // (N, d)
    Array median;  // (N, d)
    Array lower;   // (N, d), central interval lower bound
    Array upper;   // (N, d)
    double level;  // e.g. 0.99
};

EnsembleStats ensemble_stats(const Array& ensembles, double central_level);

struct EvaluationArtifacts {
    Array verifications;  // (N, d), physical units
    EnsembleStats stats;  // physical units, 99% interval
};

// Samples m_eval ensemble members per test window, inverts normalization,
// and computes the three metrics in physical units. Deterministic given seed.
EvaluationReport evaluate_model(const GeneratorModel& gen, const WindowedDataset& test_normalized,
                                const std::optional<Normalizer>& normalizer, std::size_t m_eval,
                                std::uint64_t seed, EvaluationArtifacts* artifacts = nullptr);

// Same surface fed by precomputed physical-unit ensembles (test stubs).
EvaluationReport evaluate_ensembles(const Array& ensembles, const Array& verifications,
                                    EvaluationArtifacts* artifacts = nullptr);

void write_report_json(const std::string& path, const EvaluationReport& report,
                       const std::string& method);
// method, cal_error, nrmse, r2
void write_table_row_csv(const std::string& path, const EvaluationReport& report,
                         const std::string& method);
// Per window: verification, ensemble mean, median and 99% bounds per component.
void write_forecast_csv(const std::string& path, const EvaluationArtifacts& artifacts);

}  // namespace srf
