#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srf/evaluate.hpp"
#include "srf/run_config.hpp"
#include "srf/train.hpp"

namespace srf {

struct PreparedData {
    TimeSeries raw;
    std::optional<Normalizer> normalizer;
    WindowedDataset train, val, test;  // in model space (normalized when enabled)
    TimeSeries val_split;              // model space, for bandwidth tuning
};

// Load or simulate the series, split chronologically, fit the normalizer on
// the training split only, and window each split.
PreparedData prepare_data(const RunConfig& cfg);

struct TrainOutcome {
    GeneratorModel gen;
    std::optional<DiscriminatorModel> disc;
    TrainReport report;
    std::vector<SweepCandidate> sweep;  // populated when a sweep ran
    std::optional<double> gamma;        // resolved bandwidth when tuned
    std::string method_label;           // e.g. "energy", "gan"
};

TrainOutcome run_training(const RunConfig& cfg, const PreparedData& data);

// Writes gen.ckpt (+ disc.ckpt for GAN), runlog.json and val_curve.csv.
void write_training_outputs(const std::string& dir, const RunConfig& cfg,
                            const PreparedData& data, const TrainOutcome& outcome);

// Writes report.json, table_row.csv and forecasts.csv; returns the report.
EvaluationReport run_evaluation(const std::string& dir, const RunConfig& cfg,
                                const PreparedData& data, const GeneratorModel& gen,
                                const std::optional<Normalizer>& normalizer,
                                const std::string& method_label);

// --- reproduce -------------------------------------------------------------

struct PaperRow {
    double cal, nrmse, r2;
};

struct MethodGate {
    std::optional<double> min_r2;
    std::optional<double> max_nrmse;
    std::optional<double> max_cal;
};

struct MethodOutcome {
    std::string method;
    EvaluationReport report;
    PaperRow paper{0, 0, 0};
    MethodGate gate;
    bool passed = true;
    std::vector<std::string> failures;
};

struct ReproduceResult {
    std::string task;
    std::string budget;
    std::vector<MethodOutcome> methods;
    bool ordering_checked = false;  // every SR calibration beats the GAN baseline
    bool ordering_ok = true;
    bool all_passed = true;
};

// task: lorenz63 | lorenz96. budget: paper | desk | smoke. Empty method list
// selects the task's full method set. Writes per-method artifacts plus
// comparison.csv / comparison.txt under out_dir.
ReproduceResult run_reproduce(const std::string& task, const std::string& budget,
                              const std::string& out_dir, std::uint64_t seed, std::size_t jobs,
                              const std::vector<std::string>& methods = {});

// The RunConfig run_reproduce uses for one method (exposed for tests).
RunConfig reproduce_config(const std::string& task, const std::string& budget,
                           const std::string& method, const std::string& out_dir,
                           std::uint64_t seed);

}  // namespace srf
