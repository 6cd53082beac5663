#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "srf/errors.hpp"
#include "srf/scoring.hpp"
#include "srf/simulate.hpp"

namespace srf {

struct ScoreConfig {
    std::string kind = "energy";  // energy | kernel | variogram | energy-variogram | kernel-variogram
    double beta = 1.0;
    std::string gamma = "auto";  // "auto" (median pairwise distance on validation targets) or > 0
    double variogram_p = 1.0;
    std::string variogram_weights = "cyclic";  // ones | cyclic
    double sum_weight_1 = 1.0;                 // weighted-sum defaults; the source tables'
    double sum_weight_2 = 1.0;                 // weights are not published
};

// The single declarative document driving every command; unknown keys are
// rejected so configs stay self-documenting.
struct RunConfig {
    // [data]
    std::string source = "preset";  // preset | file
    std::string preset = "lorenz63-paper";
    std::string path;
    double duration_override = 0.0;  // preset duration override, time units
    double train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
    std::size_t window = 10;  // k
    std::size_t lead = 1;     // l
    bool normalize = true;

    // [model]
    std::vector<std::size_t> hidden{50, 50, 50, 50, 50};
    std::size_t latent_dim = 1;

    // [score]
    ScoreConfig score;

    // [train]
    std::string method = "sr";  // sr | gan
    std::size_t m = 10;
    std::size_t batch_size = 1000;
    std::size_t epochs = 1000;
    std::size_t patience = 20;
    std::string optimizer = "adam";  // adam | sgd
    double lr = 1e-3;
    double lr_disc = 1e-3;
    std::size_t disc_updates = 1;
    bool sweep = false;
    std::vector<double> lr_grid{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    std::vector<double> lr_grid_disc{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    std::size_t gan_val_m = 100;
    std::size_t jobs = 1;

    // [eval]
    std::size_t m_eval = 200;

    // [output]
    std::string out_dir = "runs/out";

    // [run]
    std::uint64_t seed = 42;

    // [simulate] — explicit simulator parameters; absent means use the preset
    std::optional<SimulationSpec> custom_sim;
};

RunConfig parse_run_config_file(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

// Full document with every key at its default, suitable as a starting config.
std::string default_config_text();

// Checks every cross-module precondition that is knowable before touching
// data; throws ConfigError.
void validate(const RunConfig& cfg);

// Resolves the configured scoring rule for dimension d; tuned_gamma supplies
// the bandwidth when gamma = auto.
ScoringRule build_scoring_rule(const ScoreConfig& score, std::size_t d,
                               std::optional<double> tuned_gamma);

bool scoring_rule_needs_gamma(const ScoreConfig& score);

}  // namespace srf
