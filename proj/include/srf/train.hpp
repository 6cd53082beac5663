#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "srf/dataset.hpp"
#include "srf/errors.hpp"
#include "srf/model.hpp"
#include "srf/scoring.hpp"

namespace srf {

enum class OptimizerKind { Sgd, Adam };

struct SrMethod {
    ScoringRule rule;
};
struct GanMethod {};

struct TrainConfig {
    std::variant<SrMethod, GanMethod> method = GanMethod{};
    std::size_t ensemble_size = 10;  // m; >= 2 for SR, >= 1 for GAN
    std::size_t batch_size = 1000;
    std::size_t epochs = 1000;
    double lr = 1e-3;
    double lr_disc = 1e-3;  // GAN discriminator rate (Algorithm 1's second rate)
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::size_t patience = 20;
    std::uint64_t seed = 42;
    std::size_t disc_updates = 1;       // discriminator updates per generator update
    std::size_t gan_val_ensemble = 100; // ensemble size for GAN validation energy score

    bool is_sr() const { return std::holds_alternative<SrMethod>(method); }
};

void validate(const TrainConfig& cfg);

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_score;   // per epoch prequential score
    std::vector<double> disc_loss;   // per epoch, GAN only
    std::size_t best_epoch = 0;      // 1-based
    double best_val = 0.0;
    double lr = 0.0;
    double lr_disc = 0.0;
    double wall_seconds = 0.0;
    bool disc_saturated = false;
    std::size_t epochs_run = 0;
};

// Strict-improvement early stopping; ties count toward patience and the
// first best wins.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

    // Feeds one epoch's validation score; returns true when it is a new best.
    bool observe(double score) {
        ++epoch_;
        if (score < best_) {
            best_ = score;
            best_epoch_ = epoch_;
            bad_streak_ = 0;
            return true;
        }
        ++bad_streak_;
        return false;
    }

    bool should_stop() const { return bad_streak_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best_score() const { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t bad_streak_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

// Plain SGD or adaptive-moment updates with fixed (0.9, 0.999, 1e-8).
class OptimizerState {
public:
    OptimizerState(std::vector<Var> params, OptimizerKind kind, double lr);
    void step();
    double lr() const { return lr_; }

private:
    std::vector<Var> params_;
    OptimizerKind kind_;
    double lr_;
    std::vector<std::vector<double>> m1_, m2_;
    std::size_t t_ = 0;
};

// Mean over the index batch of the scoring-rule estimate, each window scored
// on m generator samples; latents are (|indices| * m, zdim) in window order.
Var sr_batch_loss(const GeneratorModel& gen, const WindowedDataset& data,
                  const std::vector<std::size_t>& indices, const ScoringRule& rule,
                  const Array& latents, std::size_t m);

// One pass over shuffled batches; returns the per-window mean loss.
double train_sr_epoch(GeneratorModel& gen, const WindowedDataset& data, const ScoringRule& rule,
                      const TrainConfig& cfg, OptimizerState& opt, std::mt19937_64& rng);

// One adversarial pass; returns (discriminator loss, generator loss), where
// the discriminator loss is the negated ascent objective (0 when saturated).
std::pair<double, double> train_gan_epoch(GeneratorModel& gen, DiscriminatorModel& disc,
                                          const WindowedDataset& data, const TrainConfig& cfg,
                                          OptimizerState& opt_gen, OptimizerState& opt_disc,
                                          std::mt19937_64& rng);

// Mean scoring-rule estimate over all windows using fixed latents
// (size N * m, zdim); evaluation only, no gradients.
double prequential_score(const GeneratorModel& gen, const WindowedDataset& data,
                         const ScoringRule& rule, std::size_t m, const Array& latents);

// Generator samples for every window, no gradients, chunked internally.
// Returns (N, m, d); latents are (N * m, zdim).
Array sample_forecasts(const GeneratorModel& gen, const WindowedDataset& data, std::size_t m,
                       const Array& latents);

Array draw_latents(std::size_t count, std::size_t latent_dim, std::uint64_t seed);

// Epoch loop with early stopping on the validation prequential score
// (GAN validation uses the energy score); restores best-epoch parameters.
// disc may be null for SR training and is required for GAN.
TrainReport fit(GeneratorModel& gen, DiscriminatorModel* disc, const WindowedDataset& train,
                const WindowedDataset& val, const TrainConfig& cfg);

struct SweepCandidate {
    double lr = 0.0;
    double lr_disc = 0.0;
    TrainReport report;
    bool diverged = false;
    std::string diagnostic;
};

struct SweepResult {
    std::vector<SweepCandidate> candidates;
    std::size_t best_index = 0;
    GeneratorModel best_gen;
    DiscriminatorModel best_disc;  // GAN only
};

// Runs fit per learning-rate candidate from a shared initial model
// (SR: one per rate; GAN: the full rate x rate grid), independently seeded.
// Throws NumericalError when every candidate diverges.
SweepResult lr_sweep(const GeneratorModel& init_gen, const DiscriminatorModel* init_disc,
                     const WindowedDataset& train, const WindowedDataset& val,
                     const TrainConfig& base, const std::vector<double>& lr_grid,
                     const std::vector<double>& lr_disc_grid, std::size_t jobs = 1);

}  // namespace srf
