#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "srf/autodiff.hpp"
#include "srf/dataset.hpp"
#include "srf/scoring.hpp"

namespace srf {

// Fully connected net, leaky-rectifier hidden layers, linear head.
struct Mlp {
    std::vector<std::size_t> widths;  // input, hidden..., output
    std::vector<Var> weights;         // (widths[i], widths[i+1])
    std::vector<Var> biases;          // (widths[i+1])
    double leaky_slope = 0.01;

    // Fan-in-scaled uniform weights, zero biases.
    static Mlp create(const std::vector<std::size_t>& widths, std::uint64_t seed,
                      double leaky_slope = 0.01);
    static Mlp zeros(const std::vector<std::size_t>& widths, double leaky_slope = 0.01);

    Var forward(const Var& rows) const;    // (n, in) -> (n, out)
    Var forward(const Array& rows) const;

    std::vector<Var> parameters() const;
    std::size_t parameter_count() const;   // sum (w_in + 1) * w_out
    void zero_grad() const;
    Mlp clone() const;                     // fresh parameter nodes, same values
    std::vector<double> flat_parameters() const;
    void set_flat_parameters(const std::vector<double>& flat);
};

// The conditional generative map: forecast = net(concat(flat window, z)).
struct GeneratorModel {
    Mlp net;
    std::size_t latent_dim = 0;
    std::size_t window_len = 0;  // k
    std::size_t dim = 0;         // d

    std::size_t input_width() const { return window_len * dim + latent_dim; }
};

GeneratorModel make_generator(std::size_t window_len, std::size_t dim, std::size_t latent_dim,
                              const std::vector<std::size_t>& hidden, std::uint64_t seed);

struct DiscriminatorModel {
    Mlp net;
    std::size_t window_len = 0;
    std::size_t dim = 0;

    std::size_t input_width() const { return window_len * dim + dim; }
};

DiscriminatorModel make_discriminator(std::size_t window_len, std::size_t dim,
                                      const std::vector<std::size_t>& hidden, std::uint64_t seed);

// i.i.d. standard normal latent draws.
struct LatentSampler {
    std::size_t latent_dim;
    std::mt19937_64 rng;

    LatentSampler(std::size_t latent_dim, std::uint64_t seed) : latent_dim(latent_dim), rng(seed) {}
    Array draw(std::size_t m);  // (m, latent_dim)
};

// window accepts shape (k, d) or flat (k*d); z has latent_dim entries.
Var generator_forward(const GeneratorModel& gen, const Array& window, const Array& z);  // (d)
Var generator_forward_batch(const GeneratorModel& gen, const Array& window,
                            const Array& zs);  // (m, d)
ForecastEnsemble sample_ensemble(const GeneratorModel& gen, const Array& window, std::size_t m,
                                 LatentSampler& sampler);

// Output squashed to (0, 1), clamped 1e-7 from the boundary for log stability.
Var discriminator_forward(const DiscriminatorModel& disc, const Array& window,
                          const Var& candidate);  // scalar
// windows_flat is (B, k*d) data; candidates is a graph-backed (B, d) batch.
Var discriminator_forward_batch(const DiscriminatorModel& disc, const Array& windows_flat,
                                const Var& candidates);  // (B)

// --- Checkpoints -----------------------------------------------------------
// Textual header plus a flat parameter list at 17 significant digits, so a
// round trip reproduces forwards bit-for-bit.

void save_generator_checkpoint(const std::string& path, const GeneratorModel& gen,
                               const std::optional<Normalizer>& normalizer);

struct GeneratorCheckpoint {
    GeneratorModel model;
    std::optional<Normalizer> normalizer;
};

GeneratorCheckpoint load_generator_checkpoint(const std::string& path);

void save_discriminator_checkpoint(const std::string& path, const DiscriminatorModel& disc);
DiscriminatorModel load_discriminator_checkpoint(const std::string& path);

}  // namespace srf
