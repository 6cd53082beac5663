#include "srf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "srf/rng.hpp"

namespace srf {

void validate(const TrainConfig& cfg) {
    if (cfg.is_sr()) {
        if (cfg.ensemble_size < 2)
            throw std::invalid_argument(
                "train config: scoring-rule training needs m >= 2 (U-statistic), got m = " +
                std::to_string(cfg.ensemble_size));
        validate(std::get<SrMethod>(cfg.method).rule);
    } else if (cfg.ensemble_size < 1) {
        throw std::invalid_argument("train config: m >= 1 required");
    }
    if (cfg.batch_size < 1) throw std::invalid_argument("train config: batch_size >= 1 required");
    if (cfg.patience < 1) throw std::invalid_argument("train config: patience >= 1 required");
    if (cfg.epochs < 1) throw std::invalid_argument("train config: epochs >= 1 required");
    if (!cfg.is_sr() && cfg.disc_updates < 1)
        throw std::invalid_argument("train config: disc_updates >= 1 required");
}

OptimizerState::OptimizerState(std::vector<Var> params, OptimizerKind kind, double lr)
    : params_(std::move(params)), kind_(kind), lr_(lr) {
    if (kind_ == OptimizerKind::Adam) {
        m1_.resize(params_.size());
        m2_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m1_[i].assign(params_[i].value().numel(), 0.0);
            m2_[i].assign(params_[i].value().numel(), 0.0);
        }
    }
}

void OptimizerState::step() {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Array& g = params_[i].grad();
        for (double gv : g.data)
            if (!std::isfinite(gv))
                throw NumericalError("optimizer: non-finite gradient in parameter " +
                                     std::to_string(i));
        auto& theta = params_[i].mutable_data();
        if (kind_ == OptimizerKind::Sgd) {
            for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= lr_ * g.data[j];
        } else {
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
            auto& m = m1_[i];
            auto& v = m2_[i];
            for (std::size_t j = 0; j < theta.size(); ++j) {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g.data[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g.data[j] * g.data[j];
                theta[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
            }
        }
    }
}

namespace {

// (B*m, k*d + zdim) rows: each selected window repeated m times with its latents.
Array stack_batch_inputs(const GeneratorModel& gen, const WindowedDataset& data,
                         const std::vector<std::size_t>& indices, const Array& latents,
                         std::size_t m) {
    const std::size_t kd = gen.window_len * gen.dim;
    const std::size_t zdim = gen.latent_dim;
    const std::size_t in = kd + zdim;
    Array rows = Array::zeros({indices.size() * m, in});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const double* w = data.window_flat(indices[b]);
        for (std::size_t s = 0; s < m; ++s) {
            const std::size_t r = b * m + s;
            std::copy(w, w + kd, rows.data.begin() + r * in);
            std::copy(latents.data.begin() + r * zdim, latents.data.begin() + (r + 1) * zdim,
                      rows.data.begin() + r * in + kd);
        }
    }
    return rows;
}

double param_norm(const std::vector<Var>& params) {
    double s = 0.0;
    for (const Var& p : params)
        for (double v : p.value().data) s += v * v;
    return std::sqrt(s);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

Array draw_normal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    Array z = Array::zeros({rows, cols});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z.data) v = normal(rng);
    return z;
}

}  // namespace

Array draw_latents(std::size_t count, std::size_t latent_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return draw_normal(count, latent_dim, rng);
}

Var sr_batch_loss(const GeneratorModel& gen, const WindowedDataset& data,
                  const std::vector<std::size_t>& indices, const ScoringRule& rule,
                  const Array& latents, std::size_t m) {
    if (indices.empty()) throw std::invalid_argument("sr_batch_loss: empty batch");
    if (latents.rank() != 2 || latents.shape[0] != indices.size() * m ||
        latents.shape[1] != gen.latent_dim)
        throw std::invalid_argument("sr_batch_loss: latents " + shape_str(latents.shape) +
                                    " do not match batch " + std::to_string(indices.size()) +
                                    " x m " + std::to_string(m));
    Array rows = stack_batch_inputs(gen, data, indices, latents, m);
    Var out = gen.net.forward(rows);  // (B*m, d)

    std::vector<Var> scores;
    scores.reserve(indices.size());
    for (std::size_t b = 0; b < indices.size(); ++b) {
        ForecastEnsemble ens{slice_rows(out, b * m, (b + 1) * m)};
        Array y({gen.dim}, std::vector<double>(data.target_row(indices[b]),
                                               data.target_row(indices[b]) + gen.dim));
        scores.push_back(reshape(score_estimate(rule, ens, y), {1}));
    }
    return mean_all(concat(scores, 0));
}

double train_sr_epoch(GeneratorModel& gen, const WindowedDataset& data, const ScoringRule& rule,
                      const TrainConfig& cfg, OptimizerState& opt, std::mt19937_64& rng) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("train: empty dataset");
    const std::size_t m = cfg.ensemble_size;
    std::vector<std::size_t> order = shuffled_indices(n, rng);

    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
        const std::size_t stop = std::min(n, start + cfg.batch_size);
        std::vector<std::size_t> batch(order.begin() + start, order.begin() + stop);
        Array latents = draw_normal(batch.size() * m, gen.latent_dim, rng);

        Var loss = sr_batch_loss(gen, data, batch, rule, latents, m);
        const double value = loss.value().data[0];
        if (!std::isfinite(value))
            throw NumericalError("train: non-finite loss in batch " + std::to_string(batch_index) +
                                 " (parameter norm " + std::to_string(param_norm(gen.net.parameters())) +
                                 ")");
        gen.net.zero_grad();
        backward(loss);
        opt.step();
        loss_sum += value * static_cast<double>(batch.size());
    }
    return loss_sum / static_cast<double>(n);
}

namespace {

// Rows for B distinct windows with one latent each: (B, k*d + zdim).
Array stack_gan_inputs(const GeneratorModel& gen, const WindowedDataset& data,
                       const std::vector<std::size_t>& indices, const Array& latents) {
    const std::size_t kd = gen.window_len * gen.dim;
    const std::size_t zdim = gen.latent_dim;
    const std::size_t in = kd + zdim;
    Array rows = Array::zeros({indices.size(), in});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const double* w = data.window_flat(indices[b]);
        std::copy(w, w + kd, rows.data.begin() + b * in);
        std::copy(latents.data.begin() + b * zdim, latents.data.begin() + (b + 1) * zdim,
                  rows.data.begin() + b * in + kd);
    }
    return rows;
}

Array gather_rows(const Array& src2d, const std::vector<std::size_t>& indices) {
    const std::size_t d = src2d.shape[1];
    Array out = Array::zeros({indices.size(), d});
    for (std::size_t b = 0; b < indices.size(); ++b)
        std::copy(src2d.data.begin() + indices[b] * d, src2d.data.begin() + (indices[b] + 1) * d,
                  out.data.begin() + b * d);
    return out;
}

Array gather_window_rows(const WindowedDataset& data, const std::vector<std::size_t>& indices) {
    const std::size_t kd = data.window_len * data.dim();
    Array out = Array::zeros({indices.size(), kd});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const double* w = data.window_flat(indices[b]);
        std::copy(w, w + kd, out.data.begin() + b * kd);
    }
    return out;
}

}  // namespace

std::pair<double, double> train_gan_epoch(GeneratorModel& gen, DiscriminatorModel& disc,
                                          const WindowedDataset& data, const TrainConfig& cfg,
                                          OptimizerState& opt_gen, OptimizerState& opt_disc,
                                          std::mt19937_64& rng) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("train: empty dataset");
    std::vector<std::size_t> order = shuffled_indices(n, rng);
    const Var one(Array::scalar(1.0), false);

    double disc_loss_sum = 0.0, gen_loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
        const std::size_t stop = std::min(n, start + cfg.batch_size);
        std::vector<std::size_t> batch(order.begin() + start, order.begin() + stop);
        Array windows = gather_window_rows(data, batch);
        Array reals = gather_rows(data.targets, batch);

        // Ascend the discriminator on log D(real) + log(1 - D(fake)); the
        // fake batch is detached so only psi moves here.
        Array last_latents;
        double disc_value = 0.0;
        for (std::size_t u = 0; u < cfg.disc_updates; ++u) {
            last_latents = draw_normal(batch.size(), gen.latent_dim, rng);
            Array fake_values;
            {
                NoGradGuard eval_only;
                fake_values =
                    gen.net.forward(stack_gan_inputs(gen, data, batch, last_latents)).value();
            }
            Var d_real = discriminator_forward_batch(disc, windows, Var(reals, false));
            Var d_fake = discriminator_forward_batch(disc, windows, Var(fake_values, false));
            Var objective = mean_all(add(log_op(d_real), log_op(sub(one, d_fake))));
            Var neg = scale(objective, -1.0);
            disc_value = neg.value().data[0];
            if (!std::isfinite(disc_value))
                throw NumericalError("train: non-finite discriminator loss in batch " +
                                     std::to_string(batch_index));
            disc.net.zero_grad();
            backward(neg);
            opt_disc.step();
        }

        // Descend the generator on log(1 - D(fake)) with the updated
        // discriminator, reusing the last latent draw.
        Var fake = gen.net.forward(stack_gan_inputs(gen, data, batch, last_latents));
        Var d_fake = discriminator_forward_batch(disc, windows, fake);
        Var gen_obj = mean_all(log_op(sub(one, d_fake)));
        const double gen_value = gen_obj.value().data[0];
        if (!std::isfinite(gen_value))
            throw NumericalError("train: non-finite generator loss in batch " +
                                 std::to_string(batch_index) + " (parameter norm " +
                                 std::to_string(param_norm(gen.net.parameters())) + ")");
        gen.net.zero_grad();
        backward(gen_obj);
        opt_gen.step();

        disc_loss_sum += disc_value * static_cast<double>(batch.size());
        gen_loss_sum += gen_value * static_cast<double>(batch.size());
    }
    return {disc_loss_sum / static_cast<double>(n), gen_loss_sum / static_cast<double>(n)};
}

Array sample_forecasts(const GeneratorModel& gen, const WindowedDataset& data, std::size_t m,
                       const Array& latents) {
    const std::size_t n = data.size();
    if (latents.rank() != 2 || latents.shape[0] != n * m || latents.shape[1] != gen.latent_dim)
        throw std::invalid_argument("sample_forecasts: latents " + shape_str(latents.shape) +
                                    " do not match N " + std::to_string(n) + " x m " +
                                    std::to_string(m));
    NoGradGuard eval_only;
    const std::size_t d = gen.dim;
    Array out = Array::zeros({n, m, d});

    // Chunked so large evaluation batches keep a bounded footprint.
    const std::size_t chunk_windows = std::max<std::size_t>(1, 8192 / std::max<std::size_t>(1, m));
    for (std::size_t begin = 0; begin < n; begin += chunk_windows) {
        const std::size_t end = std::min(n, begin + chunk_windows);
        std::vector<std::size_t> indices(end - begin);
        std::iota(indices.begin(), indices.end(), begin);
        Array z = Array::zeros({indices.size() * m, gen.latent_dim});
        std::copy(latents.data.begin() + begin * m * gen.latent_dim,
                  latents.data.begin() + end * m * gen.latent_dim, z.data.begin());
        Array rows = stack_batch_inputs(gen, data, indices, z, m);
        Array values = gen.net.forward(rows).value();
        std::copy(values.data.begin(), values.data.end(), out.data.begin() + begin * m * d);
    }
    return out;
}

double prequential_score(const GeneratorModel& gen, const WindowedDataset& data,
                         const ScoringRule& rule, std::size_t m, const Array& latents) {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("prequential_score: empty dataset");
    Array forecasts = sample_forecasts(gen, data, m, latents);
    const std::size_t d = gen.dim;
    double total = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        Array samples({m, d}, std::vector<double>(forecasts.data.begin() + t * m * d,
                                                  forecasts.data.begin() + (t + 1) * m * d));
        Array y({d}, std::vector<double>(data.target_row(t), data.target_row(t) + d));
        total += score_estimate_value(rule, samples, y);
    }
    return total / static_cast<double>(n);
}

TrainReport fit(GeneratorModel& gen, DiscriminatorModel* disc, const WindowedDataset& train,
                const WindowedDataset& val, const TrainConfig& cfg) {
    validate(cfg);
    if (!cfg.is_sr() && disc == nullptr)
        throw std::invalid_argument("fit: GAN training needs a discriminator");
    if (train.size() == 0 || val.size() == 0)
        throw std::invalid_argument("fit: train and validation splits must form at least one pair");

    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(cfg.seed);

    const ScoringRule val_rule =
        cfg.is_sr() ? std::get<SrMethod>(cfg.method).rule : ScoringRule(EnergyScore{1.0});
    const std::size_t val_m = cfg.is_sr() ? cfg.ensemble_size : cfg.gan_val_ensemble;
    // Fixed validation latents keep the early-stopping signal comparable
    // across epochs.
    const Array val_latents =
        draw_latents(val.size() * val_m, gen.latent_dim, mix_seed(cfg.seed, 0x7a11d8));

    OptimizerState opt_gen(gen.net.parameters(), cfg.optimizer, cfg.lr);
    OptimizerState opt_disc(disc ? disc->net.parameters() : std::vector<Var>{}, cfg.optimizer,
                            cfg.lr_disc);

    TrainReport report;
    report.lr = cfg.lr;
    report.lr_disc = cfg.is_sr() ? 0.0 : cfg.lr_disc;
    report.best_val = std::numeric_limits<double>::infinity();

    std::vector<double> best_gen_params = gen.net.flat_parameters();
    std::vector<double> best_disc_params = disc ? disc->net.flat_parameters() : std::vector<double>{};
    EarlyStopping stopper(cfg.patience);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.is_sr()) {
            const double loss =
                train_sr_epoch(gen, train, std::get<SrMethod>(cfg.method).rule, cfg, opt_gen, rng);
            report.train_loss.push_back(loss);
        } else {
            const auto [dl, gl] = train_gan_epoch(gen, *disc, train, cfg, opt_gen, opt_disc, rng);
            report.disc_loss.push_back(dl);
            report.train_loss.push_back(gl);
        }
        const double score = prequential_score(gen, val, val_rule, val_m, val_latents);
        report.val_score.push_back(score);

        if (stopper.observe(score)) {
            best_gen_params = gen.net.flat_parameters();
            if (disc) best_disc_params = disc->net.flat_parameters();
        }
        report.epochs_run = epoch;
        if (stopper.should_stop()) break;
    }
    report.best_epoch = stopper.best_epoch();
    report.best_val = stopper.best_score();

    gen.net.set_flat_parameters(best_gen_params);
    if (disc) disc->net.set_flat_parameters(best_disc_params);

    if (!report.disc_loss.empty()) {
        for (double dl : report.disc_loss)
            if (dl < 1e-6) report.disc_saturated = true;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

SweepResult lr_sweep(const GeneratorModel& init_gen, const DiscriminatorModel* init_disc,
                     const WindowedDataset& train, const WindowedDataset& val,
                     const TrainConfig& base, const std::vector<double>& lr_grid,
                     const std::vector<double>& lr_disc_grid, std::size_t jobs) {
    if (lr_grid.empty()) throw std::invalid_argument("lr sweep: empty candidate list");
    const bool gan = !base.is_sr();
    if (gan && lr_disc_grid.empty())
        throw std::invalid_argument("lr sweep: GAN sweep needs discriminator rates");

    std::vector<std::pair<double, double>> grid;
    if (gan) {
        for (double lr : lr_grid)
            for (double lrd : lr_disc_grid) grid.emplace_back(lr, lrd);
    } else {
        for (double lr : lr_grid) grid.emplace_back(lr, base.lr_disc);
    }

    struct Slot {
        SweepCandidate cand;
        GeneratorModel gen;
        DiscriminatorModel disc;
    };
    std::vector<Slot> slots(grid.size());

    auto run_candidate = [&](std::size_t i) {
        Slot& slot = slots[i];
        slot.cand.lr = grid[i].first;
        slot.cand.lr_disc = grid[i].second;
        TrainConfig cfg = base;
        cfg.lr = grid[i].first;
        cfg.lr_disc = grid[i].second;
        cfg.seed = mix_seed(base.seed, i + 1);
        slot.gen = GeneratorModel{init_gen.net.clone(), init_gen.latent_dim, init_gen.window_len,
                                  init_gen.dim};
        if (gan)
            slot.disc = DiscriminatorModel{init_disc->net.clone(), init_disc->window_len,
                                           init_disc->dim};
        try {
            slot.cand.report = fit(slot.gen, gan ? &slot.disc : nullptr, train, val, cfg);
        } catch (const NumericalError& e) {
            slot.cand.diverged = true;
            slot.cand.diagnostic = e.what();
        }
    };

    if (jobs <= 1 || grid.size() == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) run_candidate(i);
    } else {
        std::vector<std::thread> pool;
        std::size_t next = 0;
        std::mutex mu;
        const std::size_t workers = std::min(jobs, grid.size());
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                set_intra_op_parallelism(false);
                while (true) {
                    std::size_t i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= grid.size()) return;
                        i = next++;
                    }
                    run_candidate(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    SweepResult result;
    result.best_index = grid.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        result.candidates.push_back(slots[i].cand);
        if (!slots[i].cand.diverged && slots[i].cand.report.best_val < best) {
            best = slots[i].cand.report.best_val;
            result.best_index = i;
        }
    }
    if (result.best_index == grid.size()) {
        std::string msg = "lr sweep: every candidate diverged:";
        for (const auto& c : result.candidates)
            msg += "\n  lr=" + std::to_string(c.lr) +
                   (gan ? " lr_disc=" + std::to_string(c.lr_disc) : "") + ": " + c.diagnostic;
        throw NumericalError(msg);
    }
    result.best_gen = std::move(slots[result.best_index].gen);
    if (gan) result.best_disc = std::move(slots[result.best_index].disc);
    return result;
}

}  // namespace srf
