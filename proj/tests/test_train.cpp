#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "srf/rng.hpp"
#include "srf/train.hpp"
#include "test_util.hpp"

using namespace srf;

namespace {

TimeSeries random_walk(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 0.1);
    Array v = Array::zeros({n, 1});
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        v.at(t, 0) = s;
        s += step(rng);
    }
    return TimeSeries{v, 1.0, "walk"};
}

std::vector<double> flat_grads(const Mlp& net) {
    std::vector<double> g;
    for (const Var& p : net.parameters())
        g.insert(g.end(), p.grad().data.begin(), p.grad().data.end());
    return g;
}

}  // namespace

TEST_CASE("plain sgd takes theta - lr * g") {
    Var theta(Array::vector({1.0}), true);
    backward(scale(sum_all(theta), 2.0));  // d/dtheta = 2
    OptimizerState opt({theta}, OptimizerKind::Sgd, 0.1);
    opt.step();
    CHECK(theta.value().data[0] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("zero gradient moves neither optimizer") {
    for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
        Var theta(Array::vector({1.5, -2.5}), true);
        theta.zero_grad();
        OptimizerState opt({theta}, kind, 0.1);
        opt.step();
        CHECK(theta.value().data[0] == 1.5);
        CHECK(theta.value().data[1] == -2.5);
    }
}

TEST_CASE("adaptive first step has magnitude lr") {
    // bias correction makes |update| = lr * |g| / (|g| + eps) for any constant g
    for (double g : {3.0, -0.25}) {
        Var theta(Array::vector({1.0}), true);
        backward(scale(sum_all(theta), g));
        OptimizerState opt({theta}, OptimizerKind::Adam, 0.01);
        opt.step();
        CHECK(std::abs(theta.value().data[0] - (1.0 - 0.01 * (g > 0 ? 1.0 : -1.0))) < 1e-6);
    }
}

TEST_CASE("non-finite gradients abort the optimizer") {
    Var theta(Array::vector({1.0}), true);
    backward(sum_all(log_op(theta)));
    theta.node()->grad.data[0] = std::nan("");
    OptimizerState opt({theta}, OptimizerKind::Adam, 0.1);
    CHECK_THROWS_AS(opt.step(), NumericalError);
}

TEST_CASE("early stopping traces the documented rule") {
    // [5, 4, 4, 5, 6] with patience 2: best epoch 2, stop at epoch 4
    EarlyStopping es(2);
    CHECK(es.observe(5.0));
    CHECK(es.observe(4.0));
    CHECK_FALSE(es.observe(4.0));  // tie counts toward patience
    CHECK_FALSE(es.should_stop());
    CHECK_FALSE(es.observe(5.0));
    CHECK(es.should_stop());
    CHECK(es.best_epoch() == 2);

    // patience 1 with strictly increasing scores stops after two epochs
    EarlyStopping inc(1);
    CHECK(inc.observe(5.0));
    CHECK_FALSE(inc.observe(6.0));
    CHECK(inc.should_stop());
    CHECK(inc.best_epoch() == 1);
}

TEST_CASE("config validation enforces the method preconditions") {
    TrainConfig cfg;
    cfg.method = SrMethod{EnergyScore{1.0}};
    cfg.ensemble_size = 1;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("U-statistic"), std::invalid_argument);
    cfg.method = GanMethod{};
    CHECK_NOTHROW(validate(cfg));  // m = 1 is fine for the adversarial path
    cfg.ensemble_size = 0;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("zero learning rate leaves parameters untouched and reports the initial loss") {
    TimeSeries ts = random_walk(80, 3);
    WindowedDataset ds = build_windows(ts, 1, 1);
    GeneratorModel gen = make_generator(1, 1, 1, {8}, 5);
    const auto before = gen.net.flat_parameters();

    TrainConfig cfg;
    cfg.method = SrMethod{EnergyScore{1.0}};
    cfg.batch_size = 32;
    cfg.lr = 0.0;
    cfg.seed = 7;
    OptimizerState opt(gen.net.parameters(), OptimizerKind::Adam, 0.0);
    std::mt19937_64 rng(7);
    const double loss = train_sr_epoch(gen, ds, EnergyScore{1.0}, cfg, opt, rng);

    const auto after = gen.net.flat_parameters();
    CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);

    // same latents and untouched parameters reproduce the loss exactly
    std::mt19937_64 rng2(7);
    OptimizerState opt2(gen.net.parameters(), OptimizerKind::Adam, 0.0);
    const double again = train_sr_epoch(gen, ds, EnergyScore{1.0}, cfg, opt2, rng2);
    CHECK(loss == again);
}

TEST_CASE("full-batch gradient equals the mean of per-window gradients") {
    TimeSeries ts = random_walk(20, 9);
    WindowedDataset ds = build_windows(ts, 2, 1);
    const std::size_t n = ds.size(), m = 4;
    GeneratorModel gen = make_generator(2, 1, 1, {6}, 11);

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const Array latents = draw_latents(n * m, 1, 13);

    gen.net.zero_grad();
    backward(sr_batch_loss(gen, ds, all, EnergyScore{1.0}, latents, m));
    const auto full = flat_grads(gen.net);

    gen.net.zero_grad();
    for (std::size_t t = 0; t < n; ++t) {
        Array z = Array::zeros({m, 1});
        std::copy(latents.data.begin() + t * m, latents.data.begin() + (t + 1) * m,
                  z.data.begin());
        Var loss = scale(sr_batch_loss(gen, ds, {t}, EnergyScore{1.0}, z, m),
                         1.0 / static_cast<double>(n));
        backward(loss);
    }
    const auto accumulated = flat_grads(gen.net);

    for (std::size_t i = 0; i < full.size(); ++i)
        CHECK(std::abs(full[i] - accumulated[i]) < 1e-9);
}

TEST_CASE("energy-score training beats the untrained model on the 1-d task") {
    TimeSeries ts = random_walk(1200, 101);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    GeneratorModel gen = make_generator(1, 1, 1, {24, 24}, 7);
    TrainConfig cfg;
    cfg.method = SrMethod{EnergyScore{1.0}};
    cfg.ensemble_size = 10;
    cfg.batch_size = 128;
    cfg.epochs = 50;
    cfg.patience = 50;
    cfg.lr = 1e-2;
    cfg.seed = 11;

    const Array val_latents = draw_latents(val_ds.size() * 10, 1, 42);
    const double before = prequential_score(gen, val_ds, EnergyScore{1.0}, 10, val_latents);
    fit(gen, nullptr, train_ds, val_ds, cfg);
    const double after = prequential_score(gen, val_ds, EnergyScore{1.0}, 10, val_latents);
    CHECK(after < before);
    CHECK(after < 0.5);  // near the noise floor of the task (sigma = 0.1)
}

TEST_CASE("gan training improves on init but trails scoring-rule training") {
    TimeSeries ts = random_walk(1200, 101);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    const Array val_latents = draw_latents(val_ds.size() * 100, 1, 42);
    auto energy_of = [&](const GeneratorModel& g) {
        return prequential_score(g, val_ds, EnergyScore{1.0}, 100, val_latents);
    };

    GeneratorModel sr_gen = make_generator(1, 1, 1, {24, 24}, 7);
    TrainConfig sr_cfg;
    sr_cfg.method = SrMethod{EnergyScore{1.0}};
    sr_cfg.ensemble_size = 10;
    sr_cfg.batch_size = 128;
    sr_cfg.epochs = 50;
    sr_cfg.patience = 50;
    sr_cfg.lr = 1e-2;
    sr_cfg.seed = 11;
    fit(sr_gen, nullptr, train_ds, val_ds, sr_cfg);

    GeneratorModel gan_gen = make_generator(1, 1, 1, {24, 24}, 7);
    DiscriminatorModel disc = make_discriminator(1, 1, {24, 24}, 8);
    TrainConfig gan_cfg;
    gan_cfg.method = GanMethod{};
    gan_cfg.ensemble_size = 1;
    gan_cfg.batch_size = 128;
    gan_cfg.epochs = 50;
    gan_cfg.patience = 50;
    gan_cfg.lr = 1e-3;
    gan_cfg.lr_disc = 1e-3;
    gan_cfg.seed = 13;
    const double gan_before = energy_of(gan_gen);
    fit(gan_gen, &disc, train_ds, val_ds, gan_cfg);
    const double gan_after = energy_of(gan_gen);

    CHECK(gan_after < gan_before);
    CHECK(energy_of(sr_gen) < gan_after);
}

TEST_CASE("zero learning rates freeze both adversarial networks") {
    TimeSeries ts = random_walk(60, 21);
    WindowedDataset ds = build_windows(ts, 1, 1);
    GeneratorModel gen = make_generator(1, 1, 1, {8}, 23);
    DiscriminatorModel disc = make_discriminator(1, 1, {8}, 25);
    const auto g0 = gen.net.flat_parameters();
    const auto d0 = disc.net.flat_parameters();

    TrainConfig cfg;
    cfg.method = GanMethod{};
    cfg.ensemble_size = 1;
    cfg.batch_size = 16;
    OptimizerState og(gen.net.parameters(), OptimizerKind::Adam, 0.0);
    OptimizerState od(disc.net.parameters(), OptimizerKind::Adam, 0.0);
    std::mt19937_64 rng(27);
    train_gan_epoch(gen, disc, ds, cfg, og, od, rng);

    CHECK(gen.net.flat_parameters() == g0);
    CHECK(disc.net.flat_parameters() == d0);
}

TEST_CASE("an untrained discriminator yields generator loss log(1/2)") {
    TimeSeries ts = random_walk(40, 31);
    WindowedDataset ds = build_windows(ts, 1, 1);
    GeneratorModel gen = make_generator(1, 1, 1, {8}, 33);
    DiscriminatorModel disc{Mlp::zeros({2, 8, 1}), 1, 1};  // outputs exactly 0.5

    TrainConfig cfg;
    cfg.method = GanMethod{};
    cfg.ensemble_size = 1;
    cfg.batch_size = ds.size();
    OptimizerState og(gen.net.parameters(), OptimizerKind::Adam, 0.0);
    OptimizerState od(disc.net.parameters(), OptimizerKind::Adam, 0.0);
    std::mt19937_64 rng(35);
    const auto [disc_loss, gen_loss] = train_gan_epoch(gen, disc, ds, cfg, og, od, rng);
    CHECK(gen_loss == doctest::Approx(std::log(0.5)).epsilon(1e-12));
    CHECK(disc_loss == doctest::Approx(-2.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("fit is deterministic given the seed") {
    TimeSeries ts = random_walk(300, 41);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    auto run = [&]() {
        GeneratorModel gen = make_generator(1, 1, 1, {12}, 43);
        TrainConfig cfg;
        cfg.method = SrMethod{EnergyScore{1.0}};
        cfg.ensemble_size = 5;
        cfg.batch_size = 64;
        cfg.epochs = 8;
        cfg.patience = 8;
        cfg.lr = 3e-3;
        cfg.seed = 45;
        TrainReport rep = fit(gen, nullptr, train_ds, val_ds, cfg);
        return std::make_pair(rep, gen.net.flat_parameters());
    };
    const auto [rep_a, par_a] = run();
    const auto [rep_b, par_b] = run();
    CHECK(rep_a.val_score == rep_b.val_score);
    CHECK(rep_a.train_loss == rep_b.train_loss);
    CHECK(rep_a.best_epoch == rep_b.best_epoch);
    CHECK(par_a == par_b);
}

TEST_CASE("fit restores the best-epoch parameters") {
    TimeSeries ts = random_walk(300, 47);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    GeneratorModel gen = make_generator(1, 1, 1, {12}, 49);
    TrainConfig cfg;
    cfg.method = SrMethod{EnergyScore{1.0}};
    cfg.ensemble_size = 5;
    cfg.batch_size = 64;
    cfg.epochs = 12;
    cfg.patience = 12;
    cfg.lr = 1e-2;
    cfg.seed = 51;
    TrainReport rep = fit(gen, nullptr, train_ds, val_ds, cfg);

    double min_seen = rep.val_score[0];
    for (double v : rep.val_score) min_seen = std::min(min_seen, v);
    CHECK(rep.best_val == min_seen);
    // the restored model reproduces the best epoch's validation score
    const Array val_latents =
        draw_latents(val_ds.size() * cfg.ensemble_size, 1, mix_seed(cfg.seed, 0x7a11d8));
    const double restored =
        prequential_score(gen, val_ds, EnergyScore{1.0}, cfg.ensemble_size, val_latents);
    CHECK(restored == doctest::Approx(rep.best_val).epsilon(1e-12));
}

TEST_CASE("single-batch overfit reaches the empirical minimum") {
    TimeSeries tiny = random_walk(12, 55);
    WindowedDataset ds = build_windows(tiny, 1, 1);  // 10 pairs plus one
    GeneratorModel gen = make_generator(1, 1, 1, {16, 16}, 9);
    TrainConfig cfg;
    cfg.method = SrMethod{KernelScore{1.0}};
    cfg.ensemble_size = 10;
    cfg.batch_size = 16;
    cfg.lr = 1e-2;
    cfg.seed = 17;
    OptimizerState opt(gen.net.parameters(), OptimizerKind::Adam, cfg.lr);
    std::mt19937_64 rng(17);
    double loss = 0.0;
    for (int e = 0; e < 3000; ++e)
        loss = train_sr_epoch(gen, ds, KernelScore{1.0}, cfg, opt, rng);
    // kernel score of the target's own point-mass ensemble is exactly -1
    CHECK(loss <= -0.95);
}

TEST_CASE("averaged stochastic gradients converge to the large-ensemble gradient") {
    GeneratorModel gen = make_generator(1, 1, 1, {8}, 19);
    TimeSeries tiny = random_walk(12, 77);
    WindowedDataset ds = build_windows(tiny, 1, 1);
    const std::vector<std::size_t> one{0};

    auto grad_with = [&](std::size_t m, std::uint64_t seed) {
        Array latents = draw_latents(m, 1, seed);
        gen.net.zero_grad();
        backward(sr_batch_loss(gen, ds, one, EnergyScore{1.0}, latents, m));
        return flat_grads(gen.net);
    };

    const std::size_t P = gen.net.parameter_count();
    std::vector<double> avg_small(P, 0.0), avg_big(P, 0.0);
    const int R = 20000, RB = 100;
    for (int r = 0; r < R; ++r) {
        const auto g = grad_with(10, 1000 + r);
        for (std::size_t i = 0; i < P; ++i) avg_small[i] += g[i] / R;
    }
    for (int r = 0; r < RB; ++r) {
        const auto g = grad_with(2000, 500000 + r);
        for (std::size_t i = 0; i < P; ++i) avg_big[i] += g[i] / RB;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
        num += (avg_small[i] - avg_big[i]) * (avg_small[i] - avg_big[i]);
        den += avg_big[i] * avg_big[i];
    }
    CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("a single sweep candidate reduces to fit with the derived seed") {
    TimeSeries ts = random_walk(200, 61);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    GeneratorModel init = make_generator(1, 1, 1, {10}, 63);
    TrainConfig base;
    base.method = SrMethod{EnergyScore{1.0}};
    base.ensemble_size = 4;
    base.batch_size = 32;
    base.epochs = 5;
    base.patience = 5;
    base.seed = 65;

    SweepResult sweep = lr_sweep(init, nullptr, train_ds, val_ds, base, {2e-3}, {}, 1);
    REQUIRE(sweep.candidates.size() == 1);

    GeneratorModel gen = GeneratorModel{init.net.clone(), 1, 1, 1};
    TrainConfig cfg = base;
    cfg.lr = 2e-3;
    cfg.seed = mix_seed(base.seed, 1);
    TrainReport direct = fit(gen, nullptr, train_ds, val_ds, cfg);
    CHECK(sweep.candidates[0].report.val_score == direct.val_score);
    CHECK(sweep.best_gen.net.flat_parameters() == gen.net.flat_parameters());
}

TEST_CASE("a gan sweep enumerates the full rate grid") {
    TimeSeries ts = random_walk(60, 67);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    GeneratorModel init = make_generator(1, 1, 1, {6}, 69);
    DiscriminatorModel disc = make_discriminator(1, 1, {6}, 71);
    TrainConfig base;
    base.method = GanMethod{};
    base.ensemble_size = 1;
    base.batch_size = 16;
    base.epochs = 1;
    base.patience = 1;
    base.gan_val_ensemble = 4;
    base.seed = 73;

    const std::vector<double> rates{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    SweepResult sweep = lr_sweep(init, &disc, train_ds, val_ds, base, rates, rates, 1);
    CHECK(sweep.candidates.size() == 25);

    // parallel workers reproduce the sequential result
    SweepResult parallel = lr_sweep(init, &disc, train_ds, val_ds, base, rates, rates, 2);
    CHECK(parallel.best_index == sweep.best_index);
    for (std::size_t i = 0; i < 25; ++i)
        CHECK(parallel.candidates[i].report.best_val == sweep.candidates[i].report.best_val);
}

TEST_CASE("a sweep where every candidate diverges reports diagnostics") {
    TimeSeries ts = random_walk(60, 81);
    auto splits = split_series(ts, {0.6, 0.2, 0.2});
    WindowedDataset train_ds = build_windows(splits[0], 1, 1);
    WindowedDataset val_ds = build_windows(splits[1], 1, 1);

    GeneratorModel init = make_generator(1, 1, 1, {6}, 83);
    TrainConfig base;
    base.method = SrMethod{EnergyScore{1.0}};
    base.ensemble_size = 4;
    base.batch_size = 16;
    base.epochs = 40;
    base.patience = 40;
    base.optimizer = OptimizerKind::Sgd;
    base.seed = 85;

    CHECK_THROWS_WITH_AS(lr_sweep(init, nullptr, train_ds, val_ds, base, {1e18, 1e19}, {}, 1),
                         doctest::Contains("diverged"), NumericalError);
}

TEST_CASE("nan losses abort with the batch index and parameter norm") {
    TimeSeries ts = random_walk(60, 91);
    WindowedDataset ds = build_windows(ts, 1, 1);
    GeneratorModel gen = make_generator(1, 1, 1, {6}, 93);
    gen.net.weights[0].mutable_data()[0] = std::nan("");

    TrainConfig cfg;
    cfg.method = SrMethod{EnergyScore{1.0}};
    cfg.ensemble_size = 4;
    cfg.batch_size = 16;
    OptimizerState opt(gen.net.parameters(), OptimizerKind::Adam, 1e-3);
    std::mt19937_64 rng(95);
    CHECK_THROWS_WITH_AS(train_sr_epoch(gen, ds, EnergyScore{1.0}, cfg, opt, rng),
                         doctest::Contains("batch"), NumericalError);
}
