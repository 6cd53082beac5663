#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <random>

#include "srf/model.hpp"
#include "test_util.hpp"

using namespace srf;
using test::fd_gradient;
using test::max_rel_err;
using test::random_array;

TEST_CASE("zero-weight generator maps everything to zero") {
    GeneratorModel gen{Mlp::zeros({5, 8, 2}), 1, 2, 2};
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const Array window = random_array({2, 2}, rng);
        const Array z = random_array({1}, rng);
        const Var out = generator_forward(gen, window, z);
        CHECK(out.value().shape == Shape{2});
        CHECK(out.value().data[0] == 0.0);
        CHECK(out.value().data[1] == 0.0);
    }
}

TEST_CASE("generator forward is deterministic in (window, z, weights)") {
    GeneratorModel gen = make_generator(3, 2, 2, {16, 16}, 99);
    std::mt19937_64 rng(5);
    const Array window = random_array({3, 2}, rng);
    const Array z = random_array({2}, rng);
    const auto a = generator_forward(gen, window, z).value().data;
    const auto b = generator_forward(gen, window, z).value().data;
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("generator gradient w.r.t. a hidden weight matches finite differences") {
    std::mt19937_64 rng(7);
    GeneratorModel gen = make_generator(2, 1, 1, {6, 6}, 31);
    const Array window = random_array({2, 1}, rng);
    const Array z = random_array({1}, rng);

    Var hidden_w = gen.net.weights[1];
    const Array w0 = hidden_w.value();
    auto value_at = [&](const Array& wv) {
        std::copy(wv.data.begin(), wv.data.end(), hidden_w.mutable_data().begin());
        const double out = sum_all(generator_forward(gen, window, z)).value().data[0];
        std::copy(w0.data.begin(), w0.data.end(), hidden_w.mutable_data().begin());
        return out;
    };

    gen.net.zero_grad();
    backward(sum_all(generator_forward(gen, window, z)));
    CHECK(max_rel_err(hidden_w.grad(), fd_gradient(value_at, w0)) < 1e-4);
}

TEST_CASE("ensembles follow the latent draws") {
    GeneratorModel gen = make_generator(2, 2, 3, {12}, 17);
    std::mt19937_64 rng(9);
    const Array window = random_array({2, 2}, rng);

    LatentSampler a(3, 123), b(3, 123);
    const auto ens_a = sample_ensemble(gen, window, 7, a);
    const auto ens_b = sample_ensemble(gen, window, 7, b);
    CHECK(std::memcmp(ens_a.samples.value().data.data(), ens_b.samples.value().data.data(),
                      ens_a.samples.value().numel() * sizeof(double)) == 0);

    // m = 1 equals a single forward with the same draw
    LatentSampler c(3, 77);
    Array z1 = c.draw(1);
    LatentSampler c2(3, 77);
    const auto single = sample_ensemble(gen, window, 1, c2);
    const Array z_vec({3}, z1.data);
    const auto direct = generator_forward(gen, window, z_vec);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(single.samples.value().data[i] == direct.value().data[i]);

    CHECK_THROWS_AS(sample_ensemble(gen, window, 0, a), std::invalid_argument);
}

TEST_CASE("zero latent dimension produces a deterministic forecast") {
    GeneratorModel gen = make_generator(2, 2, 0, {10}, 21);
    std::mt19937_64 rng(11);
    const Array window = random_array({2, 2}, rng);
    LatentSampler s(0, 5);
    const auto ens = sample_ensemble(gen, window, 6, s);
    for (std::size_t i = 1; i < 6; ++i)
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(ens.samples.value().at(i, c) == ens.samples.value().at(0, c));
}

TEST_CASE("latent draws are standard normal") {
    LatentSampler s(4, 2024);
    const Array z = s.draw(20000);
    double mean = 0.0, var = 0.0;
    for (double v : z.data) mean += v;
    mean /= static_cast<double>(z.numel());
    for (double v : z.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(z.numel());
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("zero-weight discriminator outputs one half") {
    DiscriminatorModel disc{Mlp::zeros({6, 8, 1}), 2, 2};
    std::mt19937_64 rng(13);
    const Array window = random_array({2, 2}, rng);
    const Var cand(random_array({2}, rng), false);
    CHECK(discriminator_forward(disc, window, cand).value().data[0] == 0.5);
}

TEST_CASE("discriminator output stays inside the clamped unit interval") {
    std::mt19937_64 rng(15);
    DiscriminatorModel disc = make_discriminator(2, 2, {16, 16}, 41);
    // inflate weights to push the logistic toward saturation
    for (Var w : disc.net.parameters())
        for (double& v : w.mutable_data()) v *= 40.0;
    for (int trial = 0; trial < 50; ++trial) {
        const Array window = random_array({2, 2}, rng, -5.0, 5.0);
        const Var cand(random_array({2}, rng, -5.0, 5.0), false);
        const double out = discriminator_forward(disc, window, cand).value().data[0];
        CHECK(out >= 1e-7);
        CHECK(out <= 1.0 - 1e-7);
    }
}

TEST_CASE("discriminator gradient matches finite differences") {
    std::mt19937_64 rng(17);
    DiscriminatorModel disc = make_discriminator(2, 1, {8}, 43);
    const Array window = random_array({2, 1}, rng);
    const Array cand0 = random_array({1}, rng);

    auto value_at = [&](const Array& cv) {
        return discriminator_forward(disc, window, Var(cv, false)).value().data[0];
    };
    Var cand(cand0, true);
    backward(discriminator_forward(disc, window, cand));
    CHECK(max_rel_err(cand.grad(), fd_gradient(value_at, cand0)) < 1e-4);
}

TEST_CASE("parameter count matches the width arithmetic") {
    GeneratorModel gen = make_generator(10, 1, 1, {50, 50, 50, 50, 50}, 1);
    // sum (w_in + 1) * w_out over layers
    std::size_t expect = 0;
    const std::vector<std::size_t> w{11, 50, 50, 50, 50, 50, 1};
    for (std::size_t i = 0; i + 1 < w.size(); ++i) expect += (w[i] + 1) * w[i + 1];
    CHECK(gen.net.parameter_count() == expect);
    CHECK(gen.net.flat_parameters().size() == expect);
}

TEST_CASE("generator checkpoints reproduce forwards bit for bit") {
    std::mt19937_64 rng(19);
    GeneratorModel gen = make_generator(3, 2, 2, {14, 14}, 57);
    Normalizer norm{Array::vector({0.5, -1.0}), Array::vector({2.0, 3.0})};

    const std::string path = "/tmp/srf_test_gen.ckpt";
    save_generator_checkpoint(path, gen, norm);
    GeneratorCheckpoint back = load_generator_checkpoint(path);
    REQUIRE(back.normalizer.has_value());
    CHECK(back.normalizer->mean.data == norm.mean.data);
    CHECK(back.normalizer->std.data == norm.std.data);
    CHECK(back.model.latent_dim == 2);

    for (int trial = 0; trial < 10; ++trial) {
        const Array window = random_array({3, 2}, rng);
        const Array z = random_array({2}, rng);
        const auto a = generator_forward(gen, window, z).value().data;
        const auto b = generator_forward(back.model, window, z).value().data;
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    }
    std::remove(path.c_str());
}

TEST_CASE("discriminator checkpoints round-trip bit for bit") {
    std::mt19937_64 rng(23);
    DiscriminatorModel disc = make_discriminator(2, 2, {12}, 61);
    const std::string path = "/tmp/srf_test_disc.ckpt";
    save_discriminator_checkpoint(path, disc);
    DiscriminatorModel back = load_discriminator_checkpoint(path);
    for (int trial = 0; trial < 10; ++trial) {
        const Array window = random_array({2, 2}, rng);
        const Var cand(random_array({2}, rng), false);
        CHECK(discriminator_forward(disc, window, cand).value().data[0] ==
              discriminator_forward(back, window, cand).value().data[0]);
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint loaders reject the wrong kind of file") {
    const std::string path = "/tmp/srf_test_wrong.ckpt";
    GeneratorModel gen = make_generator(2, 1, 1, {4}, 3);
    save_generator_checkpoint(path, gen, std::nullopt);
    CHECK_THROWS_AS(load_discriminator_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(load_generator_checkpoint("/tmp/srf_no_such.ckpt"), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("shape validation names the offending shapes") {
    GeneratorModel gen = make_generator(3, 2, 2, {8}, 5);
    std::mt19937_64 rng(29);
    CHECK_THROWS_AS(generator_forward(gen, random_array({2, 2}, rng), random_array({2}, rng)),
                    std::invalid_argument);
    CHECK_THROWS_AS(generator_forward(gen, random_array({3, 2}, rng), random_array({1}, rng)),
                    std::invalid_argument);
}

TEST_CASE("cloned models evolve independently") {
    GeneratorModel gen = make_generator(2, 1, 1, {6}, 7);
    Mlp copy = gen.net.clone();
    gen.net.weights[0].mutable_data()[0] += 1.0;
    CHECK(copy.weights[0].value().data[0] != gen.net.weights[0].value().data[0]);
}
