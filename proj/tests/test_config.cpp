#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "srf/run_config.hpp"

using namespace srf;

TEST_CASE("the default document parses back to the defaults") {
    RunConfig cfg = parse_run_config_text(default_config_text());
    CHECK(cfg.preset == "lorenz63-paper");
    CHECK(cfg.window == 10);
    CHECK(cfg.lead == 1);
    CHECK(cfg.m == 10);
    CHECK(cfg.batch_size == 1000);
    CHECK(cfg.epochs == 1000);
    CHECK(cfg.patience == 20);
    CHECK(cfg.optimizer == "adam");
    CHECK(cfg.m_eval == 200);
    CHECK(cfg.normalize);
    // the documented five-point sweep grid
    CHECK(cfg.lr_grid == std::vector<double>{1e-2, 3e-3, 1e-3, 3e-4, 1e-4});
    CHECK(cfg.hidden == std::vector<std::size_t>{50, 50, 50, 50, 50});
}

TEST_CASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(parse_run_config_text("[data]\nsource = preset\nbogus_key = 1\n"),
                         doctest::Contains("data.bogus_key"), ConfigError);
}

TEST_CASE("syntax errors carry line context") {
    CHECK_THROWS_AS(parse_run_config_text("[data\nsource = preset\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_text("key_outside_section = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_run_config_text("[data]\nnot-a-pair\n"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_run_config_text("[data]\nwindow = 3\nwindow = 4\n"),
                         doctest::Contains("duplicate"), ConfigError);
}

TEST_CASE("cross-module preconditions are validated up front") {
    auto with = [](const std::string& body) { return parse_run_config_text(body); };
    CHECK_THROWS_AS(with("[data]\ntrain_frac = 0.5\nval_frac = 0.2\ntest_frac = 0.2\n"),
                    ConfigError);
    CHECK_THROWS_AS(with("[data]\nsource = file\n"), ConfigError);  // missing path
    CHECK_THROWS_AS(with("[data]\npreset = lorenz42\n"), ConfigError);
    CHECK_THROWS_AS(with("[train]\nm = 1\n"), ConfigError);          // SR needs m >= 2
    CHECK_THROWS_AS(with("[train]\nmethod = blimp\n"), ConfigError);
    CHECK_THROWS_AS(with("[score]\nkind = crps\n"), ConfigError);
    CHECK_THROWS_AS(with("[score]\nbeta = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(with("[score]\ngamma = -1\n"), ConfigError);
    CHECK_THROWS_AS(with("[eval]\nm_eval = 10\n"), ConfigError);
    CHECK_THROWS_AS(with("[train]\noptimizer = rmsprop\n"), ConfigError);
    CHECK_THROWS_AS(with("[train]\nlr = -0.1\n"), ConfigError);
    CHECK_NOTHROW(with("[train]\nlr = 0\n"));      // the lr = 0 smoke path is legal
    CHECK_NOTHROW(with("[train]\nmethod = gan\nm = 1\n"));
}

TEST_CASE("gamma auto resolves through the tuned bandwidth") {
    ScoreConfig sc;
    sc.kind = "kernel";
    CHECK(scoring_rule_needs_gamma(sc));
    CHECK_THROWS_AS(build_scoring_rule(sc, 3, std::nullopt), ConfigError);
    ScoringRule rule = build_scoring_rule(sc, 3, 2.5);
    CHECK(std::get<KernelScore>(rule).gamma == 2.5);

    sc.gamma = "0.7";
    ScoringRule fixed = build_scoring_rule(sc, 3, std::nullopt);
    CHECK(std::get<KernelScore>(fixed).gamma == 0.7);

    sc.kind = "energy";
    CHECK_FALSE(scoring_rule_needs_gamma(sc));
}

TEST_CASE("named scoring rules are assembled with the right structure") {
    ScoreConfig sc;
    sc.kind = "energy";
    sc.beta = 1.5;
    CHECK(std::get<EnergyScore>(build_scoring_rule(sc, 8, std::nullopt)).beta == 1.5);

    sc.kind = "variogram";
    sc.variogram_weights = "cyclic";
    auto vario = std::get<VariogramScore>(build_scoring_rule(sc, 8, std::nullopt));
    CHECK(vario.weights.at(0, 1) == 1.0);
    CHECK(vario.weights.at(0, 4) == 0.25);

    sc.variogram_weights = "ones";
    auto ones = std::get<VariogramScore>(build_scoring_rule(sc, 4, std::nullopt));
    CHECK(ones.weights.at(0, 0) == 0.0);  // zero diagonal
    CHECK(ones.weights.at(0, 3) == 1.0);

    sc.kind = "energy-variogram";
    sc.sum_weight_1 = 2.0;
    sc.sum_weight_2 = 3.0;
    auto sum = std::get<WeightedSum>(build_scoring_rule(sc, 4, std::nullopt));
    REQUIRE(sum.terms.size() == 2);
    CHECK(sum.terms[0].first == 2.0);
    CHECK(std::holds_alternative<EnergyScore>(sum.terms[0].second));
    CHECK(sum.terms[1].first == 3.0);
    CHECK(std::holds_alternative<VariogramScore>(sum.terms[1].second));

    sc.kind = "kernel-variogram";
    auto kv = std::get<WeightedSum>(build_scoring_rule(sc, 4, 1.1));
    CHECK(std::get<KernelScore>(kv.terms[0].second).gamma == 1.1);
}

TEST_CASE("the simulate section builds a custom specification") {
    RunConfig cfg = parse_run_config_text(
        "[simulate]\n"
        "system = lorenz63\n"
        "scheme = euler\n"
        "dt = 0.02\n"
        "record_every = 0.2\n"
        "burn_in = 1\n"
        "duration = 50\n"
        "sigma = 9\n"
        "components = 0,2\n");
    REQUIRE(cfg.custom_sim.has_value());
    const auto& p = std::get<Lorenz63Params>(cfg.custom_sim->params);
    CHECK(p.sigma == 9.0);
    CHECK(p.dt == 0.02);
    CHECK(cfg.custom_sim->components == std::vector<std::size_t>{0, 2});

    CHECK_THROWS_AS(parse_run_config_text("[simulate]\nsystem = lorenz404\n"), ConfigError);
}

TEST_CASE("comments and whitespace are tolerated") {
    RunConfig cfg = parse_run_config_text(
        "# leading comment\n"
        "[data]\n"
        "  window = 7   # trailing comment\n"
        "\n"
        "[train]\n"
        "m = 4\n");
    CHECK(cfg.window == 7);
    CHECK(cfg.m == 4);
}

TEST_CASE("the output directory honors the environment override") {
    setenv("SRF_OUT_DIR", "/tmp/srf_env_dir", 1);
    RunConfig cfg = parse_run_config_text("[output]\ndir = runs/explicit\n");
    CHECK(cfg.out_dir == "/tmp/srf_env_dir");
    unsetenv("SRF_OUT_DIR");
    RunConfig cfg2 = parse_run_config_text("[output]\ndir = runs/explicit\n");
    CHECK(cfg2.out_dir == "runs/explicit");
}
