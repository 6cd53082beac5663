#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "srf/pipeline.hpp"
#include "srf/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitTolerance = 4;

std::string default_out(const std::string& fallback) {
    if (const char* env = std::getenv("SRF_OUT_DIR"); env && *env) return env;
    return fallback;
}

srf::RunConfig load_config(const std::string& path) {
    if (path.empty()) return srf::parse_run_config_text(srf::default_config_text());
    return srf::parse_run_config_file(path);
}

void print_series_summary(const srf::TimeSeries& ts) {
    const std::size_t d = ts.dim();
    std::cout << "rows " << ts.length() << ", components " << d << ", dt " << ts.dt_record
              << ", origin " << ts.origin << "\n";
    for (std::size_t c = 0; c < d; ++c) {
        double lo = ts.values.at(0, c), hi = lo, mean = 0.0;
        for (std::size_t t = 0; t < ts.length(); ++t) {
            const double v = ts.values.at(t, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            mean += v;
        }
        mean /= static_cast<double>(ts.length());
        std::cout << "  component " << c << ": min " << lo << ", max " << hi << ", mean " << mean
                  << "\n";
    }
}

int cmd_simulate(const std::string& config_path, const std::string& preset, double duration,
                 const std::string& out_path) {
    srf::TimeSeries ts;
    if (!preset.empty()) {
        ts = srf::run_simulation(srf::simulation_preset(preset, duration));
    } else {
        srf::RunConfig cfg = load_config(config_path);
        if (cfg.custom_sim)
            ts = srf::run_simulation(*cfg.custom_sim);
        else
            ts = srf::run_simulation(srf::simulation_preset(
                cfg.preset, duration > 0 ? duration : cfg.duration_override));
    }
    srf::write_timeseries(out_path, ts);
    std::cout << "wrote " << out_path << "\n";
    print_series_summary(ts);
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& method_flag, double lr_flag,
              bool sweep_flag, const std::string& out_flag, long long seed_flag) {
    srf::RunConfig cfg = load_config(config_path);
    if (!method_flag.empty()) {
        if (method_flag == "gan") {
            cfg.method = "gan";
        } else {
            cfg.method = "sr";
            cfg.score.kind = method_flag;
        }
    }
    if (lr_flag >= 0.0) cfg.lr = lr_flag;
    if (sweep_flag) cfg.sweep = true;
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    srf::validate(cfg);

    srf::PreparedData data = srf::prepare_data(cfg);
    srf::TrainOutcome outcome = srf::run_training(cfg, data);
    srf::write_training_outputs(cfg.out_dir, cfg, data, outcome);
    std::cout << "method " << outcome.method_label << ": best epoch "
              << outcome.report.best_epoch << "/" << outcome.report.epochs_run
              << ", validation score " << outcome.report.best_val << ", lr " << outcome.report.lr;
    if (outcome.method_label == "gan") std::cout << ", lr_disc " << outcome.report.lr_disc;
    std::cout << " (" << outcome.report.wall_seconds << " s)\n";
    if (outcome.report.disc_saturated)
        std::cout << "warning: discriminator saturated during training\n";
    std::cout << "wrote " << cfg.out_dir << "/gen.ckpt\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& out_flag, bool oracle) {
    srf::RunConfig cfg = load_config(config_path);
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    srf::PreparedData data = srf::prepare_data(cfg);

    if (oracle) {
        // Test-harness stub: the "forecaster" returns the verification.
        const std::size_t n = data.test.size(), d = data.test.dim();
        srf::Array verifications = data.test.targets;
        if (data.normalizer) verifications = data.normalizer->invert(verifications);
        srf::Array ens = srf::Array::zeros({n, cfg.m_eval, d});
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t s = 0; s < cfg.m_eval; ++s)
                std::copy(verifications.data.begin() + t * d,
                          verifications.data.begin() + (t + 1) * d,
                          ens.data.begin() + (t * cfg.m_eval + s) * d);
        srf::EvaluationArtifacts artifacts;
        srf::EvaluationReport report = srf::evaluate_ensembles(ens, verifications, &artifacts);
        std::filesystem::create_directories(cfg.out_dir);
        srf::write_report_json(cfg.out_dir + "/report.json", report, "oracle");
        srf::write_table_row_csv(cfg.out_dir + "/table_row.csv", report, "oracle");
        srf::write_forecast_csv(cfg.out_dir + "/forecasts.csv", artifacts);
        std::cout << "oracle: cal_error " << report.calibration_error << ", nrmse " << report.nrmse
                  << ", r2 " << report.r_squared << "\n";
        return kExitOk;
    }

    srf::GeneratorCheckpoint ckpt = srf::load_generator_checkpoint(checkpoint);
    if (ckpt.model.window_len != cfg.window || ckpt.model.dim != data.test.dim())
        throw srf::ConfigError(
            "checkpoint window (k = " + std::to_string(ckpt.model.window_len) +
            ", d = " + std::to_string(ckpt.model.dim) + ") does not match dataset (k = " +
            std::to_string(cfg.window) + ", d = " + std::to_string(data.test.dim()) + ")");
    // Metrics go through the checkpoint's own normalizer so they always land
    // in physical units.
    srf::EvaluationReport report = srf::run_evaluation(cfg.out_dir, cfg, data, ckpt.model,
                                                       ckpt.normalizer, "checkpoint");
    std::cout << "cal_error " << report.calibration_error << ", nrmse " << report.nrmse << ", r2 "
              << report.r_squared << "\n";
    std::cout << "wrote " << cfg.out_dir << "/report.json\n";
    return kExitOk;
}

int cmd_reproduce(const std::string& task, bool budget_ack, const std::string& budget,
                  const std::string& out_flag, long long seed_flag, std::size_t jobs,
                  const std::string& methods_csv) {
    if (!budget_ack)
        throw srf::ConfigError(
            "reproduce runs full training pipelines; acknowledge the compute budget with "
            "--accept-budget (see --budget for smaller profiles)");
    std::vector<std::string> methods;
    if (!methods_csv.empty()) {
        std::stringstream ss(methods_csv);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) methods.push_back(item);
        }
    }
    const std::string out = out_flag.empty() ? default_out("runs/reproduce-" + task) : out_flag;
    const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : 42;

    srf::ReproduceResult result = srf::run_reproduce(task, budget, out, seed, jobs, methods);
    for (const auto& mo : result.methods) {
        std::cout << mo.method << ": cal_error " << mo.report.calibration_error << ", nrmse "
                  << mo.report.nrmse << ", r2 " << mo.report.r_squared
                  << (mo.passed ? " [pass]" : " [FAIL]") << "\n";
        for (const auto& f : mo.failures) std::cout << "    " << f << "\n";
    }
    if (result.ordering_checked)
        std::cout << "scoring-rule methods beat GAN on calibration: "
                  << (result.ordering_ok ? "pass" : "FAIL") << "\n";
    std::cout << "wrote " << out << "/comparison.csv\n";
    return result.all_passed ? kExitOk : kExitTolerance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional generative forecasting via scoring-rule minimization"};
    app.require_subcommand(0, 1);

    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the default config document and exit");

    std::string sim_config, sim_preset, sim_out = "series.ts";
    double sim_duration = 0.0;
    auto* sim = app.add_subcommand("simulate", "integrate a chaotic system and write the series");
    sim->add_option("--config", sim_config, "run configuration file");
    sim->add_option("--preset", sim_preset, "lorenz63-paper | lorenz96-paper");
    sim->add_option("--duration", sim_duration, "override total duration (time units)");
    sim->add_option("--out", sim_out, "output time-series file")->required();

    std::string train_config, train_method, train_out;
    double train_lr = -1.0;
    long long train_seed = -1;
    bool train_sweep = false;
    auto* train = app.add_subcommand("train", "train a forecasting model");
    train->add_option("--config", train_config, "run configuration file");
    train->add_option("--method", train_method,
                      "energy | kernel | variogram | energy-variogram | kernel-variogram | gan");
    train->add_option("--lr", train_lr, "override learning rate");
    train->add_flag("--sweep", train_sweep, "sweep the configured learning-rate grid");
    train->add_option("--out", train_out, "output directory");
    train->add_option("--seed", train_seed, "override seed");

    std::string eval_config, eval_ckpt, eval_out;
    bool eval_oracle = false;
    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    eval->add_option("--config", eval_config, "run configuration file");
    eval->add_option("--checkpoint", eval_ckpt, "generator checkpoint path");
    eval->add_flag("--oracle", eval_oracle, "evaluate the verification-returning stub instead");
    eval->add_option("--out", eval_out, "output directory");

    std::string rep_task, rep_budget = "desk", rep_out, rep_methods;
    bool rep_ack = false;
    long long rep_seed = -1;
    std::size_t rep_jobs = 1;
    auto* rep = app.add_subcommand("reproduce", "simulate, train and evaluate a full benchmark");
    rep->add_option("task", rep_task, "lorenz63 | lorenz96")->required();
    rep->add_flag("--accept-budget", rep_ack, "acknowledge the compute budget");
    rep->add_option("--budget", rep_budget, "paper | desk | smoke (default desk)");
    rep->add_option("--out", rep_out, "output directory");
    rep->add_option("--seed", rep_seed, "seed (default 42)");
    rep->add_option("--jobs", rep_jobs, "sweep worker count");
    rep->add_option("--methods", rep_methods, "comma list restricting the method set");

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_defaults) {
            std::cout << srf::default_config_text();
            return kExitOk;
        }
        if (sim->parsed()) return cmd_simulate(sim_config, sim_preset, sim_duration, sim_out);
        if (train->parsed())
            return cmd_train(train_config, train_method, train_lr, train_sweep, train_out,
                             train_seed);
        if (eval->parsed()) {
            if (!eval_oracle && eval_ckpt.empty())
                throw srf::ConfigError("evaluate: --checkpoint required unless --oracle is set");
            return cmd_evaluate(eval_config, eval_ckpt, eval_out, eval_oracle);
        }
        if (rep->parsed())
            return cmd_reproduce(rep_task, rep_ack, rep_budget, rep_out, rep_seed, rep_jobs,
                                 rep_methods);
        std::cout << app.help();
        return kExitOk;
    } catch (const srf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const srf::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
