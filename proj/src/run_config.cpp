#include "srf/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace srf {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct IniDoc {
    // section.key -> value
    std::map<std::string, std::string> entries;

    bool has(const std::string& key) const { return entries.count(key) > 0; }
};

IniDoc parse_ini(std::istream& in) {
    IniDoc doc;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": key \"" + key +
                              "\" outside any [section]");
        const std::string full = section + "." + key;
        if (doc.entries.count(full))
            throw ConfigError("config: duplicate key " + full);
        doc.entries[full] = value;
    }
    return doc;
}

class Reader {
public:
    explicit Reader(const IniDoc& doc) : doc_(doc) {}

    template <typename F>
    void take(const std::string& key, F apply) {
        auto it = doc_.entries.find(key);
        if (it == doc_.entries.end()) return;
        consumed_.insert(key);
        try {
            apply(it->second);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config key " + key + ": " + e.what());
        }
    }

    void check_unknown() const {
        std::vector<std::string> unknown;
        for (const auto& [k, v] : doc_.entries)
            if (!consumed_.count(k)) unknown.push_back(k);
        if (!unknown.empty()) {
            std::string msg = "config: unknown keys:";
            for (const auto& k : unknown) msg += " " + k;
            throw ConfigError(msg);
        }
    }

private:
    const IniDoc& doc_;
    std::set<std::string> consumed_;
};

double to_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw ConfigError("not a number: \"" + s + "\"");
    return v;
}

std::size_t to_size(const std::string& s) {
    const double v = to_double(s);
    if (v < 0 || v != std::floor(v)) throw ConfigError("not a nonnegative integer: \"" + s + "\"");
    return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("not a boolean: \"" + s + "\"");
}

std::vector<double> to_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(item));
    }
    if (out.empty()) throw ConfigError("empty list: \"" + s + "\"");
    return out;
}

std::vector<std::size_t> to_size_list(const std::string& s) {
    std::vector<std::size_t> out;
    for (double v : to_double_list(s)) {
        if (v < 0 || v != std::floor(v))
            throw ConfigError("not a nonnegative integer list: \"" + s + "\"");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::optional<SimulationSpec> read_simulate_section(Reader& r) {
    bool any = false;
    std::string system, scheme = "euler", init = "preset", components;
    double dt = 0, record_every = 0, burn_in = -1, duration = 0;
    std::map<std::string, double> named;

    auto grab = [&](const std::string& key, auto apply) {
        r.take("simulate." + key, [&](const std::string& v) {
            any = true;
            apply(v);
        });
    };
    grab("system", [&](const std::string& v) { system = v; });
    grab("scheme", [&](const std::string& v) { scheme = v; });
    grab("components", [&](const std::string& v) { components = v; });
    grab("init", [&](const std::string& v) { init = v; });
    grab("dt", [&](const std::string& v) { dt = to_double(v); });
    grab("record_every", [&](const std::string& v) { record_every = to_double(v); });
    grab("burn_in", [&](const std::string& v) { burn_in = to_double(v); });
    grab("duration", [&](const std::string& v) { duration = to_double(v); });
    for (const char* key : {"sigma", "rho", "beta", "K", "J", "h", "b", "c", "F"})
        grab(key, [&, key](const std::string& v) { named[key] = to_double(v); });

    if (!any) return std::nullopt;
    if (system != "lorenz63" && system != "lorenz96")
        throw ConfigError("simulate.system must be lorenz63 or lorenz96, got \"" + system + "\"");

    SimulationSpec spec;
    spec.scheme = scheme == "rk4" ? Scheme::Rk4 : Scheme::Euler;
    if (scheme != "euler" && scheme != "rk4")
        throw ConfigError("simulate.scheme must be euler or rk4, got \"" + scheme + "\"");
    spec.label = system + "-custom";

    auto fill_common = [&](auto& p) {
        if (dt > 0) p.dt = dt;
        if (record_every > 0) p.record_every = record_every;
        if (burn_in >= 0) p.burn_in = burn_in;
        if (duration > 0) p.duration = duration;
    };
    if (system == "lorenz63") {
        Lorenz63Params p;
        if (named.count("sigma")) p.sigma = named["sigma"];
        if (named.count("rho")) p.rho = named["rho"];
        if (named.count("beta")) p.beta = named["beta"];
        fill_common(p);
        if (init != "preset") {
            auto vals = to_double_list(init);
            p.init = vals;
        }
        spec.params = p;
        spec.components = {1};
    } else {
        Lorenz96Params p;
        if (named.count("K")) p.slow_vars = static_cast<std::size_t>(named["K"]);
        if (named.count("J")) p.fast_per_slow = static_cast<std::size_t>(named["J"]);
        if (named.count("h")) p.h = named["h"];
        if (named.count("b")) p.b = named["b"];
        if (named.count("c")) p.c = named["c"];
        if (named.count("F")) p.forcing = named["F"];
        fill_common(p);
        if (init != "preset") p.init = to_double_list(init);
        spec.params = p;
        spec.components.resize(p.slow_vars);
        for (std::size_t k = 0; k < p.slow_vars; ++k) spec.components[k] = k;
    }
    if (!components.empty()) {
        spec.components.clear();
        for (std::size_t c : to_size_list(components)) spec.components.push_back(c);
    }
    return spec;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    std::istringstream in(text);
    IniDoc doc = parse_ini(in);
    Reader r(doc);
    RunConfig cfg;

    r.take("data.source", [&](const std::string& v) { cfg.source = v; });
    r.take("data.preset", [&](const std::string& v) { cfg.preset = v; });
    r.take("data.path", [&](const std::string& v) { cfg.path = v; });
    r.take("data.duration", [&](const std::string& v) { cfg.duration_override = to_double(v); });
    r.take("data.train_frac", [&](const std::string& v) { cfg.train_frac = to_double(v); });
    r.take("data.val_frac", [&](const std::string& v) { cfg.val_frac = to_double(v); });
    r.take("data.test_frac", [&](const std::string& v) { cfg.test_frac = to_double(v); });
    r.take("data.window", [&](const std::string& v) { cfg.window = to_size(v); });
    r.take("data.lead", [&](const std::string& v) { cfg.lead = to_size(v); });
    r.take("data.normalize", [&](const std::string& v) { cfg.normalize = to_bool(v); });

    r.take("model.hidden", [&](const std::string& v) { cfg.hidden = to_size_list(v); });
    r.take("model.latent_dim", [&](const std::string& v) { cfg.latent_dim = to_size(v); });

    r.take("score.kind", [&](const std::string& v) { cfg.score.kind = v; });
    r.take("score.beta", [&](const std::string& v) { cfg.score.beta = to_double(v); });
    r.take("score.gamma", [&](const std::string& v) { cfg.score.gamma = v; });
    r.take("score.variogram_p", [&](const std::string& v) { cfg.score.variogram_p = to_double(v); });
    r.take("score.variogram_weights",
           [&](const std::string& v) { cfg.score.variogram_weights = v; });
    r.take("score.sum_weight_1", [&](const std::string& v) { cfg.score.sum_weight_1 = to_double(v); });
    r.take("score.sum_weight_2", [&](const std::string& v) { cfg.score.sum_weight_2 = to_double(v); });

    r.take("train.method", [&](const std::string& v) { cfg.method = v; });
    r.take("train.m", [&](const std::string& v) { cfg.m = to_size(v); });
    r.take("train.batch_size", [&](const std::string& v) { cfg.batch_size = to_size(v); });
    r.take("train.epochs", [&](const std::string& v) { cfg.epochs = to_size(v); });
    r.take("train.patience", [&](const std::string& v) { cfg.patience = to_size(v); });
    r.take("train.optimizer", [&](const std::string& v) { cfg.optimizer = v; });
    r.take("train.lr", [&](const std::string& v) { cfg.lr = to_double(v); });
    r.take("train.lr_disc", [&](const std::string& v) { cfg.lr_disc = to_double(v); });
    r.take("train.disc_updates", [&](const std::string& v) { cfg.disc_updates = to_size(v); });
    r.take("train.sweep", [&](const std::string& v) { cfg.sweep = to_bool(v); });
    r.take("train.lr_grid", [&](const std::string& v) { cfg.lr_grid = to_double_list(v); });
    r.take("train.lr_grid_disc",
           [&](const std::string& v) { cfg.lr_grid_disc = to_double_list(v); });
    r.take("train.gan_val_m", [&](const std::string& v) { cfg.gan_val_m = to_size(v); });
    r.take("train.jobs", [&](const std::string& v) { cfg.jobs = to_size(v); });

    r.take("eval.m_eval", [&](const std::string& v) { cfg.m_eval = to_size(v); });
    r.take("output.dir", [&](const std::string& v) { cfg.out_dir = v; });
    r.take("run.seed", [&](const std::string& v) { cfg.seed = std::stoull(v); });

    cfg.custom_sim = read_simulate_section(r);
    r.check_unknown();

    if (const char* env = std::getenv("SRF_OUT_DIR"); env && *env) cfg.out_dir = env;
    validate(cfg);
    return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_run_config_text(ss.str());
}

void validate(const RunConfig& cfg) {
    if (cfg.source != "preset" && cfg.source != "file")
        throw ConfigError("data.source must be preset or file, got \"" + cfg.source + "\"");
    if (cfg.source == "file" && cfg.path.empty())
        throw ConfigError("data.source = file requires data.path");
    if (cfg.source == "preset" && !cfg.custom_sim) {
        try {
            simulation_preset(cfg.preset);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    const double frac_sum = cfg.train_frac + cfg.val_frac + cfg.test_frac;
    if (!(cfg.train_frac > 0 && cfg.val_frac > 0 && cfg.test_frac > 0))
        throw ConfigError("data split fractions must be positive");
    if (std::abs(frac_sum - 1.0) > 1e-9)
        throw ConfigError("data split fractions must sum to 1, got " + std::to_string(frac_sum));
    if (cfg.window < 1 || cfg.lead < 1) throw ConfigError("data.window and data.lead must be >= 1");

    if (cfg.hidden.empty()) throw ConfigError("model.hidden must name at least one hidden layer");
    for (std::size_t h : cfg.hidden)
        if (h < 1) throw ConfigError("model.hidden widths must be >= 1");

    if (cfg.method != "sr" && cfg.method != "gan")
        throw ConfigError("train.method must be sr or gan, got \"" + cfg.method + "\"");
    if (cfg.method == "sr") {
        if (cfg.m < 2) throw ConfigError("scoring-rule training needs train.m >= 2 (U-statistic)");
        static const std::set<std::string> kinds{"energy", "kernel", "variogram",
                                                 "energy-variogram", "kernel-variogram"};
        if (!kinds.count(cfg.score.kind))
            throw ConfigError("score.kind \"" + cfg.score.kind +
                              "\" unknown (energy, kernel, variogram, energy-variogram, "
                              "kernel-variogram)");
        if (!(cfg.score.beta > 0.0 && cfg.score.beta < 2.0))
            throw ConfigError("score.beta must lie in (0, 2)");
        if (cfg.score.gamma != "auto") {
            const double g = to_double(cfg.score.gamma);
            if (!(g > 0.0)) throw ConfigError("score.gamma must be auto or > 0");
        }
        if (!(cfg.score.variogram_p > 0.0)) throw ConfigError("score.variogram_p must be > 0");
        if (cfg.score.variogram_weights != "ones" && cfg.score.variogram_weights != "cyclic")
            throw ConfigError("score.variogram_weights must be ones or cyclic");
        if (!(cfg.score.sum_weight_1 > 0.0 && cfg.score.sum_weight_2 > 0.0))
            throw ConfigError("score weighted-sum weights must be > 0");
    } else if (cfg.m < 1) {
        throw ConfigError("train.m must be >= 1");
    }
    if (cfg.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (cfg.patience < 1) throw ConfigError("train.patience must be >= 1");
    if (cfg.optimizer != "adam" && cfg.optimizer != "sgd")
        throw ConfigError("train.optimizer must be adam or sgd");
    if (cfg.lr < 0.0 || cfg.lr_disc < 0.0) throw ConfigError("learning rates must be >= 0");
    if (cfg.disc_updates < 1) throw ConfigError("train.disc_updates must be >= 1");
    if (cfg.sweep && cfg.lr_grid.empty()) throw ConfigError("train.lr_grid must not be empty");
    for (double lr : cfg.lr_grid)
        if (!(lr >= 0.0)) throw ConfigError("train.lr_grid entries must be >= 0");
    if (cfg.method == "gan" && cfg.sweep && cfg.lr_grid_disc.empty())
        throw ConfigError("train.lr_grid_disc must not be empty for a GAN sweep");
    if (cfg.gan_val_m < 2) throw ConfigError("train.gan_val_m must be >= 2");
    if (cfg.jobs < 1) throw ConfigError("train.jobs must be >= 1");
    if (cfg.m_eval < 20) throw ConfigError("eval.m_eval must be >= 20 (calibration floor)");
    if (cfg.out_dir.empty()) throw ConfigError("output.dir must not be empty");
}

bool scoring_rule_needs_gamma(const ScoreConfig& score) {
    return score.kind == "kernel" || score.kind == "kernel-variogram";
}

ScoringRule build_scoring_rule(const ScoreConfig& score, std::size_t d,
                               std::optional<double> tuned_gamma) {
    auto gamma_value = [&]() -> double {
        if (score.gamma == "auto") {
            if (!tuned_gamma)
                throw ConfigError("score.gamma = auto requires a tuned bandwidth at build time");
            return *tuned_gamma;
        }
        return to_double(score.gamma);
    };
    auto variogram = [&]() -> VariogramScore {
        Array w = score.variogram_weights == "cyclic" && d >= 2
                      ? cyclic_weight_matrix(d)
                      : [&] {
                            Array ones = Array::full({d, d}, 1.0);
                            for (std::size_t i = 0; i < d; ++i) ones.at(i, i) = 0.0;
                            return ones;
                        }();
        return VariogramScore{score.variogram_p, std::move(w)};
    };

    ScoringRule rule = EnergyScore{score.beta};
    if (score.kind == "energy") {
        rule = EnergyScore{score.beta};
    } else if (score.kind == "kernel") {
        rule = KernelScore{gamma_value()};
    } else if (score.kind == "variogram") {
        rule = variogram();
    } else if (score.kind == "energy-variogram") {
        WeightedSum sum;
        sum.terms.emplace_back(score.sum_weight_1, EnergyScore{score.beta});
        sum.terms.emplace_back(score.sum_weight_2, variogram());
        rule = std::move(sum);
    } else if (score.kind == "kernel-variogram") {
        WeightedSum sum;
        sum.terms.emplace_back(score.sum_weight_1, KernelScore{gamma_value()});
        sum.terms.emplace_back(score.sum_weight_2, variogram());
        rule = std::move(sum);
    } else {
        throw ConfigError("unknown score.kind \"" + score.kind + "\"");
    }
    validate(rule);
    return rule;
}

std::string default_config_text() {
    RunConfig d;
    std::ostringstream os;
    auto list = [](const auto& values) {
        std::ostringstream ls;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) ls << ",";
            ls << values[i];
        }
        return ls.str();
    };
    os << "# srf run configuration (all keys at their defaults)\n";
    os << "[data]\n";
    os << "source = " << d.source << "          # preset | file\n";
    os << "preset = " << d.preset << "  # lorenz63-paper | lorenz96-paper\n";
    os << "path =                   # time-series file when source = file\n";
    os << "duration = 0             # preset duration override (0 keeps the preset value)\n";
    os << "train_frac = " << d.train_frac << "\n";
    os << "val_frac = " << d.val_frac << "\n";
    os << "test_frac = " << d.test_frac << "\n";
    os << "window = " << d.window << "              # observation window k\n";
    os << "lead = " << d.lead << "                 # lead time l\n";
    os << "normalize = true\n\n";
    os << "[model]\n";
    os << "hidden = " << list(d.hidden) << "\n";
    os << "latent_dim = " << d.latent_dim << "\n\n";
    os << "[score]\n";
    os << "kind = " << d.score.kind
       << "            # energy | kernel | variogram | energy-variogram | kernel-variogram\n";
    os << "beta = " << d.score.beta << "\n";
    os << "gamma = " << d.score.gamma << "             # auto tunes on validation targets\n";
    os << "variogram_p = " << d.score.variogram_p << "\n";
    os << "variogram_weights = " << d.score.variogram_weights << "  # ones | cyclic\n";
    os << "sum_weight_1 = " << d.score.sum_weight_1 << "\n";
    os << "sum_weight_2 = " << d.score.sum_weight_2 << "\n\n";
    os << "[train]\n";
    os << "method = " << d.method << "              # sr | gan\n";
    os << "m = " << d.m << "\n";
    os << "batch_size = " << d.batch_size << "\n";
    os << "epochs = " << d.epochs << "\n";
    os << "patience = " << d.patience << "\n";
    os << "optimizer = " << d.optimizer << "        # adam | sgd\n";
    os << "lr = " << d.lr << "\n";
    os << "lr_disc = " << d.lr_disc << "\n";
    os << "disc_updates = " << d.disc_updates << "\n";
    os << "sweep = false\n";
    os << "lr_grid = " << list(d.lr_grid) << "\n";
    os << "lr_grid_disc = " << list(d.lr_grid_disc) << "\n";
    os << "gan_val_m = " << d.gan_val_m << "\n";
    os << "jobs = " << d.jobs << "\n\n";
    os << "[eval]\n";
    os << "m_eval = " << d.m_eval << "\n\n";
    os << "[output]\n";
    os << "dir = " << d.out_dir << "\n\n";
    os << "[run]\n";
    os << "seed = " << d.seed << "\n";
    return os.str();
}

}  // namespace srf
