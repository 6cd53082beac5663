#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "srf/dataset.hpp"

namespace srf {

struct Lorenz63Params {
    double sigma = 10.0;
    double rho = 28.0;
    double beta = 2.667;
    double dt = 0.01;
    double record_every = 0.3;
    double burn_in = 10.0;
    double duration = 9000.0;  // total integration time, burn-in included
    std::vector<double> init{0.0, 1.0, 1.05};
};

// Two-scale system: slow_vars slow components followed by
// slow_vars * fast_per_slow fast components, cyclic within each block.
struct Lorenz96Params {
    std::size_t slow_vars = 8;      // K
    std::size_t fast_per_slow = 32; // J
    double h = 1.0;
    double b = 10.0;
    double c = 10.0;
    double forcing = 20.0;          // F
    double dt = 0.001;
    double record_every = 0.2;
    double burn_in = 2.0;
    double duration = 4000.0;
    std::vector<double> init;       // size K + K*J; empty selects the x1=y1=1 preset
};

std::vector<double> lorenz63_drift(const std::vector<double>& state, const Lorenz63Params& p);
std::vector<double> lorenz96_drift(const std::vector<double>& state, const Lorenz96Params& p);

using DriftFn = std::function<void(const std::vector<double>&, std::vector<double>&)>;

std::vector<double> euler_step(const std::vector<double>& state, const DriftFn& drift, double dt);
std::vector<double> rk4_step(const std::vector<double>& state, const DriftFn& drift, double dt);

enum class Scheme { Euler, Rk4 };

// Integrates from t = 0 and records the selected components at every grid
// time j * record_every that falls in [burn_in, duration]; the row count is
// floor((duration - burn_in) / record_every).
TimeSeries simulate_lorenz63(const Lorenz63Params& p, Scheme scheme,
                             const std::vector<std::size_t>& components);
TimeSeries simulate_lorenz96(const Lorenz96Params& p, Scheme scheme,
                             const std::vector<std::size_t>& components);

// Built-in experiment presets.
struct SimulationSpec {
    std::variant<Lorenz63Params, Lorenz96Params> params;
    Scheme scheme = Scheme::Euler;
    std::vector<std::size_t> components;
    std::string label;
};

// Known names: "lorenz63-paper" (Euler, records the y component) and
// "lorenz96-paper" (RK4, records the slow block). duration_override > 0
// replaces the preset duration.
SimulationSpec simulation_preset(const std::string& name, double duration_override = 0.0);

TimeSeries run_simulation(const SimulationSpec& spec);

}  // namespace srf
