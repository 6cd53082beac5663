#include "srf/simulate.hpp"

#include <cmath>
#include <stdexcept>

#include "srf/errors.hpp"

namespace srf {

namespace {

void lorenz63_drift_into(const std::vector<double>& s, const Lorenz63Params& p,
                         std::vector<double>& out) {
    out.resize(3);
    out[0] = p.sigma * (s[1] - s[0]);
    out[1] = s[0] * (p.rho - s[2]) - s[1];
    out[2] = s[0] * s[1] - p.beta * s[2];
}

void lorenz96_drift_into(const std::vector<double>& s, const Lorenz96Params& p,
                         std::vector<double>& out) {
    const std::size_t K = p.slow_vars;
    const std::size_t J = p.fast_per_slow;
    const std::size_t nfast = K * J;
    if (s.size() != K + nfast)
        throw std::invalid_argument("lorenz96 drift: state length " + std::to_string(s.size()) +
                                    " does not match K + K*J = " + std::to_string(K + nfast));
    out.resize(K + nfast);
    const double coupling = p.h * p.c / p.b;
    const double* x = s.data();
    const double* y = s.data() + K;

    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t km1 = (k + K - 1) % K;
        const std::size_t km2 = (k + K - 2) % K;
        const std::size_t kp1 = (k + 1) % K;
        double fast_sum = 0.0;
        for (std::size_t j = k * J; j < (k + 1) * J; ++j) fast_sum += y[j];
        out[k] = -x[km1] * (x[km2] - x[kp1]) - x[k] + p.forcing - coupling * fast_sum;
    }
    const double cb = p.c * p.b;
    // wrap-free indexing in the hot loop; block structure supplies x[k]
    for (std::size_t k = 0; k < K; ++k) {
        const double forcing_in = coupling * x[k];
        double* dy = out.data() + K + k * J;
        for (std::size_t jj = 0; jj < J; ++jj) {
            const std::size_t j = k * J + jj;
            const std::size_t jp1 = j + 1 == nfast ? 0 : j + 1;
            const std::size_t jp2 = jp1 + 1 == nfast ? 0 : jp1 + 1;
            const std::size_t jm1 = j == 0 ? nfast - 1 : j - 1;
            dy[jj] = -cb * y[jp1] * (y[jp2] - y[jm1]) - p.c * y[j] + forcing_in;
        }
    }
}

struct StepScratch {
    std::vector<double> k1, k2, k3, k4, tmp;
};

void euler_step_inplace(std::vector<double>& s, const DriftFn& drift, double dt, StepScratch& sc) {
    drift(s, sc.k1);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += dt * sc.k1[i];
}

void rk4_step_inplace(std::vector<double>& s, const DriftFn& drift, double dt, StepScratch& sc) {
    const std::size_t n = s.size();
    sc.tmp.resize(n);
    drift(s, sc.k1);
    for (std::size_t i = 0; i < n; ++i) sc.tmp[i] = s[i] + 0.5 * dt * sc.k1[i];
    drift(sc.tmp, sc.k2);
    for (std::size_t i = 0; i < n; ++i) sc.tmp[i] = s[i] + 0.5 * dt * sc.k2[i];
    drift(sc.tmp, sc.k3);
    for (std::size_t i = 0; i < n; ++i) sc.tmp[i] = s[i] + dt * sc.k3[i];
    drift(sc.tmp, sc.k4);
    for (std::size_t i = 0; i < n; ++i)
        s[i] += dt / 6.0 * (sc.k1[i] + 2.0 * sc.k2[i] + 2.0 * sc.k3[i] + sc.k4[i]);
}

struct RecordingGrid {
    std::size_t steps_per_record;
    std::size_t first_index;  // grid index j0 of the first recorded time
    std::size_t rows;
};

RecordingGrid resolve_grid(double dt, double record_every, double burn_in, double duration) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    if (!(record_every > 0.0)) throw std::invalid_argument("simulate: record_every must be > 0");
    if (!(burn_in >= 0.0) || !(duration > burn_in))
        throw std::invalid_argument("simulate: need duration > burn_in >= 0");
    const double ratio = record_every / dt;
    const std::size_t steps = static_cast<std::size_t>(std::llround(ratio));
    if (steps < 1 || std::abs(steps * dt - record_every) > 1e-9)
        throw std::invalid_argument("simulate: record_every must be an integer multiple of dt");
    const std::size_t j0 =
        static_cast<std::size_t>(std::ceil((burn_in - 1e-9) / record_every));
    const std::size_t rows =
        static_cast<std::size_t>(std::floor((duration - burn_in) / record_every + 1e-9));
    if (rows < 1)
        throw std::invalid_argument("simulate: recording window shorter than record_every");
    return {steps, j0, rows};
}

TimeSeries integrate_and_record(std::vector<double> state, const DriftFn& drift, double dt,
                                const RecordingGrid& grid, Scheme scheme,
                                const std::vector<std::size_t>& components,
                                const std::string& label, double record_every) {
    if (components.empty()) throw std::invalid_argument("simulate: empty component selection");
    for (std::size_t c : components)
        if (c >= state.size())
            throw std::invalid_argument("simulate: component index " + std::to_string(c) +
                                        " out of range for state size " +
                                        std::to_string(state.size()));

    const std::size_t d = components.size();
    Array values = Array::zeros({grid.rows, d});
    StepScratch sc;

    std::size_t row = 0;
    auto record_if_due = [&](std::size_t step) {
        if (step % grid.steps_per_record != 0) return;
        const std::size_t j = step / grid.steps_per_record;
        if (j < grid.first_index || row >= grid.rows) return;
        for (std::size_t c = 0; c < d; ++c) values.data[row * d + c] = state[components[c]];
        ++row;
    };

    record_if_due(0);
    const std::size_t total_steps = (grid.first_index + grid.rows - 1) * grid.steps_per_record;
    for (std::size_t step = 1; step <= total_steps; ++step) {
        if (scheme == Scheme::Euler)
            euler_step_inplace(state, drift, dt, sc);
        else
            rk4_step_inplace(state, drift, dt, sc);
        double checksum = 0.0;
        for (double v : state) checksum += v;
        if (!std::isfinite(checksum))
            throw NumericalError("simulate: non-finite state at step " + std::to_string(step) +
                                     " (t = " + std::to_string(step * dt) + ")");
        record_if_due(step);
    }
    return TimeSeries{std::move(values), record_every, label};
}

}  // namespace

std::vector<double> lorenz63_drift(const std::vector<double>& state, const Lorenz63Params& p) {
    if (state.size() != 3)
        throw std::invalid_argument("lorenz63 drift: state length " + std::to_string(state.size()) +
                                    " != 3");
    std::vector<double> out;
    lorenz63_drift_into(state, p, out);
    return out;
}

std::vector<double> lorenz96_drift(const std::vector<double>& state, const Lorenz96Params& p) {
    std::vector<double> out;
    lorenz96_drift_into(state, p, out);
    return out;
}

std::vector<double> euler_step(const std::vector<double>& state, const DriftFn& drift, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("euler step: dt must be > 0");
    std::vector<double> s = state;
    StepScratch sc;
    euler_step_inplace(s, drift, dt, sc);
    return s;
}

std::vector<double> rk4_step(const std::vector<double>& state, const DriftFn& drift, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4 step: dt must be > 0");
    std::vector<double> s = state;
    StepScratch sc;
    rk4_step_inplace(s, drift, dt, sc);
    return s;
}

TimeSeries simulate_lorenz63(const Lorenz63Params& p, Scheme scheme,
                             const std::vector<std::size_t>& components) {
    if (p.init.size() != 3)
        throw std::invalid_argument("lorenz63: init must have 3 components, got " +
                                    std::to_string(p.init.size()));
    RecordingGrid grid = resolve_grid(p.dt, p.record_every, p.burn_in, p.duration);
    DriftFn drift = [&p](const std::vector<double>& s, std::vector<double>& out) {
        lorenz63_drift_into(s, p, out);
    };
    return integrate_and_record(p.init, drift, p.dt, grid, scheme, components, "lorenz63",
                                p.record_every);
}

TimeSeries simulate_lorenz96(const Lorenz96Params& p, Scheme scheme,
                             const std::vector<std::size_t>& components) {
    const std::size_t K = p.slow_vars;
    const std::size_t J = p.fast_per_slow;
    if (K < 4)
        throw std::invalid_argument("lorenz96: K >= 4 required (the slow drift reaches k-2), got " +
                                    std::to_string(K));
    if (J < 1) throw std::invalid_argument("lorenz96: J >= 1 required");
    std::vector<double> init = p.init;
    if (init.empty()) {
        init.assign(K + K * J, 0.0);
        init[0] = 1.0;  // x1 = 1
        init[K] = 1.0;  // y1 = 1
    }
    if (init.size() != K + K * J)
        throw std::invalid_argument("lorenz96: init length " + std::to_string(init.size()) +
                                    " does not match K + K*J = " + std::to_string(K + K * J));
    RecordingGrid grid = resolve_grid(p.dt, p.record_every, p.burn_in, p.duration);
    DriftFn drift = [&p](const std::vector<double>& s, std::vector<double>& out) {
        lorenz96_drift_into(s, p, out);
    };
    return integrate_and_record(std::move(init), drift, p.dt, grid, scheme, components,
                                "lorenz96", p.record_every);
}

SimulationSpec simulation_preset(const std::string& name, double duration_override) {
    if (name == "lorenz63-paper") {
        Lorenz63Params p;
        if (duration_override > 0.0) p.duration = duration_override;
        return SimulationSpec{p, Scheme::Euler, {1}, "lorenz63-paper"};
    }
    if (name == "lorenz96-paper") {
        Lorenz96Params p;
        if (duration_override > 0.0) p.duration = duration_override;
        std::vector<std::size_t> slow(p.slow_vars);
        for (std::size_t k = 0; k < p.slow_vars; ++k) slow[k] = k;
        return SimulationSpec{p, Scheme::Rk4, slow, "lorenz96-paper"};
    }
    throw std::invalid_argument("unknown simulation preset: " + name +
                                " (known: lorenz63-paper, lorenz96-paper)");
}

TimeSeries run_simulation(const SimulationSpec& spec) {
    TimeSeries ts = std::visit(
        [&](const auto& p) -> TimeSeries {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Lorenz63Params>)
                return simulate_lorenz63(p, spec.scheme, spec.components);
            else
                return simulate_lorenz96(p, spec.scheme, spec.components);
        },
        spec.params);
    ts.origin = spec.label;
    return ts;
}

}  // namespace srf
