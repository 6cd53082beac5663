#include "srf/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace srf {

namespace {

void check_widths(const std::vector<std::size_t>& widths) {
    if (widths.size() < 3)
        throw std::invalid_argument("mlp: need at least one hidden layer, got " +
                                    std::to_string(widths.size()) + " widths");
    for (std::size_t w : widths)
        if (w == 0) throw std::invalid_argument("mlp: zero layer width");
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Mlp Mlp::create(const std::vector<std::size_t>& widths, std::uint64_t seed, double leaky_slope) {
    check_widths(widths);
    Mlp net;
    net.widths = widths;
    net.leaky_slope = leaky_slope;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const std::size_t fan_in = widths[i], fan_out = widths[i + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Array w = Array::zeros({fan_in, fan_out});
        for (double& v : w.data) v = dist(rng);
        net.weights.emplace_back(std::move(w), true);
        net.biases.emplace_back(Array::zeros({fan_out}), true);
    }
    return net;
}

Mlp Mlp::zeros(const std::vector<std::size_t>& widths, double leaky_slope) {
    check_widths(widths);
    Mlp net;
    net.widths = widths;
    net.leaky_slope = leaky_slope;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        net.weights.emplace_back(Array::zeros({widths[i], widths[i + 1]}), true);
        net.biases.emplace_back(Array::zeros({widths[i + 1]}), true);
    }
    return net;
}

Var Mlp::forward(const Var& rows) const {
    if (rows.value().rank() != 2 || rows.value().shape[1] != widths.front())
        throw std::invalid_argument("mlp forward: input " + shape_str(rows.value().shape) +
                                    " does not match expected (n, " +
                                    std::to_string(widths.front()) + ")");
    Var h = rows;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        h = add(matmul(h, weights[i]), biases[i]);
        if (i + 1 < weights.size()) h = leaky_relu(h, leaky_slope);
    }
    return h;
}

Var Mlp::forward(const Array& rows) const { return forward(Var(rows, false)); }

std::vector<Var> Mlp::parameters() const {
    std::vector<Var> out;
    out.reserve(weights.size() * 2);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.push_back(weights[i]);
        out.push_back(biases[i]);
    }
    return out;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) n += (widths[i] + 1) * widths[i + 1];
    return n;
}

void Mlp::zero_grad() const {
    for (const Var& p : parameters()) const_cast<Var&>(p).zero_grad();
}

Mlp Mlp::clone() const {
    Mlp out;
    out.widths = widths;
    out.leaky_slope = leaky_slope;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        out.weights.emplace_back(weights[i].value(), true);
        out.biases.emplace_back(biases[i].value(), true);
    }
    return out;
}

std::vector<double> Mlp::flat_parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Var& p : parameters())
        flat.insert(flat.end(), p.value().data.begin(), p.value().data.end());
    return flat;
}

void Mlp::set_flat_parameters(const std::vector<double>& flat) {
    if (flat.size() != parameter_count())
        throw std::invalid_argument("mlp: flat parameter list has " + std::to_string(flat.size()) +
                                    " values, expected " + std::to_string(parameter_count()));
    std::size_t pos = 0;
    for (Var p : parameters()) {
        auto& data = p.mutable_data();
        std::copy(flat.begin() + pos, flat.begin() + pos + data.size(), data.begin());
        pos += data.size();
    }
}

GeneratorModel make_generator(std::size_t window_len, std::size_t dim, std::size_t latent_dim,
                              const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    if (window_len < 1 || dim < 1) throw std::invalid_argument("generator: need k >= 1 and d >= 1");
    if (hidden.empty()) throw std::invalid_argument("generator: need at least one hidden layer");
    std::vector<std::size_t> widths;
    widths.push_back(window_len * dim + latent_dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(dim);
    return GeneratorModel{Mlp::create(widths, seed), latent_dim, window_len, dim};
}

DiscriminatorModel make_discriminator(std::size_t window_len, std::size_t dim,
                                      const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    if (window_len < 1 || dim < 1)
        throw std::invalid_argument("discriminator: need k >= 1 and d >= 1");
    if (hidden.empty()) throw std::invalid_argument("discriminator: need at least one hidden layer");
    std::vector<std::size_t> widths;
    widths.push_back(window_len * dim + dim);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    return DiscriminatorModel{Mlp::create(widths, seed), window_len, dim};
}

Array LatentSampler::draw(std::size_t m) {
    Array z = Array::zeros({m, latent_dim});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : z.data) v = normal(rng);
    return z;
}

namespace {

void check_window(const Array& window, std::size_t k, std::size_t d, const char* who) {
    const bool ok_2d = window.rank() == 2 && window.shape[0] == k && window.shape[1] == d;
    const bool ok_flat = window.rank() == 1 && window.shape[0] == k * d;
    if (!ok_2d && !ok_flat)
        throw std::invalid_argument(std::string(who) + ": window " + shape_str(window.shape) +
                                    " does not match (k, d) = (" + std::to_string(k) + ", " +
                                    std::to_string(d) + ")");
}

// (m, k*d + latent) rows: the flattened window repeated, latents appended.
Array stack_window_and_latents(const Array& window, const Array& zs, std::size_t kd) {
    const std::size_t m = zs.shape[0];
    const std::size_t zdim = zs.shape[1];
    Array rows = Array::zeros({m, kd + zdim});
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(window.data.begin(), window.data.end(), rows.data.begin() + i * (kd + zdim));
        std::copy(zs.data.begin() + i * zdim, zs.data.begin() + (i + 1) * zdim,
                  rows.data.begin() + i * (kd + zdim) + kd);
    }
    return rows;
}

}  // namespace

Var generator_forward(const GeneratorModel& gen, const Array& window, const Array& z) {
    check_window(window, gen.window_len, gen.dim, "generator");
    if (z.numel() != gen.latent_dim)
        throw std::invalid_argument("generator: latent " + shape_str(z.shape) +
                                    " does not match latent_dim = " + std::to_string(gen.latent_dim));
    Array zs({1, gen.latent_dim}, z.data);
    Array rows = stack_window_and_latents(window, zs, gen.window_len * gen.dim);
    return reshape(gen.net.forward(rows), {gen.dim});
}

Var generator_forward_batch(const GeneratorModel& gen, const Array& window, const Array& zs) {
    check_window(window, gen.window_len, gen.dim, "generator");
    if (zs.rank() != 2 || zs.shape[1] != gen.latent_dim)
        throw std::invalid_argument("generator: latent batch " + shape_str(zs.shape) +
                                    " does not match latent_dim = " + std::to_string(gen.latent_dim));
    Array rows = stack_window_and_latents(window, zs, gen.window_len * gen.dim);
    return gen.net.forward(rows);
}

ForecastEnsemble sample_ensemble(const GeneratorModel& gen, const Array& window, std::size_t m,
                                 LatentSampler& sampler) {
    if (m < 1) throw std::invalid_argument("sample_ensemble: m >= 1 required");
    if (sampler.latent_dim != gen.latent_dim)
        throw std::invalid_argument("sample_ensemble: sampler latent_dim " +
                                    std::to_string(sampler.latent_dim) + " != model latent_dim " +
                                    std::to_string(gen.latent_dim));
    return ForecastEnsemble{generator_forward_batch(gen, window, sampler.draw(m))};
}

namespace {

constexpr double kLogisticClamp = 1e-7;

Var logistic_clamped(const Var& logits) {
    // 1 / (1 + exp(-x)), held 1e-7 away from {0, 1}
    Var denom = add(exp_op(scale(logits, -1.0)), Var(Array::scalar(1.0), false));
    return clamp(pow_op(denom, -1.0), kLogisticClamp, 1.0 - kLogisticClamp);
}

}  // namespace

Var discriminator_forward(const DiscriminatorModel& disc, const Array& window,
                          const Var& candidate) {
    check_window(window, disc.window_len, disc.dim, "discriminator");
    if (candidate.value().numel() != disc.dim)
        throw std::invalid_argument("discriminator: candidate " +
                                    shape_str(candidate.value().shape) + " does not match d = " +
                                    std::to_string(disc.dim));
    Array wrow({1, disc.window_len * disc.dim}, window.data);
    Var input = concat({Var(wrow, false), reshape(candidate, {1, disc.dim})}, 1);
    return reshape(logistic_clamped(disc.net.forward(input)), {});
}

Var discriminator_forward_batch(const DiscriminatorModel& disc, const Array& windows_flat,
                                const Var& candidates) {
    const std::size_t kd = disc.window_len * disc.dim;
    if (windows_flat.rank() != 2 || windows_flat.shape[1] != kd)
        throw std::invalid_argument("discriminator: windows " + shape_str(windows_flat.shape) +
                                    " do not match (B, k*d = " + std::to_string(kd) + ")");
    if (candidates.value().rank() != 2 || candidates.value().shape[0] != windows_flat.shape[0] ||
        candidates.value().shape[1] != disc.dim)
        throw std::invalid_argument("discriminator: candidates " +
                                    shape_str(candidates.value().shape) + " do not match windows " +
                                    shape_str(windows_flat.shape));
    Var input = concat({Var(windows_flat, false), candidates}, 1);
    const std::size_t batch = windows_flat.shape[0];
    return reshape(logistic_clamped(disc.net.forward(input)), {batch});
}

// --- Checkpoints -----------------------------------------------------------

namespace {

void write_mlp(std::ofstream& out, const Mlp& net) {
    out << "widths";
    for (std::size_t w : net.widths) out << " " << w;
    out << "\n";
    out << "activation leaky_relu " << format_double(net.leaky_slope) << "\n";
    const auto flat = net.flat_parameters();
    out << "params " << flat.size() << "\n";
    for (std::size_t i = 0; i < flat.size(); ++i) {
        out << format_double(flat[i]);
        out << ((i + 1) % 8 == 0 || i + 1 == flat.size() ? "\n" : " ");
    }
}

struct MlpHeader {
    std::vector<std::size_t> widths;
    double slope = 0.01;
    std::vector<double> flat;
};

std::string expect_line(std::ifstream& in, const std::string& path) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) return line;
    }
    throw std::runtime_error("checkpoint truncated: " + path);
}

MlpHeader read_mlp(std::ifstream& in, const std::string& path) {
    MlpHeader h;
    std::istringstream ws(expect_line(in, path));
    std::string tag;
    ws >> tag;
    if (tag != "widths") throw std::runtime_error("checkpoint: expected widths in " + path);
    std::size_t w;
    while (ws >> w) h.widths.push_back(w);

    std::istringstream as(expect_line(in, path));
    std::string act;
    as >> tag >> act >> h.slope;
    if (tag != "activation")
        throw std::runtime_error("checkpoint: expected activation in " + path);
    if (act != "leaky_relu")
        throw std::runtime_error("checkpoint: unsupported activation \"" + act + "\" in " + path);

    std::istringstream ps(expect_line(in, path));
    std::size_t count = 0;
    ps >> tag >> count;
    if (tag != "params") throw std::runtime_error("checkpoint: expected params in " + path);
    h.flat.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        if (!(in >> h.flat[i]))
            throw std::runtime_error("checkpoint: parameter list truncated in " + path);
    return h;
}

Mlp build_mlp(const MlpHeader& h) {
    Mlp net = Mlp::zeros(h.widths, h.slope);
    net.set_flat_parameters(h.flat);
    return net;
}

}  // namespace

void save_generator_checkpoint(const std::string& path, const GeneratorModel& gen,
                               const std::optional<Normalizer>& normalizer) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "srf-checkpoint v1 generator\n";
    out << "window " << gen.window_len << " " << gen.dim << "\n";
    out << "latent_dim " << gen.latent_dim << "\n";
    out << "normalize " << (normalizer ? 1 : 0) << "\n";
    if (normalizer) {
        out << "norm_mean";
        for (double v : normalizer->mean.data) out << " " << format_double(v);
        out << "\nnorm_std";
        for (double v : normalizer->std.data) out << " " << format_double(v);
        out << "\n";
    }
    write_mlp(out, gen.net);
    if (!out) throw std::runtime_error("write failed: " + path);
}

GeneratorCheckpoint load_generator_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic = expect_line(in, path);
    if (magic != "srf-checkpoint v1 generator")
        throw std::runtime_error("not a generator checkpoint: " + path);

    std::string tag;
    std::size_t k = 0, d = 0, latent = 0;
    int has_norm = 0;
    {
        std::istringstream ls(expect_line(in, path));
        ls >> tag >> k >> d;
        if (tag != "window") throw std::runtime_error("checkpoint: expected window in " + path);
    }
    {
        std::istringstream ls(expect_line(in, path));
        ls >> tag >> latent;
        if (tag != "latent_dim")
            throw std::runtime_error("checkpoint: expected latent_dim in " + path);
    }
    {
        std::istringstream ls(expect_line(in, path));
        ls >> tag >> has_norm;
        if (tag != "normalize")
            throw std::runtime_error("checkpoint: expected normalize in " + path);
    }
    std::optional<Normalizer> norm;
    if (has_norm) {
        std::vector<double> mean, std_;
        {
            std::istringstream ls(expect_line(in, path));
            ls >> tag;
            double v;
            while (ls >> v) mean.push_back(v);
            if (tag != "norm_mean" || mean.size() != d)
                throw std::runtime_error("checkpoint: bad norm_mean in " + path);
        }
        {
            std::istringstream ls(expect_line(in, path));
            ls >> tag;
            double v;
            while (ls >> v) std_.push_back(v);
            if (tag != "norm_std" || std_.size() != d)
                throw std::runtime_error("checkpoint: bad norm_std in " + path);
        }
        norm = Normalizer{Array::vector(std::move(mean)), Array::vector(std::move(std_))};
    }
    MlpHeader h = read_mlp(in, path);
    if (h.widths.front() != k * d + latent || h.widths.back() != d)
        throw std::runtime_error("checkpoint: widths do not match window/latent metadata in " +
                                 path);
    return GeneratorCheckpoint{GeneratorModel{build_mlp(h), latent, k, d}, std::move(norm)};
}

void save_discriminator_checkpoint(const std::string& path, const DiscriminatorModel& disc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "srf-checkpoint v1 discriminator\n";
    out << "window " << disc.window_len << " " << disc.dim << "\n";
    write_mlp(out, disc.net);
    if (!out) throw std::runtime_error("write failed: " + path);
}

DiscriminatorModel load_discriminator_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic = expect_line(in, path);
    if (magic != "srf-checkpoint v1 discriminator")
        throw std::runtime_error("not a discriminator checkpoint: " + path);
    std::string tag;
    std::size_t k = 0, d = 0;
    std::istringstream ls(expect_line(in, path));
    ls >> tag >> k >> d;
    if (tag != "window") throw std::runtime_error("checkpoint: expected window in " + path);
    MlpHeader h = read_mlp(in, path);
    if (h.widths.front() != k * d + d || h.widths.back() != 1)
        throw std::runtime_error("checkpoint: widths do not match window metadata in " + path);
    return DiscriminatorModel{build_mlp(h), k, d};
}

}  // namespace srf
