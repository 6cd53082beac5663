#include "srf/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace srf {

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void validate_timeseries(const TimeSeries& ts) {
    if (ts.values.rank() != 2)
        throw std::invalid_argument("time series: values must be (T, d), got " +
                                    shape_str(ts.values.shape));
    if (ts.length() < 1) throw std::invalid_argument("time series: empty (T = 0)");
    if (!ts.values.all_finite())
        throw std::invalid_argument("time series: non-finite values present");
}

void write_timeseries(const std::string& path, const TimeSeries& ts) {
    validate_timeseries(ts);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    std::string origin = ts.origin.empty() ? "unknown" : ts.origin;
    for (char& c : origin)
        if (std::isspace(static_cast<unsigned char>(c))) c = '_';
    out << ts.dim() << " " << format_double(ts.dt_record) << " " << origin << "\n";
    const std::size_t d = ts.dim();
    for (std::size_t t = 0; t < ts.length(); ++t) {
        const double* r = ts.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            if (j) out << " ";
            out << format_double(r[j]);
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

TimeSeries read_timeseries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open time series file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("empty time series file: " + path);
    std::istringstream hs(header);
    std::size_t d = 0;
    double dt = 0.0;
    std::string origin;
    if (!(hs >> d >> dt >> origin) || d == 0)
        throw std::runtime_error("bad time series header in " + path + ": \"" + header + "\"");

    std::vector<double> data;
    double v;
    while (in >> v) data.push_back(v);
    if (data.empty() || data.size() % d != 0)
        throw std::runtime_error("time series body in " + path + " has " +
                                 std::to_string(data.size()) + " values, not a multiple of d = " +
                                 std::to_string(d));
    const std::size_t rows = data.size() / d;
    TimeSeries ts{Array({rows, d}, std::move(data)), dt, origin};
    validate_timeseries(ts);
    return ts;
}

std::array<TimeSeries, 3> split_series(const TimeSeries& ts,
                                       const std::array<double, 3>& fractions,
                                       std::size_t min_rows) {
    validate_timeseries(ts);
    double total = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw std::invalid_argument("split: fractions must be positive");
        total += f;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions sum to " + std::to_string(total) +
                                    ", expected 1");

    const std::size_t T = ts.length();
    const std::size_t b1 = static_cast<std::size_t>(std::floor(T * fractions[0]));
    const std::size_t b2 = static_cast<std::size_t>(std::floor(T * (fractions[0] + fractions[1])));
    const std::array<std::pair<std::size_t, std::size_t>, 3> ranges{
        std::pair{std::size_t{0}, b1}, std::pair{b1, b2}, std::pair{b2, T}};
    static const char* names[3] = {"train", "val", "test"};

    std::array<TimeSeries, 3> out;
    const std::size_t d = ts.dim();
    for (std::size_t s = 0; s < 3; ++s) {
        const auto [lo, hi] = ranges[s];
        const std::size_t n = hi - lo;
        if (n < min_rows)
            throw std::invalid_argument(std::string("split: ") + names[s] + " segment has " +
                                        std::to_string(n) + " rows, need at least " +
                                        std::to_string(min_rows));
        std::vector<double> seg(ts.values.data.begin() + lo * d, ts.values.data.begin() + hi * d);
        out[s] = TimeSeries{Array({n, d}, std::move(seg)), ts.dt_record, ts.origin};
    }
    return out;
}

WindowedDataset build_windows(const TimeSeries& ts, std::size_t k, std::size_t l) {
    validate_timeseries(ts);
    if (k < 1 || l < 1) throw std::invalid_argument("windows: need k >= 1 and l >= 1");
    const std::size_t T = ts.length();
    if (T < k + l)
        throw std::invalid_argument("windows: series length " + std::to_string(T) +
                                    " is below the minimum k + l = " + std::to_string(k + l));
    const std::size_t N = T - l - k + 1;
    const std::size_t d = ts.dim();

    WindowedDataset ds;
    ds.window_len = k;
    ds.lead = l;
    ds.windows = Array::zeros({N, k, d});
    ds.targets = Array::zeros({N, d});
    ds.index_map.resize(N);
    for (std::size_t t = 0; t < N; ++t) {
        const std::size_t last = k - 1 + t;  // window covers rows [t, last]
        ds.index_map[t] = last;
        std::copy(ts.values.data.begin() + t * d, ts.values.data.begin() + (last + 1) * d,
                  ds.windows.data.begin() + t * k * d);
        std::copy(ts.values.data.begin() + (last + l) * d,
                  ts.values.data.begin() + (last + l + 1) * d, ds.targets.data.begin() + t * d);
    }
    return ds;
}

Normalizer fit_normalizer(const TimeSeries& train) {
    validate_timeseries(train);
    const std::size_t T = train.length();
    const std::size_t d = train.dim();
    Array mean = Array::zeros({d});
    Array std_ = Array::zeros({d});
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) mean.data[j] += train.values.data[t * d + j];
    for (std::size_t j = 0; j < d; ++j) mean.data[j] /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = train.values.data[t * d + j] - mean.data[j];
            std_.data[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j) {
        std_.data[j] = std::sqrt(std_.data[j] / static_cast<double>(T));
        if (!(std_.data[j] > 0.0))
            throw std::invalid_argument("normalizer: component " + std::to_string(j) +
                                        " has zero variance on the training split");
    }
    return Normalizer{std::move(mean), std::move(std_)};
}

namespace {

Array componentwise(const Array& values, const Array& mean, const Array& std_, bool forward) {
    const std::size_t d = mean.shape[0];
    if (values.rank() < 1 || values.shape.back() != d)
        throw std::invalid_argument("normalizer: last axis of " + shape_str(values.shape) +
                                    " does not match dimension " + std::to_string(d));
    Array out = values;
    const std::size_t n = values.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i % d;
        out.data[i] = forward ? (values.data[i] - mean.data[j]) / std_.data[j]
                              : values.data[i] * std_.data[j] + mean.data[j];
    }
    return out;
}

}  // namespace

Array Normalizer::apply(const Array& values) const { return componentwise(values, mean, std, true); }

Array Normalizer::invert(const Array& values) const {
    return componentwise(values, mean, std, false);
}

TimeSeries Normalizer::apply(const TimeSeries& ts) const {
    return TimeSeries{apply(ts.values), ts.dt_record, ts.origin};
}

}  // namespace srf
