#pragma once

#include <array>
#include <string>
#include <vector>

#include "srf/array.hpp"

namespace srf {

// A recorded realization: T rows of d components at a fixed record step.
struct TimeSeries {
    Array values;  // (T, d)
    double dt_record = 0.0;
    std::string origin;

    std::size_t length() const { return values.shape[0]; }
    std::size_t dim() const { return values.shape[1]; }
    const double* row(std::size_t t) const { return values.data.data() + t * dim(); }
};

void validate_timeseries(const TimeSeries& ts);

// File format: header line "d dt_record origin", then T whitespace-separated
// rows of d decimals. 17 significant digits make the round trip lossless.
void write_timeseries(const std::string& path, const TimeSeries& ts);
TimeSeries read_timeseries(const std::string& path);

// Chronological split at floor(T * cumulative fraction) boundaries. Every
// segment must have at least min_rows rows (pass k + l to guarantee each
// split can form a pair).
std::array<TimeSeries, 3> split_series(const TimeSeries& ts,
                                       const std::array<double, 3>& fractions,
                                       std::size_t min_rows = 1);

// Supervised pairs (window of k rows ending at source index i, target at
// i + l). N = T - l - k + 1.
struct WindowedDataset {
    Array windows;                      // (N, k, d)
    Array targets;                      // (N, d)
    std::vector<std::size_t> index_map; // source index of each window's last row
    std::size_t window_len = 0;         // k
    std::size_t lead = 0;               // l

    std::size_t size() const { return targets.shape[0]; }
    std::size_t dim() const { return targets.shape[1]; }
    const double* window_flat(std::size_t t) const {
        return windows.data.data() + t * window_len * dim();
    }
    const double* target_row(std::size_t t) const { return targets.data.data() + t * dim(); }
};

WindowedDataset build_windows(const TimeSeries& ts, std::size_t k, std::size_t l);

// Per-component standardization fitted on the training split only.
// Population (1/N) standard deviation convention.
struct Normalizer {
    Array mean;  // (d)
    Array std;   // (d), strictly positive

    std::size_t dim() const { return mean.shape[0]; }
    Array apply(const Array& values) const;   // any (..., d) layout
    Array invert(const Array& values) const;
    TimeSeries apply(const TimeSeries& ts) const;
};

Normalizer fit_normalizer(const TimeSeries& train);

}  // namespace srf
