#pragma once

#include <stdexcept>

namespace srf {

// Invalid or inconsistent user configuration; the CLI exits 2.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A loss, gradient, or trajectory turned non-finite; the CLI exits 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace srf
