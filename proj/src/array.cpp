#include "srf/array.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace srf {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << " ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

Array::Array(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size()) {
        throw std::invalid_argument("Array: shape " + shape_str(shape) + " expects " +
                                    std::to_string(shape_numel(shape)) + " elements, got " +
                                    std::to_string(data.size()));
    }
}

Array Array::scalar(double v) { return Array(Shape{}, {v}); }

Array Array::zeros(const Shape& s) { return Array(s, std::vector<double>(shape_numel(s), 0.0)); }

Array Array::full(const Shape& s, double v) {
    return Array(s, std::vector<double>(shape_numel(s), v));
}

Array Array::vector(std::vector<double> v) {
    Shape s{v.size()};
    return Array(std::move(s), std::move(v));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Array(Shape{rows, cols}, std::move(v));
}

std::size_t Array::rows() const {
    if (rank() != 2) throw std::logic_error("Array::rows: rank " + std::to_string(rank()) + " != 2");
    return shape[0];
}

std::size_t Array::cols() const {
    if (rank() != 2) throw std::logic_error("Array::cols: rank " + std::to_string(rank()) + " != 2");
    return shape[1];
}

double& Array::at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }

double Array::at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

bool Array::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace srf
