#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace srf {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense row-major array of 64-bit floats. Rank 0 (empty shape) is a scalar
// holding exactly one element.
struct Array {
    Shape shape;
    std::vector<double> data;

    Array() = default;
    Array(Shape s, std::vector<double> d);

    static Array scalar(double v);
    static Array zeros(const Shape& s);
    static Array full(const Shape& s, double v);
    static Array vector(std::vector<double> v);
    static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;

    bool all_finite() const;
    bool same_shape(const Array& other) const { return shape == other.shape; }
};

}  // namespace srf
