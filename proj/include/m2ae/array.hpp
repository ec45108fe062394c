#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace m2ae {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

// Dense row-major array of 64-bit floats. Extents are positive and every
// entry is finite; NaN/Inf are rejected at construction so numeric trouble
// surfaces at the operation that produced it, not three modules later.
class Array {
public:
    Array() = default;  // empty placeholder, size() == 0

    Array(Shape shape, std::vector<double> data);

    static Array zeros(Shape shape);
    static Array full(Shape shape, double value);
    static Array scalar(double value);  // shape {1, 1}

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // Rank-2 accessors.
    std::size_t rows() const;
    std::size_t cols() const;
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    double item() const;  // requires size() == 1

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    bool same_shape(const Array& other) const { return shape_ == other.shape_; }
    bool operator==(const Array& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

bool all_finite(const double* data, std::size_t n);

}  // namespace m2ae
