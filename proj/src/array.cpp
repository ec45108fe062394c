#include "m2ae/array.hpp"

#include <cmath>
#include <numeric>

#include "m2ae/errors.hpp"

namespace m2ae {

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

bool all_finite(const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i])) return false;
    }
    return true;
}

namespace {

std::size_t checked_count(const Shape& shape) {
    if (shape.empty()) throw ShapeError("array shape must have rank >= 1");
    std::size_t count = 1;
    for (std::size_t extent : shape) {
        if (extent == 0) {
            throw ShapeError("array extents must be positive, got " + shape_to_string(shape));
        }
        count *= extent;
    }
    return count;
}

}  // namespace

Array::Array(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    std::size_t count = checked_count(shape_);
    if (count != data_.size()) {
        throw ShapeError("array data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
    }
    if (!all_finite(data_.data(), data_.size())) {
        throw NumericError("array rejects non-finite entries");
    }
}

Array Array::zeros(Shape shape) {
    std::size_t count = checked_count(shape);
    Array out;
    out.shape_ = std::move(shape);
    out.data_.assign(count, 0.0);
    return out;
}

Array Array::full(Shape shape, double value) {
    std::size_t count = checked_count(shape);
    return Array(std::move(shape), std::vector<double>(count, value));
}

Array Array::scalar(double value) { return Array({1, 1}, {value}); }

std::size_t Array::rows() const {
    if (rank() != 2) throw ShapeError("rows() requires rank 2, got " + shape_to_string(shape_));
    return shape_[0];
}

std::size_t Array::cols() const {
    if (rank() != 2) throw ShapeError("cols() requires rank 2, got " + shape_to_string(shape_));
    return shape_[1];
}

double Array::at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
}

double& Array::at(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
}

double Array::item() const {
    if (size() != 1) throw ShapeError("item() requires a single-entry array, got " + shape_to_string(shape_));
    return data_[0];
}

}  // namespace m2ae
