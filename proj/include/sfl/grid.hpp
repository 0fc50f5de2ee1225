#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sfl/error.hpp"

namespace sfl {

// Integer offset in grid steps along each axis; unused axes are zero.
using LatticeVector = std::array<int, 3>;

// Uniform Cartesian grid on [-L, L]^N with the origin as a node.
// The outermost layer of nodes is the Dirichlet boundary.
class Grid {
public:
    Grid(int dim, double half_width, double spacing, int nodes_per_axis)
        : dim_(dim), half_width_(half_width), spacing_(spacing), n_(nodes_per_axis) {
        if (dim < 1 || dim > 3) {
            throw InvalidSpec("grid dimension must be 1, 2 or 3");
        }
        if (n_ < 3 || n_ % 2 == 0) {
            throw InvalidSpec("grid needs an odd node count >= 3 per axis");
        }
        size_ = 1;
        for (int a = 0; a < dim_; ++a) {
            size_ *= static_cast<std::size_t>(n_);
        }
        std::size_t s = 1;
        for (int a = dim_ - 1; a >= 0; --a) {
            strides_[a] = s;
            s *= static_cast<std::size_t>(n_);
        }
        weight_ = std::pow(spacing_, dim_);
        boundary_.assign(size_, 0);
        for (std::size_t idx = 0; idx < size_; ++idx) {
            for (int a = 0; a < dim_; ++a) {
                const int i = axis_index(idx, a);
                if (i == 0 || i == n_ - 1) {
                    boundary_[idx] = 1;
                    break;
                }
            }
        }
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] double half_width() const { return half_width_; }
    [[nodiscard]] double spacing() const { return spacing_; }
    [[nodiscard]] int nodes_per_axis() const { return n_; }
    [[nodiscard]] std::size_t size() const { return size_; }
    // Quadrature weight h^N carried by every interior node.
    [[nodiscard]] double weight() const { return weight_; }
    // Flat index of the node at the origin.
    [[nodiscard]] std::size_t center_index() const {
        const int c = n_ / 2;
        return flat_index({c, c, c});
    }
    [[nodiscard]] std::size_t stride(int axis) const { return strides_[axis]; }

    [[nodiscard]] int axis_index(std::size_t flat, int axis) const {
        return static_cast<int>((flat / strides_[axis]) % static_cast<std::size_t>(n_));
    }

    [[nodiscard]] std::size_t flat_index(const std::array<int, 3>& idx) const {
        std::size_t f = 0;
        for (int a = 0; a < dim_; ++a) {
            f += static_cast<std::size_t>(idx[a]) * strides_[a];
        }
        return f;
    }

    [[nodiscard]] std::array<int, 3> multi_index(std::size_t flat) const {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = 0; a < dim_; ++a) {
            idx[a] = axis_index(flat, a);
        }
        return idx;
    }

    [[nodiscard]] double coordinate(int i) const { return -half_width_ + spacing_ * i; }

    [[nodiscard]] std::array<double, 3> position(std::size_t flat) const {
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int a = 0; a < dim_; ++a) {
            x[a] = coordinate(axis_index(flat, a));
        }
        return x;
    }

    [[nodiscard]] double radius(std::size_t flat) const {
        const auto x = position(flat);
        return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    }

    [[nodiscard]] bool is_boundary(std::size_t flat) const { return boundary_[flat] != 0; }

    [[nodiscard]] bool same_shape(const Grid& other) const {
        return dim_ == other.dim_ && n_ == other.n_ && spacing_ == other.spacing_;
    }

private:
    int dim_;
    double half_width_;
    double spacing_;
    int n_;
    std::size_t size_ = 0;
    std::array<std::size_t, 3> strides_{0, 0, 0};
    double weight_ = 0.0;
    std::vector<std::uint8_t> boundary_;
};

using GridPtr = std::shared_ptr<const Grid>;

// Real field sampled on a grid. Boundary values are kept at zero by every
// operation that produces a GridFunction.
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), 0.0) {}
    GridFunction(GridPtr grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_->size()) {
            throw Error("grid function size does not match its grid");
        }
    }

    [[nodiscard]] const Grid& grid() const { return *grid_; }
    [[nodiscard]] const GridPtr& grid_ptr() const { return grid_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] std::span<double> values() { return values_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    void zero_boundary() {
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (grid_->is_boundary(i)) {
                values_[i] = 0.0;
            }
        }
    }

    GridFunction& operator+=(const GridFunction& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        check_same(o);
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    GridFunction& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(GridFunction a, double s) { return a *= s; }
    friend GridFunction operator*(double s, GridFunction a) { return a *= s; }
    friend GridFunction operator-(GridFunction a) { return a *= -1.0; }

    void check_same(const GridFunction& o) const {
        if (grid_ != o.grid_ && !grid_->same_shape(*o.grid_)) {
            throw Error("grid functions live on different grids");
        }
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

// a*x + b*y, elementwise.
inline GridFunction combine(double a, const GridFunction& x, double b, const GridFunction& y) {
    x.check_same(y);
    GridFunction out(x.grid_ptr());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = a * x[i] + b * y[i];
    }
    return out;
}

// |x|^p with multiplication fast paths for the common integer exponents.
inline double abs_pow(double x, double p) {
    const double a = std::abs(x);
    if (p == 4.0) {
        const double s = a * a;
        return s * s;
    }
    if (p == 2.0) return a * a;
    if (p == 3.0) return a * a * a;
    if (p == 6.0) {
        const double s = a * a * a;
        return s * s;
    }
    return std::pow(a, p);
}

}  // namespace sfl
