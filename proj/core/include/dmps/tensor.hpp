#pragma once

#include <cmath>
#include <initializer_list>
#include <span>
#include <vector>

#include "dmps/errors.hpp"

namespace dmps {

// Dense 2-D array of 64-bit reals, row-major. Row/column vectors and scalars
// are 1xN, Nx1 and 1x1 tensors.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols, double fill = 0.0);
    static Tensor scalar(double v);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool empty() const { return size() == 0; }

    double& at(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
    double at(int i, int j) const { return v_[static_cast<size_t>(i) * cols_ + j]; }
    double& operator[](int flat) { return v_[flat]; }
    double operator[](int flat) const { return v_[flat]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::span<const double> row(int i) const {
        return {v_.data() + static_cast<size_t>(i) * cols_, static_cast<size_t>(cols_)};
    }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    void fill(double v) { for (auto& x : v_) x = v; }
    void zero() { fill(0.0); }

    // Scalar extraction; the caller promises a 1x1 tensor.
    double item() const;

    bool all_finite() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

// Plain (untracked) arithmetic used by the diffusion machinery, oracles and
// exports. The differentiable counterparts live on the computation record.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

// Applies the row permutation perm (output row i = input row perm[i]).
Tensor permute_rows(const Tensor& x, std::span<const int> perm);
// P x Pt conjugation for square matrices: out(i,j) = in(perm[i], perm[j]).
Tensor permute_conjugate(const Tensor& x, std::span<const int> perm);

}  // namespace dmps
