#include "dmps/tensor.hpp"

#include <algorithm>
#include <string>

namespace dmps {

namespace {
std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}
}  // namespace

Tensor::Tensor(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw DimensionError("negative tensor shape");
}

Tensor Tensor::scalar(double v) {
    Tensor t(1, 1);
    t[0] = v;
    return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor t(static_cast<int>(rows.size()), rows.size() ? static_cast<int>(rows.begin()->size()) : 0);
    int i = 0;
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != t.cols_)
            throw DimensionError("ragged initializer for Tensor");
        int j = 0;
        for (double x : r) t.at(i, j++) = x;
        ++i;
    }
    return t;
}

double Tensor::item() const {
    if (rows_ != 1 || cols_ != 1)
        throw DimensionError("item() on non-scalar tensor " + shape_str(*this));
    return v_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul shape mismatch: " + shape_str(a) + " * " + shape_str(b));
    Tensor c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        double* ci = c.data() + static_cast<size_t>(i) * c.cols();
        const double* ai = a.data() + static_cast<size_t>(i) * a.cols();
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            const double* bk = b.data() + static_cast<size_t>(k) * b.cols();
            for (int j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    Tensor t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("add shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    Tensor c = a;
    for (int i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Tensor subtract(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("subtract shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
    Tensor c = a;
    for (int i = 0; i < c.size(); ++i) c[i] -= b[i];
    return c;
}

Tensor scale(const Tensor& a, double c) {
    Tensor t = a;
    for (int i = 0; i < t.size(); ++i) t[i] *= c;
    return t;
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw DimensionError("max_abs_diff shape mismatch");
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Tensor permute_rows(const Tensor& x, std::span<const int> perm) {
    if (static_cast<int>(perm.size()) != x.rows())
        throw DimensionError("permutation length does not match row count");
    Tensor out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(perm[i], j);
    return out;
}

Tensor permute_conjugate(const Tensor& x, std::span<const int> perm) {
    if (x.rows() != x.cols() || static_cast<int>(perm.size()) != x.rows())
        throw DimensionError("conjugation needs a square matrix and a matching permutation");
    Tensor out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) out.at(i, j) = x.at(perm[i], perm[j]);
    return out;
}

}  // namespace dmps
