#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "natlab/errors.hpp"

namespace natlab {

// Ambient coordinates of H^m live in R^(m+1); dimensions up to H^7 fit.
inline constexpr int kMaxAmbient = 8;

/// Fixed-capacity stack vector with runtime size. All hot loops run on
/// these; no heap traffic.
class Vec {
  public:
    Vec() = default;
    explicit Vec(int n) : n_(n) {
        assert(n >= 0 && n <= kMaxAmbient);
        c_.fill(0.0);
    }

    static Vec basis(int n, int i) {
        Vec v(n);
        v[i] = 1.0;
        return v;
    }

    int size() const { return n_; }
    double operator[](int i) const { return c_[static_cast<size_t>(i)]; }
    double& operator[](int i) { return c_[static_cast<size_t>(i)]; }
    const double* data() const { return c_.data(); }
    double* data() { return c_.data(); }

    Vec& operator+=(const Vec& o) {
        assert(n_ == o.n_);
        for (int i = 0; i < n_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        assert(n_ == o.n_);
        for (int i = 0; i < n_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < n_; ++i) c_[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }

  private:
    std::array<double, kMaxAmbient> c_{};
    int n_ = 0;
};

/// Minkowski pairing -u0 v0 + sum_{i>=1} ui vi.
inline double minkowski_form(const Vec& u, const Vec& v) {
    if (u.size() != v.size())
        throw InputError("minkowski_form: dimension mismatch (" +
                         std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
    double s = -u[0] * v[0];
    for (int i = 1; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

inline double euclidean_dot(const Vec& u, const Vec& v) {
    assert(u.size() == v.size());
    double s = 0.0;
    for (int i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

inline double euclidean_norm(const Vec& u) { return std::sqrt(euclidean_dot(u, u)); }

inline double max_abs(const Vec& u) {
    double m = 0.0;
    for (int i = 0; i < u.size(); ++i) m = std::max(m, std::abs(u[i]));
    return m;
}

/// Square matrix with fixed capacity, row-major.
class Mat {
  public:
    Mat() = default;
    explicit Mat(int n) : n_(n) { c_.fill(0.0); }

    static Mat identity(int n) {
        Mat m(n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int size() const { return n_; }
    double operator()(int i, int j) const { return c_[static_cast<size_t>(i * n_ + j)]; }
    double& operator()(int i, int j) { return c_[static_cast<size_t>(i * n_ + j)]; }

    Vec apply(const Vec& v) const {
        assert(v.size() == n_);
        Vec out(n_);
        for (int i = 0; i < n_; ++i) {
            double s = 0.0;
            for (int j = 0; j < n_; ++j) s += (*this)(i, j) * v[j];
            out[i] = s;
        }
        return out;
    }

    Mat mul(const Mat& o) const {
        assert(n_ == o.n_);
        Mat out(n_);
        for (int i = 0; i < n_; ++i)
            for (int k = 0; k < n_; ++k) {
                const double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (int j = 0; j < n_; ++j) out(i, j) += a * o(k, j);
            }
        return out;
    }

    Mat transpose() const {
        Mat out(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) out(j, i) = (*this)(i, j);
        return out;
    }

    double max_abs_diff(const Mat& o) const {
        assert(n_ == o.n_);
        double m = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m = std::max(m, std::abs((*this)(i, j) - o(i, j)));
        return m;
    }

    double max_abs() const {
        double m = 0.0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) m = std::max(m, std::abs((*this)(i, j)));
        return m;
    }

  private:
    std::array<double, kMaxAmbient * kMaxAmbient> c_{};
    int n_ = 0;
};

/// Deterministic pairwise tree sum; order-independent of accumulation
/// grouping chosen by the optimizer and more accurate than a running sum.
inline double pairwise_sum(const double* x, size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

} // namespace natlab
