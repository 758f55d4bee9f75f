#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace lionflow {

using Vec = std::vector<double>;

// Dense row-major matrix, sized for coefficient blocks (d x d with small d).
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    static Mat identity(int d) {
        Mat m(d, d);
        for (int i = 0; i < d; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat zero(int d) { return Mat(d, d); }

    Mat& operator+=(const Mat& o) {
        assert(rows == o.rows && cols == o.cols);
        for (size_t i = 0; i < a.size(); ++i) a[i] += o.a[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (auto& v : a) v *= s;
        return *this;
    }
    Mat transposed() const {
        Mat t(cols, rows);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
};

inline Mat operator*(double s, Mat m) {
    m *= s;
    return m;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline Vec operator+(const Vec& x, const Vec& y) {
    Vec r(x.size());
    for (size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
    return r;
}

inline Vec operator-(const Vec& x, const Vec& y) {
    Vec r(x.size());
    for (size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
    return r;
}

inline Vec operator*(double s, const Vec& x) {
    Vec r(x.size());
    for (size_t i = 0; i < x.size(); ++i) r[i] = s * x[i];
    return r;
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

// y = A x
inline Vec matvec(const Mat& m, std::span<const double> x) {
    Vec y(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

// y = A^T x
inline Vec tmatvec(const Mat& m, std::span<const double> x) {
    Vec y(m.cols, 0.0);
    for (int j = 0; j < m.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < m.rows; ++i) s += m(i, j) * x[i];
        y[j] = s;
    }
    return y;
}

// u v^T
inline Mat outer(std::span<const double> u, std::span<const double> v) {
    Mat m(static_cast<int>(u.size()), static_cast<int>(v.size()));
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) m(i, j) = u[i] * v[j];
    return m;
}

// Trace{A B^T} = sum_ij A_ij B_ij
inline double trace_abt(const Mat& a, const Mat& b) {
    assert(a.rows == b.rows && a.cols == b.cols);
    double s = 0.0;
    for (size_t i = 0; i < a.a.size(); ++i) s += a.a[i] * b.a[i];
    return s;
}

// Trace{H g g^T} = sum_ijk H_ij g_jk g_ik
inline double trace_sandwich(const Mat& h, const Mat& g) {
    double s = 0.0;
    for (int i = 0; i < h.rows; ++i)
        for (int j = 0; j < h.cols; ++j) {
            double gg = 0.0;
            for (int k = 0; k < g.cols; ++k) gg += g(j, k) * g(i, k);
            s += h(i, j) * gg;
        }
    return s;
}

// Trace{D B C^T} = sum_pqk D_pq B_qk C_pk
inline double trace_dbct(const Mat& d, const Mat& b, const Mat& c) {
    double s = 0.0;
    for (int p = 0; p < d.rows; ++p)
        for (int q = 0; q < d.cols; ++q) {
            double bc = 0.0;
            for (int k = 0; k < b.cols; ++k) bc += b(q, k) * c(p, k);
            s += d(p, q) * bc;
        }
    return s;
}

// Trace{H (g0 g0^T + g1 g1^T)}
inline double trace_sandwich2(const Mat& h, const Mat& g0, const Mat& g1) {
    return trace_sandwich(h, g0) + trace_sandwich(h, g1);
}

}  // namespace lionflow
