#pragma once

// Hyperboloid-model hyperbolic geometry over the Lorentz form
// <u,v> = -u0 v0 + sum u_i v_i. Points live on the upper sheet
// <x,x> = -1, x0 > 0; boundary points are future null rays normalized
// against the basepoint O = (1,0,...,0) so that <theta,O> = -1.
//
// Numerical conventions that the rest of the library relies on:
//  * dist() is evaluated from the difference vector, never from the raw
//    pairing <x,y>; this keeps nearby points at large coordinates from
//    losing all digits to cancellation.
//  * busemann() splits the pairing into a radial and a perpendicular
//    part so that its value along a ray toward theta decays at exactly
//    unit speed to rounding accuracy, even at parameter 10 and beyond.
//  * On-sheet and Lorentz defects are measured relative to the squared
//    coordinate size. At hyperbolic distance d from the origin the
//    coordinates grow like e^d, so an absolute defect bound would be
//    unsatisfiable in doubles past d ~ 4.5.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "natlab/errors.hpp"
#include "natlab/vec.hpp"

namespace natlab {

inline constexpr double kSheetKeepTol = 1e-12;   // keep coords untouched below this relative defect
inline constexpr double kLorentzTol = 1e-10;     // matrix Lorentz-defect tolerance (relative floor)
inline constexpr double kClusterTol = 1e-8;      // eigenvalue cluster tolerance for classification
inline constexpr double kFixedResidualTol = 1e-9;

inline double coord_scale(const Vec& v) {
    const double m = max_abs(v);
    return 1.0 + m * m;
}

class Point {
  public:
    Point() = default;

    /// Accepts a future timelike vector; rescales onto the sheet only
    /// when the relative defect exceeds kSheetKeepTol, so points built
    /// by exact geodesic formulas keep their bit patterns.
    explicit Point(const Vec& raw) : v_(raw) {
        const double q = minkowski_form(v_, v_);
        if (!(q < 0.0) || !(v_[0] > 0.0))
            throw InputError("Point: vector is not future timelike");
        const double defect = std::abs(q + 1.0);
        if (defect > kSheetKeepTol * coord_scale(v_)) {
            const double inv = 1.0 / std::sqrt(-q);
            v_ *= inv;
        }
    }

    static Point origin(int m) {
        Vec v(m + 1);
        v[0] = 1.0;
        return Point(v);
    }

    int dim() const { return v_.size() - 1; }
    const Vec& coords() const { return v_; }
    double operator[](int i) const { return v_[i]; }

    Vec spatial() const {
        Vec s(dim());
        for (int i = 0; i < dim(); ++i) s[i] = v_[i + 1];
        return s;
    }

  private:
    Vec v_;
};

class BoundaryPoint {
  public:
    BoundaryPoint() = default;

    /// Accepts a future null vector (relative defect <= 1e-9) and stores
    /// it as (1, u) with u an exactly re-normalized unit direction.
    explicit BoundaryPoint(const Vec& raw) {
        const double q = minkowski_form(raw, raw);
        if (!(raw[0] > 0.0))
            throw InputError("BoundaryPoint: vector is not future pointing");
        if (std::abs(q) > 1e-9 * coord_scale(raw))
            throw InputError("BoundaryPoint: vector is not null");
        v_ = Vec(raw.size());
        double nrm = 0.0;
        for (int i = 1; i < raw.size(); ++i) {
            v_[i] = raw[i] / raw[0];
            nrm += v_[i] * v_[i];
        }
        nrm = std::sqrt(nrm);
        if (!(nrm > 0.0)) throw InputError("BoundaryPoint: degenerate direction");
        for (int i = 1; i < raw.size(); ++i) v_[i] /= nrm;
        v_[0] = 1.0;
    }

    static BoundaryPoint from_direction(const Vec& unit_dir) {
        Vec v(unit_dir.size() + 1);
        v[0] = 1.0;
        for (int i = 0; i < unit_dir.size(); ++i) v[i + 1] = unit_dir[i];
        return BoundaryPoint(v);
    }

    int dim() const { return v_.size() - 1; }
    const Vec& coords() const { return v_; }
    double operator[](int i) const { return v_[i]; }

    Vec direction() const {
        Vec u(dim());
        for (int i = 0; i < dim(); ++i) u[i] = v_[i + 1];
        return u;
    }

    /// Chordal (unit-sphere) distance between directions.
    double chordal(const BoundaryPoint& o) const {
        Vec d = direction() - o.direction();
        return euclidean_norm(d);
    }

  private:
    Vec v_;
};

// ---------------------------------------------------------------------------
// Isometries

inline Mat minkowski_gram(const Mat& g) {
    // g^T J g
    const int n = g.size();
    Mat out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = -g(0, i) * g(0, j);
            for (int r = 1; r < n; ++r) s += g(r, i) * g(r, j);
            out(i, j) = s;
        }
    return out;
}

inline double lorentz_defect(const Mat& g) {
    Mat gram = minkowski_gram(g);
    Mat J = Mat::identity(g.size());
    J(0, 0) = -1.0;
    return gram.max_abs_diff(J);
}

class Isometry {
  public:
    Isometry() = default;

    explicit Isometry(const Mat& m) : g_(m) {
        const double sc = g_.max_abs();
        const double tol = std::max(kLorentzTol, sc * sc * 1024.0 * 2.2e-16);
        if (lorentz_defect(g_) > tol)
            throw InputError("Isometry: matrix does not preserve the Lorentz form");
        if (!(g_(0, 0) > 0.0))
            throw InputError("Isometry: matrix does not preserve the upper sheet");
        orientation_ = det_sign();
    }

    static Isometry identity(int m) { return Isometry(Mat::identity(m + 1)); }

    int dim() const { return g_.size() - 1; }
    const Mat& matrix() const { return g_; }
    int orientation() const { return orientation_; }

    Vec apply_raw(const Vec& v) const { return g_.apply(v); }
    Point apply(const Point& p) const { return Point(g_.apply(p.coords())); }
    BoundaryPoint apply(const BoundaryPoint& b) const { return BoundaryPoint(g_.apply(b.coords())); }

    Isometry compose(const Isometry& o) const { return Isometry(g_.mul(o.g_)); }

    /// Exact Lorentz inverse J g^T J.
    Isometry inverse() const {
        const int n = g_.size();
        Mat inv(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double s = ((i == 0) != (j == 0)) ? -1.0 : 1.0;
                inv(i, j) = s * g_(j, i);
            }
        return Isometry(inv);
    }

    double max_abs_diff(const Isometry& o) const { return g_.max_abs_diff(o.g_); }
    bool is_identity(double tol = 1e-12) const {
        return g_.max_abs_diff(Mat::identity(g_.size())) <= tol;
    }

  private:
    int det_sign() const {
        // LU with partial pivoting on a stack copy; matrices are <= 8x8.
        const int n = g_.size();
        std::array<std::array<double, kMaxAmbient>, kMaxAmbient> a{};
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a[i][j] = g_(i, j);
        double det = 1.0;
        for (int c = 0; c < n; ++c) {
            int piv = c;
            for (int r = c + 1; r < n; ++r)
                if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
            if (piv != c) {
                std::swap(a[piv], a[c]);
                det = -det;
            }
            det *= a[c][c];
            if (a[c][c] == 0.0) break;
            for (int r = c + 1; r < n; ++r) {
                const double f = a[r][c] / a[c][c];
                for (int j = c; j < n; ++j) a[r][j] -= f * a[c][j];
            }
        }
        return det >= 0.0 ? +1 : -1;
    }

    Mat g_;
    int orientation_ = +1;
};

// ---------------------------------------------------------------------------
// Metric quantities

/// Hyperbolic distance, evaluated from the difference vector:
/// <x-y, x-y> = 2(cosh d - 1), so d = 2 asinh(|x-y|_M / 2).
inline double dist(const Point& x, const Point& y) {
    if (x.dim() != y.dim()) throw InputError("dist: dimension mismatch");
    Vec d = x.coords() - y.coords();
    const double q = minkowski_form(d, d);
    return 2.0 * std::asinh(0.5 * std::sqrt(std::max(q, 0.0)));
}

struct BusemannValue {
    double value = 0.0;
    Vec gradient; // unit tangent at y pointing away from theta
};

/// B(y,theta) = log(-<y,theta>), normalized so B(O,theta) = 0.
/// The pairing is evaluated as (1+|Y_perp|^2)/(y0 + Y.u) when Y.u > 0,
/// which keeps full precision on and near the ray toward theta.
inline BusemannValue busemann(const Point& y, const BoundaryPoint& theta) {
    if (y.dim() != theta.dim()) throw InputError("busemann: dimension mismatch");
    const int m = y.dim();
    const Vec u = theta.direction();
    const double y0 = y[0];
    double a = 0.0;
    for (int i = 0; i < m; ++i) a += y[i + 1] * u[i];

    double pairing; // -<y,theta>
    if (a > 0.0) {
        double np2 = 0.0;
        for (int i = 0; i < m; ++i) {
            const double p = y[i + 1] - a * u[i];
            np2 += p * p;
        }
        pairing = (1.0 + np2) / (y0 + a);
    } else {
        pairing = y0 - a;
    }

    BusemannValue out;
    out.value = std::log(pairing);
    out.gradient = Vec(m + 1);
    const double inv = 1.0 / pairing;
    for (int i = 0; i <= m; ++i) out.gradient[i] = y[i] - inv * theta[i];
    return out;
}

/// Unit-speed geodesic through x toward a target point, evaluated at t.
inline Point geodesic(const Point& x, const Point& target, double t) {
    if (x.dim() != target.dim()) throw InputError("geodesic: dimension mismatch");
    Vec delta = target.coords() - x.coords();
    const double q = std::max(minkowski_form(delta, delta), 0.0);
    const double d = 2.0 * std::asinh(0.5 * std::sqrt(q));
    if (d < 1e-14) throw InputError("geodesic: degenerate direction (coincident points)");
    const double sinh_d = std::sqrt(q + 0.25 * q * q);
    Vec v = delta - (0.5 * q) * x.coords();
    v *= 1.0 / sinh_d;
    Vec alpha = std::cosh(t) * x.coords() + std::sinh(t) * v;
    return Point(alpha);
}

/// Unit-speed geodesic ray from x toward a boundary point, evaluated at t
/// (t may be negative; the point then moves away from theta).
inline Point geodesic(const Point& x, const BoundaryPoint& theta, double t) {
    if (x.dim() != theta.dim()) throw InputError("geodesic: dimension mismatch");
    const double c = -1.0 / minkowski_form(x.coords(), theta.coords());
    Vec alpha = std::exp(-t) * x.coords() + (std::sinh(t) * c) * theta.coords();
    return Point(alpha);
}

struct GeodesicRay {
    Point base;
    BoundaryPoint endpoint;
    Point point_at(double t) const { return geodesic(base, endpoint, t); }
};

/// Riemannian log map: tangent vector at x of length dist(x,y) pointing to y.
inline Vec log_map(const Point& x, const Point& y) {
    Vec delta = y.coords() - x.coords();
    const double q = std::max(minkowski_form(delta, delta), 0.0);
    const double d = 2.0 * std::asinh(0.5 * std::sqrt(q));
    if (d == 0.0) return Vec(x.coords().size());
    const double sinh_d = std::sqrt(q + 0.25 * q * q);
    Vec v = delta - (0.5 * q) * x.coords();
    v *= d / sinh_d;
    return v;
}

/// Riemannian exponential: walk from x along tangent vector w.
inline Point exp_map(const Point& x, const Vec& w) {
    const double q = minkowski_form(w, w);
    const double r = std::sqrt(std::max(q, 0.0));
    if (r < 1e-300) return x;
    Vec alpha = std::cosh(r) * x.coords() + (std::sinh(r) / r) * w;
    return Point(alpha);
}

/// Orthonormal basis of the tangent space at y, built from the radial
/// direction and a Householder complement; stable at any depth.
struct TangentFrame {
    int m = 0;
    std::array<Vec, kMaxAmbient - 1> e;

    Vec to_ambient(const Vec& c) const {
        Vec out(m + 1);
        for (int j = 0; j < m; ++j) out += c[j] * e[j];
        return out;
    }
    Vec to_frame(const Vec& ambient) const {
        Vec c(m);
        for (int j = 0; j < m; ++j) c[j] = minkowski_form(ambient, e[j]);
        return c;
    }
};

inline TangentFrame tangent_frame(const Point& y) {
    const int m = y.dim();
    TangentFrame f;
    f.m = m;
    Vec Y = y.spatial();
    const double ny = euclidean_norm(Y);
    if (ny < 1e-12) {
        for (int j = 0; j < m; ++j) {
            Vec v(m + 1);
            v[j + 1] = 1.0;
            f.e[j] = v;
        }
        return f;
    }
    Vec yhat = Y * (1.0 / ny);
    // radial tangent (|Y|, y0 * yhat)
    Vec rad(m + 1);
    rad[0] = ny;
    for (int i = 0; i < m; ++i) rad[i + 1] = y[0] * yhat[i];
    const double rn = std::sqrt(std::max(minkowski_form(rad, rad), 0.0));
    rad *= 1.0 / rn;
    f.e[0] = rad;
    // Householder reflection w = yhat - e1 maps e1 <-> yhat; its columns
    // 2..m are an orthonormal basis of yhat's spatial complement.
    Vec w = yhat;
    w[0] -= 1.0;
    const double wn2 = euclidean_dot(w, w);
    for (int j = 1; j < m; ++j) {
        Vec col(m);
        col[j] = 1.0;
        if (wn2 > 1e-30) {
            const double fct = 2.0 * w[j] / wn2;
            for (int i = 0; i < m; ++i) col[i] -= fct * w[i];
        }
        Vec v(m + 1);
        for (int i = 0; i < m; ++i) v[i + 1] = col[i];
        f.e[j] = v;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Ball model (I/O and cusp diagnostics only)

inline Vec to_ball(const Point& p) {
    Vec u(p.dim());
    const double f = 1.0 / (1.0 + p[0]);
    for (int i = 0; i < p.dim(); ++i) u[i] = p[i + 1] * f;
    return u;
}

inline Vec to_ball(const BoundaryPoint& b) { return b.direction(); }

inline Point from_ball(const Vec& u) {
    const double r2 = euclidean_dot(u, u);
    if (r2 >= 1.0) throw InputError("from_ball: point outside the open unit ball");
    Vec v(u.size() + 1);
    const double f = 1.0 / (1.0 - r2);
    v[0] = (1.0 + r2) * f;
    for (int i = 0; i < u.size(); ++i) v[i + 1] = 2.0 * u[i] * f;
    return Point(v);
}

inline BoundaryPoint boundary_from_ball(const Vec& u) { return BoundaryPoint::from_direction(u); }

// ---------------------------------------------------------------------------
// Subspace embeddings

inline Point embed_point(const Point& p, int n) {
    if (n < p.dim()) throw InputError("embed_point: target dimension too small");
    Vec v(n + 1);
    for (int i = 0; i <= p.dim(); ++i) v[i] = p[i];
    return Point(v);
}

inline BoundaryPoint embed_point(const BoundaryPoint& b, int n) {
    if (n < b.dim()) throw InputError("embed_point: target dimension too small");
    Vec v(n + 1);
    for (int i = 0; i <= b.dim(); ++i) v[i] = b[i];
    return BoundaryPoint(v);
}

inline Isometry include_isometry(const Isometry& g, int n) {
    if (n < g.dim()) throw InputError("include_isometry: target dimension too small");
    Mat m(n + 1);
    for (int i = 0; i <= n; ++i) m(i, i) = 1.0;
    for (int i = 0; i <= g.dim(); ++i)
        for (int j = 0; j <= g.dim(); ++j) m(i, j) = g.matrix()(i, j);
    return Isometry(m);
}

// ---------------------------------------------------------------------------
// Classification

enum class IsomType { Elliptic, Parabolic, Hyperbolic, Indeterminate };

inline const char* to_string(IsomType t) {
    switch (t) {
        case IsomType::Elliptic: return "elliptic";
        case IsomType::Parabolic: return "parabolic";
        case IsomType::Hyperbolic: return "hyperbolic";
        default: return "indeterminate";
    }
}

struct IsometryClass {
    IsomType type = IsomType::Indeterminate;
    double translation_length = 0.0;
    std::optional<Point> fixed_interior;
    std::optional<BoundaryPoint> fixed_boundary;
    std::optional<std::pair<BoundaryPoint, BoundaryPoint>> axis;
};

namespace detail {

inline Eigen::MatrixXd to_eigen(const Mat& g) {
    const int n = g.size();
    Eigen::MatrixXd e(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) e(i, j) = g(i, j);
    return e;
}

inline Vec from_eigen(const Eigen::VectorXd& v) {
    Vec out(static_cast<int>(v.size()));
    for (int i = 0; i < v.size(); ++i) out[i] = v(i);
    return out;
}

/// Null-space basis of A with singular-value cutoff.
inline std::vector<Vec> null_space(const Eigen::MatrixXd& A, double tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    std::vector<Vec> basis;
    const int n = static_cast<int>(A.cols());
    for (int i = 0; i < n; ++i) {
        const double s = (i < sv.size()) ? sv(i) : 0.0;
        if (s <= tol) basis.push_back(from_eigen(svd.matrixV().col(i)));
    }
    return basis;
}

} // namespace detail

/// Type and invariants of a single isometry, with an explicit
/// "indeterminate" verdict when the eigenstructure is too ambiguous to
/// trust. The loxodromic test uses a 1e-3 margin on the spectral radius:
/// QR scatters the eigenvalues of a (defective) parabolic by roughly
/// eps^(1/3) times a conditioning factor, so a genuinely parabolic
/// element can show a spurious top eigenvalue of 1 + 1e-4. Elements
/// whose spectral radius lands between the cluster tolerance and that
/// margin fall through to the kernel analysis; a translation length too
/// small to resolve then surfaces as "indeterminate" rather than as a
/// wrong verdict.
inline IsometryClass classify_isometry(const Isometry& g) {
    IsometryClass out;
    const int n = g.dim() + 1;
    Eigen::MatrixXd E = detail::to_eigen(g.matrix());
    Eigen::EigenSolver<Eigen::MatrixXd> es(E);
    if (es.info() != Eigen::Success) return out;

    int imax = 0, imin = 0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(es.eigenvalues()(i)) > std::abs(es.eigenvalues()(imax))) imax = i;
        if (std::abs(es.eigenvalues()(i)) < std::abs(es.eigenvalues()(imin))) imin = i;
    }
    const double lmax = std::abs(es.eigenvalues()(imax));

    if (lmax > 1.0 + 1e-3) {
        // expect a real positive top eigenvalue with a null eigenvector
        const auto lv = es.eigenvalues()(imax);
        if (std::abs(lv.imag()) > kClusterTol * lmax) return out;
        out.type = IsomType::Hyperbolic;
        const double lmin = std::abs(es.eigenvalues()(imin));
        out.translation_length = 0.5 * (std::log(lmax) - std::log(lmin));
        auto extract = [&](int idx) -> std::optional<BoundaryPoint> {
            Eigen::VectorXd v = es.eigenvectors().col(idx).real();
            if (v.norm() < 1e-12) return std::nullopt;
            Vec raw = detail::from_eigen(v);
            if (raw[0] < 0.0) raw *= -1.0;
            if (std::abs(raw[0]) < 1e-12) return std::nullopt;
            const double q = minkowski_form(raw, raw);
            if (std::abs(q) > 1e-8 * coord_scale(raw)) return std::nullopt;
            Vec fixed = raw;
            // polish away the non-null component
            return BoundaryPoint(fixed);
        };
        auto bmax = extract(imax);
        auto bmin = extract(imin);
        if (bmax && bmin) {
            out.axis = std::make_pair(*bmax, *bmin);
            out.fixed_boundary = *bmax;
        } else {
            out.type = IsomType::Indeterminate;
        }
        return out;
    }

    // all |lambda| ~ 1: elliptic or parabolic by the shape of ker(g - I)
    Eigen::MatrixXd A = E - Eigen::MatrixXd::Identity(n, n);
    const double ktol = kClusterTol * std::max(1.0, E.cwiseAbs().maxCoeff());
    std::vector<Vec> ker = detail::null_space(A, ktol);
    if (ker.empty()) return out; // numerically borderline

    if (static_cast<int>(ker.size()) == n) {
        out.type = IsomType::Elliptic;
        out.fixed_interior = Point::origin(g.dim());
        return out;
    }

    // Minkowski Gram of the kernel
    const int r = static_cast<int>(ker.size());
    Eigen::MatrixXd gram(r, r);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) gram(i, j) = minkowski_form(ker[i], ker[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ses(gram);
    const double emin = ses.eigenvalues()(0);

    auto combo = [&](int col) {
        Vec v(n);
        for (int i = 0; i < r; ++i) v += ses.eigenvectors()(i, col) * ker[i];
        return v;
    };

    if (emin < -kClusterTol) {
        out.type = IsomType::Elliptic;
        Vec v = combo(0);
        if (v[0] < 0.0) v *= -1.0;
        v *= 1.0 / std::sqrt(-minkowski_form(v, v));
        out.fixed_interior = Point(v);
        return out;
    }
    if (emin <= kClusterTol) {
        out.type = IsomType::Parabolic;
        Vec v = combo(0);
        if (v[0] < 0.0) v *= -1.0;
        if (std::abs(v[0]) < 1e-10) return IsometryClass{}; // degenerate null direction
        out.fixed_boundary = BoundaryPoint(v);
        return out;
    }
    return out; // spacelike-only kernel: not a trustworthy verdict
}

// ---------------------------------------------------------------------------
// Common fixed sets of abelian families

enum class FixedSetKind { EmptyInterior, Pointwise, Axis, Ideal };

inline const char* to_string(FixedSetKind k) {
    switch (k) {
        case FixedSetKind::EmptyInterior: return "empty_interior";
        case FixedSetKind::Pointwise: return "pointwise";
        case FixedSetKind::Axis: return "axis";
        default: return "ideal";
    }
}

struct FixedSet {
    FixedSetKind description = FixedSetKind::EmptyInterior;
    bool everything = false; // trivial group: all of H^m and its boundary
    std::vector<Point> interior_points;
    std::vector<BoundaryPoint> boundary_points;
    std::vector<std::pair<BoundaryPoint, BoundaryPoint>> invariant_geodesics;

    bool empty() const {
        return !everything && interior_points.empty() && boundary_points.empty() &&
               invariant_geodesics.empty();
    }
};

namespace detail {

inline Point geodesic_between_ideal(const BoundaryPoint& a, const BoundaryPoint& b, double s) {
    const double p = minkowski_form(a.coords(), b.coords()); // < 0
    Vec v = std::exp(s) * a.coords() + std::exp(-s) * b.coords();
    v *= 1.0 / std::sqrt(-2.0 * p);
    return Point(v);
}

} // namespace detail

/// Fixed points in the closed ball of a family of pairwise commuting
/// isometries, from joint eigenspaces: interior points, boundary points,
/// and invariant geodesics (endpoint pairs possibly swapped by members).
inline FixedSet common_fixed_set(const std::vector<Isometry>& gens) {
    if (gens.empty()) throw InputError("common_fixed_set: no generators");
    const int m = gens[0].dim();
    const int n = m + 1;
    for (const auto& g : gens)
        if (g.dim() != m) throw InputError("common_fixed_set: dimension mismatch");

    for (size_t i = 0; i < gens.size(); ++i)
        for (size_t j = i + 1; j < gens.size(); ++j) {
            Mat ab = gens[i].matrix().mul(gens[j].matrix());
            Mat ba = gens[j].matrix().mul(gens[i].matrix());
            const double sc = std::max(1.0, ab.max_abs());
            if (ab.max_abs_diff(ba) > 1e-9 * sc)
                throw InputError("common_fixed_set: generators do not commute (not abelian)");
        }

    FixedSet out;
    std::vector<Isometry> nontrivial;
    for (const auto& g : gens)
        if (!g.is_identity()) nontrivial.push_back(g);
    if (nontrivial.empty()) {
        out.description = FixedSetKind::Pointwise;
        out.everything = true;
        out.interior_points.push_back(Point::origin(m));
        return out;
    }

    auto fixes_point = [&](const Point& p) {
        for (const auto& g : nontrivial)
            if (dist(g.apply(p), p) > kFixedResidualTol) return false;
        return true;
    };
    auto fixes_boundary = [&](const BoundaryPoint& b) {
        for (const auto& g : nontrivial)
            if (g.apply(b).chordal(b) > kFixedResidualTol) return false;
        return true;
    };

    // joint kernel of (g - I): pointwise-fixed vectors
    Eigen::MatrixXd stack(n * static_cast<int>(nontrivial.size()), n);
    for (size_t k = 0; k < nontrivial.size(); ++k) {
        Eigen::MatrixXd A =
            detail::to_eigen(nontrivial[k].matrix()) - Eigen::MatrixXd::Identity(n, n);
        stack.block(n * static_cast<int>(k), 0, n, n) = A;
    }
    std::vector<Vec> ker = detail::null_space(stack, 1e-9 * std::max(1.0, stack.cwiseAbs().maxCoeff()));

    int timelike_dim = 0, null_dim = 0;
    std::vector<Vec> gram_dirs;
    if (!ker.empty()) {
        const int r = static_cast<int>(ker.size());
        Eigen::MatrixXd gram(r, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) gram(i, j) = minkowski_form(ker[i], ker[j]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ses(gram);
        for (int c = 0; c < r; ++c) {
            Vec v(n);
            for (int i = 0; i < r; ++i) v += ses.eigenvectors()(i, c) * ker[i];
            gram_dirs.push_back(v);
            const double ev = ses.eigenvalues()(c);
            if (ev < -kClusterTol) ++timelike_dim;
            else if (ev <= kClusterTol) ++null_dim;
        }
    }

    if (timelike_dim > 0) {
        // interior fixed locus = (joint kernel) intersect H^m
        Vec t = gram_dirs[0];
        if (t[0] < 0.0) t *= -1.0;
        t *= 1.0 / std::sqrt(-minkowski_form(t, t));
        Point center(t);
        if (fixes_point(center)) out.interior_points.push_back(center);

        const int kerdim = static_cast<int>(gram_dirs.size());
        if (kerdim == n) {
            out.description = FixedSetKind::Pointwise;
            out.everything = true;
            return out;
        }
        if (kerdim >= 2) {
            // axis (or higher-dimensional fixed subspace): sample along it
            // and record ideal endpoints of the timelike 2-planes found.
            for (int c = 1; c < kerdim; ++c) {
                Vec w = gram_dirs[c];
                const double q = minkowski_form(w, w);
                if (q <= kClusterTol) continue; // only spacelike partners span planes
                w *= 1.0 / std::sqrt(q);
                // null directions of span(t, w): t +- w
                Vec p1 = center.coords() + w, p2 = center.coords() - w;
                try {
                    BoundaryPoint b1(p1), b2(p2);
                    if (fixes_boundary(b1) && fixes_boundary(b2)) {
                        out.boundary_points.push_back(b1);
                        out.boundary_points.push_back(b2);
                        out.invariant_geodesics.emplace_back(b1, b2);
                        for (double s : {-1.0, 1.0})
                            out.interior_points.push_back(
                                detail::geodesic_between_ideal(b1, b2, s));
                    }
                } catch (const InputError&) {
                }
            }
            out.description = (out.invariant_geodesics.size() == 1 && kerdim == 2)
                                  ? FixedSetKind::Axis
                                  : FixedSetKind::Pointwise;
            return out;
        }
        out.description = FixedSetKind::Pointwise;
        return out;
    }

    // No interior fixed point: gather boundary candidates from
    // eigenvectors. QR scatters defective eigenpairs by ~eps^(1/3), so
    // candidates are clustered at a matching radius and each cluster is
    // represented by its smallest-residual member.
    auto max_residual = [&](const BoundaryPoint& b) {
        double r = 0.0;
        for (const auto& g : nontrivial) r = std::max(r, g.apply(b).chordal(b));
        return r;
    };
    std::vector<BoundaryPoint> candidates;
    std::vector<double> cand_res;
    auto add_candidate = [&](const Vec& raw) {
        Vec v = raw;
        if (v[0] < 0.0) v *= -1.0;
        if (v[0] < 1e-10) return;
        if (std::abs(minkowski_form(v, v)) > 1e-7 * coord_scale(v)) return;
        try {
            BoundaryPoint b(v);
            const double res = max_residual(b);
            for (size_t i = 0; i < candidates.size(); ++i) {
                if (candidates[i].chordal(b) < 1e-4) {
                    if (res < cand_res[i]) {
                        candidates[i] = b;
                        cand_res[i] = res;
                    }
                    return;
                }
            }
            candidates.push_back(b);
            cand_res.push_back(res);
        } catch (const InputError&) {
        }
    };
    for (const auto& g : nontrivial) {
        Eigen::MatrixXd E = detail::to_eigen(g.matrix());
        Eigen::EigenSolver<Eigen::MatrixXd> es(E);
        if (es.info() != Eigen::Success) continue;
        for (int i = 0; i < n; ++i) {
            const auto lv = es.eigenvalues()(i);
            if (std::abs(lv.imag()) > 1e-8 * std::max(1.0, std::abs(lv))) continue;
            if (lv.real() <= 0.0) continue;
            add_candidate(detail::from_eigen(es.eigenvectors().col(i).real()));
        }
        // parabolic fixed directions live in ker(g-I)
        Eigen::MatrixXd A = E - Eigen::MatrixXd::Identity(n, n);
        for (const auto& v : detail::null_space(A, 1e-9 * std::max(1.0, E.cwiseAbs().maxCoeff())))
            add_candidate(v);
    }

    for (size_t i = 0; i < candidates.size(); ++i)
        if (cand_res[i] <= kFixedResidualTol) out.boundary_points.push_back(candidates[i]);

    // invariant geodesics: pairs fixed or swapped by every generator
    std::vector<std::pair<BoundaryPoint, BoundaryPoint>> pair_cands;
    for (const auto& g : nontrivial) {
        auto cls = classify_isometry(g);
        if (cls.axis) pair_cands.push_back(*cls.axis);
    }
    for (size_t i = 0; i < out.boundary_points.size(); ++i)
        for (size_t j = i + 1; j < out.boundary_points.size(); ++j)
            pair_cands.emplace_back(out.boundary_points[i], out.boundary_points[j]);
    for (const auto& pr : pair_cands) {
        bool ok = true;
        for (const auto& g : nontrivial) {
            BoundaryPoint a = g.apply(pr.first), b = g.apply(pr.second);
            const bool keep = a.chordal(pr.first) < kFixedResidualTol &&
                              b.chordal(pr.second) < kFixedResidualTol;
            const bool swap = a.chordal(pr.second) < kFixedResidualTol &&
                              b.chordal(pr.first) < kFixedResidualTol;
            if (!keep && !swap) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        bool dup = false;
        for (const auto& ex : out.invariant_geodesics) {
            const bool same = ex.first.chordal(pr.first) < 1e-7 && ex.second.chordal(pr.second) < 1e-7;
            const bool flip = ex.first.chordal(pr.second) < 1e-7 && ex.second.chordal(pr.first) < 1e-7;
            if (same || flip) {
                dup = true;
                break;
            }
        }
        if (!dup) out.invariant_geodesics.push_back(pr);
    }

    if (!out.boundary_points.empty())
        out.description = FixedSetKind::Ideal;
    else
        out.description = FixedSetKind::EmptyInterior;

    if (out.empty())
        throw NumericalError(
            "common_fixed_set: abelian generators with empty fixed set; "
            "this contradicts the abelian fixed-set guarantee and signals a numerical failure");
    return out;
}

/// Euclidean distance in the ball model from a point to the fixed set
/// (including its invariant geodesics).
inline double ball_distance_to_fixed_set(const FixedSet& fs, const Point& y) {
    if (fs.everything) return 0.0;
    const Vec u = to_ball(y);
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& v) {
        Vec d = v - u;
        best = std::min(best, euclidean_norm(d));
    };
    for (const auto& p : fs.interior_points) consider(to_ball(p));
    for (const auto& b : fs.boundary_points) consider(to_ball(b));
    for (const auto& geo : fs.invariant_geodesics) {
        consider(to_ball(geo.first));
        consider(to_ball(geo.second));
        // coarse sample + golden-section refine along the geodesic
        double lo = -25.0, hi = 25.0, bs = 0.0, bv = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 200; ++i) {
            const double s = lo + (hi - lo) * i / 200.0;
            Vec d = to_ball(detail::geodesic_between_ideal(geo.first, geo.second, s)) - u;
            const double val = euclidean_norm(d);
            if (val < bv) {
                bv = val;
                bs = s;
            }
        }
        double a = bs - 0.5, b = bs + 0.5;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - gr * (b - a), d2 = a + gr * (b - a);
        auto fval = [&](double s) {
            Vec d = to_ball(detail::geodesic_between_ideal(geo.first, geo.second, s)) - u;
            return euclidean_norm(d);
        };
        double fc = fval(c), fd = fval(d2);
        for (int it = 0; it < 60; ++it) {
            if (fc < fd) {
                b = d2;
                d2 = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = fval(c);
            } else {
                a = c;
                c = d2;
                fc = fd;
                d2 = a + gr * (b - a);
                fd = fval(d2);
            }
        }
        best = std::min(best, std::min(fc, fd));
    }
    return best;
}

// ---------------------------------------------------------------------------
// SL(2,C) input convenience

using SL2C = std::array<std::complex<double>, 4>; // row-major a b / c d

inline SL2C sl2c_mul(const SL2C& A, const SL2C& B) {
    return {A[0] * B[0] + A[1] * B[2], A[0] * B[1] + A[1] * B[3],
            A[2] * B[0] + A[3] * B[2], A[2] * B[1] + A[3] * B[3]};
}

inline SL2C sl2c_inverse(const SL2C& A) { return {A[3], -A[1], -A[2], A[0]}; }

/// Image of A under the 2-to-1 cover SL(2,C) -> SO+(3,1), acting on
/// Hermitian matrices X = t I + x s1 + y s2 + z s3 by X -> A X A*.
inline Isometry sl2c_to_lorentz(const SL2C& A) {
    const std::complex<double> det = A[0] * A[3] - A[1] * A[2];
    if (std::abs(det - 1.0) > 1e-10)
        throw InputError("sl2c_to_lorentz: determinant is not 1");
    using C = std::complex<double>;
    // Hermitian basis in entry form (X00, X01, X10, X11) for the
    // coordinate chart X = [[t+z, x+iy], [x-iy, t-z]].
    const std::array<std::array<C, 4>, 4> basis = {{
        {C(1), C(0), C(0), C(1)},               // t
        {C(0), C(1), C(1), C(0)},               // x
        {C(0), C(0, 1), C(0, -1), C(0)},        // y
        {C(1), C(0), C(0), C(-1)},              // z
    }};
    Mat g(4);
    const C a = A[0], b = A[1], c = A[2], d = A[3];
    for (int col = 0; col < 4; ++col) {
        const auto& H = basis[col];
        // Y = A H A^dagger
        const C h00 = H[0], h01 = H[1], h10 = H[2], h11 = H[3];
        const C y00 = a * (h00 * std::conj(a) + h01 * std::conj(b)) +
                      b * (h10 * std::conj(a) + h11 * std::conj(b));
        const C y01 = a * (h00 * std::conj(c) + h01 * std::conj(d)) +
                      b * (h10 * std::conj(c) + h11 * std::conj(d));
        const C y10 = c * (h00 * std::conj(a) + h01 * std::conj(b)) +
                      d * (h10 * std::conj(a) + h11 * std::conj(b));
        const C y11 = c * (h00 * std::conj(c) + h01 * std::conj(d)) +
                      d * (h10 * std::conj(c) + h11 * std::conj(d));
        g(0, col) = 0.5 * (y00.real() + y11.real());
        g(1, col) = 0.5 * (y01 + std::conj(y10)).real();
        g(2, col) = 0.5 * (y01 + std::conj(y10)).imag();
        g(3, col) = 0.5 * (y00.real() - y11.real());
    }
    return Isometry(g);
}

/// Boundary point of H^3 for a point of the Riemann sphere (null vector
/// of the corresponding Hermitian ray); `infinity` maps to (1,0,0,1).
inline BoundaryPoint sl2c_boundary(std::complex<double> w) {
    Vec v(4);
    const double n2 = std::norm(w);
    v[0] = 0.5 * (n2 + 1.0);
    v[1] = w.real();
    v[2] = w.imag();
    v[3] = 0.5 * (n2 - 1.0);
    return BoundaryPoint(v);
}

inline BoundaryPoint sl2c_boundary_infinity() {
    Vec v(4);
    v[0] = 1.0;
    v[3] = 1.0;
    return BoundaryPoint(v);
}

} // namespace natlab
