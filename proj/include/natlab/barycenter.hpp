#pragma once

// Measures on the boundary sphere, the convex Busemann-average
// functional, and the barycenter solver with full degenerate-case
// handling.
//
// Visual-measure integrals reduce to a radial profile g(r): the average
// of the Busemann kernel over the visual sphere of a point at distance
// r, computed by 1D quadrature against the density of the visual
// measure and cached on spline grids (values, first and second
// derivative). Per-center additive constants drop out of gradients and
// minimizers, so mixtures are evaluated as sums of w * g(d(y, center)).

#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <unordered_map>

#include "natlab/groups.hpp"
#include "natlab/hypgeo.hpp"
#include "natlab/quadrature.hpp"

namespace natlab {

// ---------------------------------------------------------------------------
// Radial profile of the visual Busemann average

namespace detail {

/// Stable factors of cosh r - sinh r cos(phi):
///   D = e^-r + 2 sinh(r) sin^2(phi/2),  N = -e^-r + 2 cosh(r) sin^2(phi/2)
/// so that d/dr log D = N/D without cancellation at small phi.
struct RadialKernel {
    double D, NoverD;
    RadialKernel(double r, double phi) {
        const double s2 = std::sin(0.5 * phi) * std::sin(0.5 * phi);
        const double emr = std::exp(-r);
        D = emr + 2.0 * std::sinh(r) * s2;
        const double N = -emr + 2.0 * std::cosh(r) * s2;
        NoverD = N / D;
    }
};

inline double sphere_weight_norm(int n) {
    // 1 / int_0^pi sin^(n-2) phi dphi
    double v = 0.0;
    switch (n) {
        case 2: v = 1.0 / M_PI; break;
        case 3: v = 0.5; break;
        default: {
            const double integral = graded_panels(
                [&](double phi) { return std::pow(std::sin(phi), n - 2); }, M_PI, 24, 16);
            v = 1.0 / integral;
        }
    }
    return v;
}

template <typename F>
double radial_quadrature(int n, double r, F&& integrand) {
    const double cn = sphere_weight_norm(n);
    const int levels = std::max(16, static_cast<int>(1.5 * r) + 16);
    auto f = [&](double phi) {
        RadialKernel ker(r, phi);
        const double w = (n == 2) ? 1.0 : std::pow(std::sin(phi), n - 2);
        return integrand(ker) * w;
    };
    return cn * graded_panels(f, M_PI, levels, 14);
}

/// Clamped cubic spline on a uniform grid.
class UniformSpline {
  public:
    void build(double x0, double h, std::vector<double> y, double d_left, double d_right) {
        x0_ = x0;
        h_ = h;
        y_ = std::move(y);
        const size_t n = y_.size();
        m_.assign(n, 0.0);
        if (n < 3) return;
        // tridiagonal system for second derivatives, clamped ends
        std::vector<double> a(n, 1.0), b(n, 4.0), c(n, 1.0), rhs(n, 0.0);
        b[0] = 2.0;
        c[0] = 1.0;
        rhs[0] = 6.0 / h_ * ((y_[1] - y_[0]) / h_ - d_left);
        a[n - 1] = 1.0;
        b[n - 1] = 2.0;
        rhs[n - 1] = 6.0 / h_ * (d_right - (y_[n - 1] - y_[n - 2]) / h_);
        for (size_t i = 1; i + 1 < n; ++i)
            rhs[i] = 6.0 / (h_ * h_) * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]);
        for (size_t i = 1; i < n; ++i) {
            const double w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        m_[n - 1] = rhs[n - 1] / b[n - 1];
        for (size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - c[i] * m_[i + 1]) / b[i];
    }

    double eval(double x) const {
        const size_t n = y_.size();
        double t = (x - x0_) / h_;
        size_t i = static_cast<size_t>(std::max(0.0, std::min(t, double(n - 2))));
        if (i > n - 2) i = n - 2;
        const double xl = x0_ + i * h_;
        const double A = (xl + h_ - x) / h_, B = (x - xl) / h_;
        return A * y_[i] + B * y_[i + 1] +
               ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h_ * h_ / 6.0;
    }

  private:
    double x0_ = 0.0, h_ = 1.0;
    std::vector<double> y_, m_;
};

} // namespace detail

/// Cached radial profile for one boundary-sphere dimension: g convex
/// increasing, g(0) = 0, g'(0) = 0, g'(r) -> 1. Built once, immutable,
/// safe for concurrent reads afterwards.
class RadialProfile {
  public:
    static constexpr double kGridMax = 40.0;
    static constexpr double kGridStep = 0.02;

    static const RadialProfile& get(int n) {
        static std::mutex mu;
        static std::unordered_map<int, std::unique_ptr<RadialProfile>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it == cache.end()) {
            if (n < 2) throw InputError("RadialProfile: dimension must be >= 2");
            it = cache.emplace(n, std::unique_ptr<RadialProfile>(new RadialProfile(n))).first;
        }
        return *it->second;
    }

    int dim() const { return n_; }

    double g(double r) const {
        if (r >= kGridMax) return r + asym_;
        return sg_.eval(r);
    }
    double dg(double r) const {
        if (r >= kGridMax) return 1.0;
        return sdg_.eval(r);
    }
    double ddg(double r) const {
        if (r >= kGridMax) return 0.0;
        return sddg_.eval(r);
    }
    double ddg0() const { return ddg0_; }

    // Direct quadrature (independent of the spline cache; oracle path).
    static double quadrature_g(int n, double r) {
        return detail::radial_quadrature(
            n, r, [](const detail::RadialKernel& k) { return std::log(k.D); });
    }
    static double quadrature_dg(int n, double r) {
        return detail::radial_quadrature(
            n, r, [](const detail::RadialKernel& k) { return k.NoverD; });
    }
    static double quadrature_ddg(int n, double r) {
        return detail::radial_quadrature(
            n, r, [](const detail::RadialKernel& k) { return 1.0 - k.NoverD * k.NoverD; });
    }

  private:
    explicit RadialProfile(int n) : n_(n) {
        const auto count = static_cast<size_t>(kGridMax / kGridStep) + 1;
        std::vector<double> vg(count), vdg(count), vddg(count);
        for (size_t i = 0; i < count; ++i) {
            const double r = i * kGridStep;
            vg[i] = quadrature_g(n, r);
            vdg[i] = quadrature_dg(n, r);
            vddg[i] = quadrature_ddg(n, r);
        }
        ddg0_ = vddg[0];
        asym_ = vg[count - 1] - kGridMax;
        const double dddg_right = (vddg[count - 1] - vddg[count - 2]) / kGridStep;
        sg_.build(0.0, kGridStep, std::move(vg), 0.0, vdg[count - 1]);
        sdg_.build(0.0, kGridStep, std::move(vdg), ddg0_, vddg[count - 1]);
        sddg_.build(0.0, kGridStep, std::move(vddg), 0.0, dddg_right);
    }

    int n_;
    double asym_ = 0.0, ddg0_ = 0.0;
    detail::UniformSpline sg_, sdg_, sddg_;
};

/// Radial profile value and slope at distance r (spline-backed).
inline std::pair<double, double> radial_profile(int n, double r) {
    const RadialProfile& p = RadialProfile::get(n);
    return {p.g(r), p.dg(r)};
}

// ---------------------------------------------------------------------------
// Measures

struct BoundaryAtom {
    double weight;
    BoundaryPoint point;
};

struct AtomicBoundaryMeasure {
    std::vector<BoundaryAtom> atoms;

    double mass() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight;
        return s;
    }
    int dim() const { return atoms.empty() ? 0 : atoms[0].point.dim(); }
};

/// Finite mixture sum_i w_i * (visual measure of center z_i). Centers
/// live in a shared flat pool so that mixtures built over a large orbit
/// do not copy it.
class VisualMixture {
  public:
    VisualMixture() = default;

    static VisualMixture from_terms(const std::vector<std::pair<double, Point>>& terms) {
        VisualMixture mix;
        if (terms.empty()) return mix;
        mix.n_ = terms[0].second.dim();
        auto pool = std::make_shared<std::vector<double>>();
        pool->reserve(terms.size() * (mix.n_ + 1));
        for (const auto& [w, z] : terms) {
            if (!(w > 0.0)) throw InputError("VisualMixture: weights must be positive");
            for (int c = 0; c <= mix.n_; ++c) pool->push_back(z[c]);
            mix.weights_.push_back(w);
        }
        mix.centers_ = std::move(pool);
        mix.recompute_mass();
        return mix;
    }

    /// Borrow centers from an orbit's target column; `index` (optional)
    /// selects a subset of pool slots, aligned with `weights`.
    static VisualMixture over_orbit(std::shared_ptr<const std::vector<double>> pool, int n,
                                    std::vector<double> weights,
                                    std::vector<uint32_t> index = {}) {
        VisualMixture mix;
        mix.n_ = n;
        mix.centers_ = std::move(pool);
        mix.weights_ = std::move(weights);
        mix.index_ = std::move(index);
        if (!mix.index_.empty() && mix.index_.size() != mix.weights_.size())
            throw InputError("VisualMixture: index/weight size mismatch");
        mix.recompute_mass();
        return mix;
    }

    size_t size() const { return weights_.size(); }
    int dim() const { return n_; }
    double mass() const { return mass_; }
    double weight(size_t i) const { return weights_[i]; }
    std::vector<double>& mutable_weights() { return weights_; }
    void recompute_mass() { mass_ = pairwise_sum(weights_); }

    const double* center_ptr(size_t i) const {
        const size_t slot = index_.empty() ? i : index_[i];
        return centers_->data() + slot * (n_ + 1);
    }
    Vec center_raw(size_t i) const {
        Vec v(n_ + 1);
        const double* p = center_ptr(i);
        for (int c = 0; c <= n_; ++c) v[c] = p[c];
        return v;
    }
    Point center(size_t i) const { return Point(center_raw(i)); }

    std::shared_ptr<const std::vector<double>> center_pool() const { return centers_; }

  private:
    int n_ = 0;
    std::shared_ptr<const std::vector<double>> centers_;
    std::vector<double> weights_;
    std::vector<uint32_t> index_;
    double mass_ = 0.0;
};

// ---------------------------------------------------------------------------
// Functional

struct FunctionalEval {
    double value = 0.0;
    Vec gradient;             // ambient tangent vector at y
    Eigen::MatrixXd hessian;  // in the orthonormal tangent frame
    TangentFrame frame;
};

namespace detail {

/// Chunked pairwise accumulation for vectors: deterministic and nearly
/// as accurate as a full tree without per-term storage.
struct ChunkedVecAcc {
    explicit ChunkedVecAcc(int len) : len_(len), chunk_(len, 0.0) {}
    void push(const std::array<double, 32>& term) {
        for (int i = 0; i < len_; ++i) chunk_[i] += term[i];
        if (++count_ == 2048) flush();
    }
    std::vector<double> total() {
        flush();
        std::vector<double> out(len_);
        for (int i = 0; i < len_; ++i) out[i] = acc_[i].total();
        return out;
    }

  private:
    void flush() {
        if (count_ == 0) return;
        if (acc_.empty()) acc_.resize(len_);
        for (int i = 0; i < len_; ++i) {
            acc_[i].push(chunk_[i]);
            chunk_[i] = 0.0;
        }
        count_ = 0;
    }
    int len_;
    std::vector<double> chunk_;
    std::vector<PairwiseAcc> acc_;
    int count_ = 0;
};

} // namespace detail

/// Value, gradient and Hessian of the Busemann-average functional of an
/// atomic boundary measure plus a visual mixture at the point y. For a
/// visual term whose center coincides with y the radial direction is
/// undefined; the term contributes zero gradient and an isotropic
/// Hessian block g''(0) I.
inline FunctionalEval functional_eval(const AtomicBoundaryMeasure& atomic,
                                      const VisualMixture& visual, const Point& y) {
    const int m = y.dim();
    FunctionalEval out;
    out.frame = tangent_frame(y);
    out.hessian = Eigen::MatrixXd::Zero(m, m);

    const int tlen = 1 + m + m * m;
    if (tlen > 32) throw InputError("functional_eval: dimension too large");
    detail::ChunkedVecAcc acc(tlen);
    std::array<double, 32> term{};

    auto add_term = [&](double value, const Vec& grad_frame, const double* hess, double hscale) {
        term[0] = value;
        for (int i = 0; i < m; ++i) term[1 + i] = grad_frame[i];
        for (int i = 0; i < m * m; ++i) term[1 + m + i] = hscale * hess[i];
        acc.push(term);
    };

    std::array<double, 25> hbuf{};

    for (const auto& a : atomic.atoms) {
        if (a.point.dim() != m) throw InputError("functional_eval: dimension mismatch");
        auto b = busemann(y, a.point);
        Vec gf = out.frame.to_frame(b.gradient);
        // Hess B = metric - dB (x) dB
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) hbuf[i * m + j] = (i == j ? 1.0 : 0.0) - gf[i] * gf[j];
        Vec gterm = gf * a.weight;
        add_term(a.weight * b.value, gterm, hbuf.data(), a.weight);
    }

    if (visual.size() > 0) {
        if (visual.dim() != m) throw InputError("functional_eval: dimension mismatch");
        const RadialProfile& prof = RadialProfile::get(m);
        for (size_t i = 0; i < visual.size(); ++i) {
            const double w = visual.weight(i);
            // distance via the difference vector (stable at depth)
            const double* zp = visual.center_ptr(i);
            Vec delta(m + 1);
            for (int c = 0; c <= m; ++c) delta[c] = y[c] - zp[c];
            const double q = std::max(minkowski_form(delta, delta), 0.0);
            const double d = 2.0 * std::asinh(0.5 * std::sqrt(q));

            if (d < 1e-9) {
                Vec zero(m);
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < m; ++c) hbuf[r * m + c] = (r == c) ? 1.0 : 0.0;
                add_term(w * prof.g(d), zero, hbuf.data(), w * prof.ddg0());
                continue;
            }
            // unit tangent at y pointing away from the center
            const double sinh_d = std::sqrt(q + 0.25 * q * q);
            Vec away(m + 1);
            for (int c = 0; c <= m; ++c) away[c] = (delta[c] + (0.5 * q) * y[c]) / sinh_d;
            Vec nf = out.frame.to_frame(away);
            const double gp = prof.dg(d), gpp = prof.ddg(d);
            const double tangential = gp / std::tanh(d);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c)
                    hbuf[r * m + c] =
                        (gpp - tangential) * nf[r] * nf[c] + (r == c ? tangential : 0.0);
            Vec gterm = nf * (w * gp);
            add_term(w * prof.g(d), gterm, hbuf.data(), w);
        }
    }

    std::vector<double> sums = acc.total();
    out.value = sums[0];
    Vec gf(m);
    for (int i = 0; i < m; ++i) gf[i] = sums[1 + i];
    out.gradient = out.frame.to_ambient(gf);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) out.hessian(i, j) = sums[1 + m + i * m + j];
    return out;
}

// ---------------------------------------------------------------------------
// Barycenter solver

struct SolverStats {
    int iterations = 0;
    double final_gradient_norm = 0.0;
};

struct BarycenterResult {
    enum class Kind { Interior, Boundary, Geodesic };
    Kind kind = Kind::Interior;
    Point interior;
    BoundaryPoint boundary;
    std::pair<BoundaryPoint, BoundaryPoint> geodesic_endpoints;
    double functional_value = 0.0; // -inf when the minimum escapes to the boundary
    SolverStats stats;
};

struct SolverOptions {
    double grad_tol = 1e-10;
    int max_iterations = 200;
    std::optional<Point> initial;
    std::vector<double>* value_trace = nullptr; // functional value per accepted iterate

    // Secondary exit: the gradient of a mixture over points at depth d
    // carries ~eps * e^{2d} relative distance noise, so grad_tol can be
    // unreachable for deep-cusp measures. When the value has been flat
    // at its rounding floor for this many accepted steps and the
    // gradient is below stagnation_grad, the iterate is accepted.
    int stagnation_steps = 3;
    double stagnation_grad = 1e-6;
};

/// Minimizer of the Busemann-average functional over the closed ball:
///  (a) two equal boundary atoms (and nothing else): constant on the
///      joining geodesic, returned as such;
///  (b) a boundary atom heavier than half the total mass: the functional
///      is unbounded below along rays to that atom;
///  (c) otherwise damped Newton on the hyperboloid, globally convergent
///      by strict convexity and properness.
/// Weights are normalized internally, which makes the result point
/// exactly scale-invariant; the reported value is for the input mass.
inline BarycenterResult solve_barycenter(const AtomicBoundaryMeasure& atomic,
                                         const VisualMixture& visual,
                                         const SolverOptions& opt = {}) {
    const double mass = atomic.mass() + visual.mass();
    if (!(mass > 0.0)) throw InputError("solve_barycenter: measure mass must be positive");
    const int m = visual.size() > 0 ? visual.dim() : atomic.dim();

    // aggregate coincident boundary atoms before the structural tests
    std::vector<BoundaryAtom> merged;
    for (const auto& a : atomic.atoms) {
        bool found = false;
        for (auto& b : merged)
            if (b.point.chordal(a.point) < 1e-12) {
                b.weight += a.weight;
                found = true;
                break;
            }
        if (!found) merged.push_back(a);
    }

    BarycenterResult out;
    if (visual.size() == 0 && merged.size() == 2 &&
        std::abs(merged[0].weight - merged[1].weight) <= 1e-12 * mass) {
        out.kind = BarycenterResult::Kind::Geodesic;
        out.geodesic_endpoints = {merged[0].point, merged[1].point};
        const double p = minkowski_form(merged[0].point.coords(), merged[1].point.coords());
        out.functional_value = merged[0].weight * std::log(-0.5 * p);
        return out;
    }
    for (const auto& a : merged) {
        if (a.weight > 0.5 * mass) {
            out.kind = BarycenterResult::Kind::Boundary;
            out.boundary = a.point;
            out.functional_value = -std::numeric_limits<double>::infinity();
            return out;
        }
    }

    // normalized copies
    AtomicBoundaryMeasure na;
    na.atoms = merged;
    for (auto& a : na.atoms) a.weight /= mass;
    VisualMixture nv = visual;
    if (nv.size() > 0) {
        for (auto& w : nv.mutable_weights()) w /= mass;
        nv.recompute_mass();
    }

    Point y;
    if (opt.initial) {
        y = *opt.initial;
    } else {
        Vec init(m + 1);
        for (const auto& a : na.atoms) init += a.weight * a.point.coords();
        for (size_t i = 0; i < nv.size(); ++i) init += nv.weight(i) * nv.center_raw(i);
        init *= 1.0 / std::sqrt(std::max(-minkowski_form(init, init), 1e-300));
        y = Point(init);
    }

    FunctionalEval ev = functional_eval(na, nv, y);
    if (opt.value_trace) opt.value_trace->push_back(ev.value);
    int flat_steps = 0;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        Vec gf = ev.frame.to_frame(ev.gradient);
        const double gn = euclidean_norm(gf);
        out.stats.iterations = iter;
        out.stats.final_gradient_norm = gn;
        if (gn <= opt.grad_tol ||
            (flat_steps >= opt.stagnation_steps && gn <= opt.stagnation_grad)) {
            out.kind = BarycenterResult::Kind::Interior;
            out.interior = y;
            out.functional_value = mass * ev.value;
            return out;
        }

        Eigen::VectorXd rhs(m);
        for (int i = 0; i < m; ++i) rhs(i) = -gf[i];
        Eigen::VectorXd p = ev.hessian.ldlt().solve(rhs);
        double slope = 0.0;
        for (int i = 0; i < m; ++i) slope += p(i) * gf[i];
        if (!p.allFinite() || slope >= 0.0) {
            p = rhs; // steepest descent fallback
            slope = -rhs.squaredNorm();
        }
        double pn = p.norm();
        if (pn > 10.0) {
            p *= 10.0 / pn;
            slope *= 10.0 / pn;
        }

        Vec pf(m);
        for (int i = 0; i < m; ++i) pf[i] = p(i);
        Vec pa = ev.frame.to_ambient(pf);

        double step = 1.0;
        bool accepted = false;
        // Armijo with a rounding floor: near the minimizer the predicted
        // decrease drops below the value's resolution and a strict test
        // would reject every step.
        const double floor = 8.0 * 2.2e-16 * (std::abs(ev.value) + 1.0);
        for (int ls = 0; ls < 60; ++ls) {
            Point cand = exp_map(y, pa * step);
            FunctionalEval cev = functional_eval(na, nv, cand);
            if (cev.value <= ev.value + 1e-4 * step * slope + floor) {
                flat_steps = (ev.value - cev.value <= floor) ? flat_steps + 1 : 0;
                y = cand;
                ev = std::move(cev);
                accepted = true;
                if (opt.value_trace) opt.value_trace->push_back(ev.value);
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw NumericalError("solve_barycenter: line search stalled (near-degenerate measure)");
    }
    throw NumericalError("solve_barycenter: iteration cap exceeded (near-degenerate measure)");
}

inline BarycenterResult solve_barycenter(const VisualMixture& visual,
                                         const SolverOptions& opt = {}) {
    return solve_barycenter(AtomicBoundaryMeasure{}, visual, opt);
}

inline BarycenterResult solve_barycenter(const AtomicBoundaryMeasure& atomic,
                                         const SolverOptions& opt = {}) {
    return solve_barycenter(atomic, VisualMixture{}, opt);
}

// ---------------------------------------------------------------------------
// Pushforward and total variation

inline AtomicBoundaryMeasure pushforward(const Isometry& g, const AtomicBoundaryMeasure& mu) {
    AtomicBoundaryMeasure out;
    out.atoms.reserve(mu.atoms.size());
    for (const auto& a : mu.atoms) out.atoms.push_back({a.weight, g.apply(a.point)});
    return out;
}

inline VisualMixture pushforward(const Isometry& g, const VisualMixture& mix) {
    std::vector<std::pair<double, Point>> terms;
    terms.reserve(mix.size());
    for (size_t i = 0; i < mix.size(); ++i)
        terms.emplace_back(mix.weight(i), Point(g.apply_raw(mix.center_raw(i))));
    return VisualMixture::from_terms(terms);
}

namespace detail {

/// Reference boundary directions used as separating coordinates when
/// matching centers; fixed per dimension, deterministic.
inline const std::vector<BoundaryPoint>& reference_directions(int m) {
    static std::mutex mu;
    static std::unordered_map<int, std::vector<BoundaryPoint>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    std::vector<BoundaryPoint> dirs;
    std::mt19937_64 rng(0x5eed5eedULL + m);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int d = 0; d < m + 2; ++d) {
        Vec u(m);
        double nn = 0.0;
        do {
            for (int i = 0; i < m; ++i) u[i] = nd(rng);
            nn = euclidean_norm(u);
        } while (nn < 1e-3);
        dirs.push_back(BoundaryPoint::from_direction(u * (1.0 / nn)));
    }
    return cache.emplace(m, std::move(dirs)).first->second;
}

struct MatchItem {
    std::vector<double> keys; // separating coordinates, 1-Lipschitz in distance
    double weight;
    int side;
};

/// Group items whose coordinates agree within tol in every key, by
/// hierarchical sweeps; returns the summed per-side weight differences.
/// Exact for inputs whose points are either coincident (within tol) or
/// far apart, which is the contract of orbit-built mixtures.
inline double matched_tv(std::vector<MatchItem>& items, double tol) {
    double tv = 0.0;
    // recursive grouping over key index
    struct Rec {
        double tol;
        double* tv;
        void run(std::vector<MatchItem*>& group, size_t key_idx) {
            if (group.empty()) return;
            if (key_idx >= group[0]->keys.size()) {
                double w0 = 0.0, w1 = 0.0;
                for (auto* it : group) (it->side == 0 ? w0 : w1) += it->weight;
                *tv += std::abs(w0 - w1);
                return;
            }
            std::stable_sort(group.begin(), group.end(),
                             [&](const MatchItem* a, const MatchItem* b) {
                                 return a->keys[key_idx] < b->keys[key_idx];
                             });
            std::vector<MatchItem*> sub;
            for (size_t i = 0; i < group.size(); ++i) {
                if (!sub.empty() &&
                    group[i]->keys[key_idx] - sub.back()->keys[key_idx] > tol) {
                    run(sub, key_idx + 1);
                    sub.clear();
                }
                sub.push_back(group[i]);
            }
            run(sub, key_idx + 1);
        }
    };
    std::vector<MatchItem*> all;
    all.reserve(items.size());
    for (auto& it : items) all.push_back(&it);
    Rec rec{tol, &tv};
    rec.run(all, 0);
    return tv;
}

} // namespace detail

/// Total variation distance between visual mixtures, computed by
/// matching centers within 1e-8 (hyperbolic distance) and summing
/// weight differences plus unmatched mass. Exact when the two center
/// sets align within the tolerance, which is the intended use; not a
/// general TV computation.
inline double tv_distance(const VisualMixture& a, const VisualMixture& b) {
    if (a.size() > 0 && b.size() > 0 && a.dim() != b.dim())
        throw InputError("tv_distance: dimension mismatch");
    const int m = a.size() > 0 ? a.dim() : b.dim();
    const auto& dirs = detail::reference_directions(m);
    std::vector<detail::MatchItem> items;
    items.reserve(a.size() + b.size());
    auto add = [&](const VisualMixture& mix, int side) {
        for (size_t i = 0; i < mix.size(); ++i) {
            detail::MatchItem it;
            it.side = side;
            it.weight = mix.weight(i);
            Point z = mix.center(i);
            it.keys.reserve(dirs.size());
            for (const auto& d : dirs) it.keys.push_back(busemann(z, d).value);
            items.push_back(std::move(it));
        }
    };
    add(a, 0);
    add(b, 1);
    return detail::matched_tv(items, 1e-8);
}

/// Total variation distance between atomic boundary measures, matching
/// atoms within 1e-8 chordal distance.
inline double tv_distance(const AtomicBoundaryMeasure& a, const AtomicBoundaryMeasure& b) {
    if (!a.atoms.empty() && !b.atoms.empty() && a.dim() != b.dim())
        throw InputError("tv_distance: dimension mismatch");
    const int m = !a.atoms.empty() ? a.dim() : b.dim();
    const auto& dirs = detail::reference_directions(m);
    std::vector<detail::MatchItem> items;
    auto add = [&](const AtomicBoundaryMeasure& mu, int side) {
        for (const auto& atom : mu.atoms) {
            detail::MatchItem it;
            it.side = side;
            it.weight = atom.weight;
            Vec u = atom.point.direction();
            for (const auto& d : dirs) it.keys.push_back(euclidean_dot(u, d.direction()));
            items.push_back(std::move(it));
        }
    };
    add(a, 0);
    add(b, 1);
    return detail::matched_tv(items, 1e-8);
}

} // namespace natlab
