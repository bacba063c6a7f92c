#pragma once

// The orbit-weighted barycenter map: mixtures of visual measures with
// exponential orbit weights, its evaluation, finite-difference Jacobian,
// cusp-ray diagnostics, and the invariance-defect measurement.

#include <functional>
#include <optional>
#include <string>

#include "natlab/barycenter.hpp"
#include "natlab/groups.hpp"

namespace natlab {

struct NaturalMapConfig {
    double epsilon = 0.1;       // > 0; exponent s = (k-1)(1+epsilon)
    int word_length = 6;        // orbit truncation used by callers that build orbits
    double fd_step = 1e-4;      // normal-coordinate step for the differential
    double weight_floor = 1e-16; // relative weight drop threshold

    double s(int k) const {
        if (!(epsilon > 0.0)) throw InputError("NaturalMapConfig: epsilon must be positive");
        return (k - 1) * (1.0 + epsilon);
    }
};

/// Mixture sum_gamma e^{-s (d(x, gamma O) - d(x, O))} * (visual measure
/// at rho(gamma) O'). The subtraction of d(x, O) rescales the classical
/// weights by a positive constant, which leaves the barycenter unchanged
/// and keeps the identity term at weight exactly 1.
inline VisualMixture build_lambda(const Point& x, const WeightedOrbit& orbit,
                                  const NaturalMapConfig& cfg) {
    if (orbit.size() == 0) throw InputError("build_lambda: empty orbit");
    const double s = cfg.s(orbit.k);
    const double d0 = dist(x, orbit.base_domain);

    std::vector<double> w(orbit.size());
    double wmax = 0.0;
    for (size_t i = 0; i < orbit.size(); ++i) {
        w[i] = std::exp(-s * (dist(x, orbit.domain_point(i)) - d0));
        wmax = std::max(wmax, w[i]);
    }
    if (!(wmax > 0.0)) throw NumericalError("build_lambda: all weights underflowed");

    std::vector<double> weights;
    std::vector<uint32_t> index;
    weights.reserve(orbit.size());
    for (size_t i = 0; i < orbit.size(); ++i) {
        if (w[i] >= cfg.weight_floor * wmax) {
            weights.push_back(w[i]);
            index.push_back(static_cast<uint32_t>(i));
        }
    }
    if (index.size() == orbit.size()) index.clear(); // full view
    return VisualMixture::over_orbit(orbit.target_pool(), orbit.n, std::move(weights),
                                     std::move(index));
}

struct NaturalMapEvaluation {
    Point x;
    Point value;
    double lambda_mass = 0.0;
    SolverStats solver_stats;
};

inline NaturalMapEvaluation eval_natural_map(const Point& x, const WeightedOrbit& orbit,
                                             const NaturalMapConfig& cfg,
                                             std::optional<Point> warm_start = {}) {
    VisualMixture lambda = build_lambda(x, orbit, cfg);
    SolverOptions opt;
    opt.initial = std::move(warm_start);
    BarycenterResult res = solve_barycenter(lambda, opt);
    if (res.kind != BarycenterResult::Kind::Interior)
        throw NumericalError("eval_natural_map: barycenter left the interior");
    NaturalMapEvaluation out;
    out.x = x;
    out.value = res.interior;
    out.lambda_mass = lambda.mass();
    out.solver_stats = res.stats;
    return out;
}

struct JacobianResult {
    double jac = 0.0;             // k-volume scaling factor sqrt(det D^T D)
    Eigen::MatrixXd differential; // n x k between orthonormal frames
    Point value;                  // F(x)
};

/// Central finite differences of the map in geodesic normal coordinates
/// at x, expressed between orthonormal frames at x and F(x).
inline JacobianResult jacobian(const Point& x, const WeightedOrbit& orbit,
                               const NaturalMapConfig& cfg) {
    const int k = orbit.k, n = orbit.n;
    NaturalMapEvaluation center = eval_natural_map(x, orbit, cfg);
    TangentFrame fx = tangent_frame(x);
    TangentFrame fF = tangent_frame(center.value);

    JacobianResult out;
    out.value = center.value;
    out.differential = Eigen::MatrixXd(n, k);
    const double h = cfg.fd_step;
    for (int d = 0; d < k; ++d) {
        Point xp = exp_map(x, fx.e[d] * h);
        Point xm = exp_map(x, fx.e[d] * (-h));
        Point Fp = eval_natural_map(xp, orbit, cfg, center.value).value;
        Point Fm = eval_natural_map(xm, orbit, cfg, center.value).value;
        Vec diff = (log_map(center.value, Fp) - log_map(center.value, Fm)) * (0.5 / h);
        Vec col = fF.to_frame(diff);
        for (int r = 0; r < n; ++r) out.differential(r, d) = col[r];
    }
    Eigen::MatrixXd gram = out.differential.transpose() * out.differential;
    out.jac = std::sqrt(std::max(gram.determinant(), 0.0));
    return out;
}

// ---------------------------------------------------------------------------
// Invariance defect

/// || rho(psi)_* lambda_x - lambda_x || / || lambda_x || over the same
/// truncated orbit; mass that the re-indexing pushes past the truncation
/// boundary counts as unmatched.
inline double invariance_defect(const Point& x, const Word& psi, const RepresentationData& rep,
                                const WeightedOrbit& orbit, const NaturalMapConfig& cfg) {
    VisualMixture lambda = build_lambda(x, orbit, cfg);
    Isometry rho_psi = rep.target_element(psi);
    if (rho_psi.is_identity()) return 0.0;
    VisualMixture pushed = pushforward(rho_psi, lambda);
    return tv_distance(pushed, lambda) / lambda.mass();
}

// ---------------------------------------------------------------------------
// Cusp-ray diagnostics

struct RaySample {
    double t = 0.0;
    bool ok = false;
    Point value;              // F(alpha(t))
    double dist_to_fixset = 0.0; // ball-model Euclidean distance
    double defect_ratio = 0.0;   // max over cusp generators
    std::string error;
};

struct RayDiagnostics {
    double epsilon = 0.0;
    BoundaryPoint xi;
    FixedSet target_fix;
    std::vector<RaySample> samples;
    size_t orbit_entries = 0; // size of the orbit the samples were computed from
};

struct RayOptions {
    bool saturate = true; // augment the orbit with the cusp lattice
    SaturationParams saturation;
};

/// Diagnostics along the ray from O into the cusp: the natural-map image,
/// its ball-model distance to the fixed set of the image cusp group
/// (including invariant geodesics), and the invariance-defect ratio.
inline RayDiagnostics ray_trace(const RepresentationData& rep, const CuspData& cusp,
                                const WeightedOrbit& orbit, const NaturalMapConfig& cfg,
                                const std::vector<double>& ts, const RayOptions& opt = {}) {
    if (ts.empty()) throw InputError("ray_trace: no sample parameters");
    for (size_t i = 1; i < ts.size(); ++i)
        if (!(ts[i] > ts[i - 1])) throw InputError("ray_trace: parameters must increase");

    auto cfp = cusp_fixed_point(rep, cusp);
    RayDiagnostics out;
    out.epsilon = cfg.epsilon;
    out.xi = cfp.xi;
    out.target_fix = cfp.target_fix;

    const WeightedOrbit* work = &orbit;
    WeightedOrbit saturated;
    if (opt.saturate) {
        saturated = saturate_cusp_orbit(rep, cusp, orbit, ts.back(), opt.saturation);
        work = &saturated;
    }
    out.orbit_entries = work->size();

    const Point O = orbit.base_domain;
    std::optional<Point> warm;
    for (double t : ts) {
        RaySample sample;
        sample.t = t;
        try {
            Point xt = geodesic(O, cfp.xi, t);
            auto ev = eval_natural_map(xt, *work, cfg, warm);
            warm = ev.value;
            sample.value = ev.value;
            sample.dist_to_fixset = ball_distance_to_fixed_set(cfp.target_fix, ev.value);
            double defect = 0.0;
            for (const Word& psi : cusp.parabolic_gens)
                defect = std::max(defect, invariance_defect(xt, psi, rep, *work, cfg));
            sample.defect_ratio = defect;
            sample.ok = true;
        } catch (const std::exception& e) {
            sample.ok = false;
            sample.error = e.what();
        }
        out.samples.push_back(std::move(sample));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Epsilon sweep

struct SweepEntry {
    double epsilon = 0.0;
    bool ok = false;
    Point value;
    double jac = 0.0;
    std::string error;
};

/// Evaluations of the map at fixed x for a decreasing ladder of epsilon,
/// used to exhibit the small-epsilon convergence trend.
inline std::vector<SweepEntry> epsilon_sweep(const Point& x, const WeightedOrbit& orbit,
                                             const std::vector<double>& epsilons,
                                             const NaturalMapConfig& base_cfg = {}) {
    for (size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw InputError("epsilon_sweep: epsilon must be positive");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
            throw InputError("epsilon_sweep: epsilons must decrease");
    }
    std::vector<SweepEntry> out;
    for (double eps : epsilons) {
        SweepEntry entry;
        entry.epsilon = eps;
        NaturalMapConfig cfg = base_cfg;
        cfg.epsilon = eps;
        try {
            auto jr = jacobian(x, orbit, cfg);
            entry.value = jr.value;
            entry.jac = jr.jac;
            entry.ok = true;
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace natlab
