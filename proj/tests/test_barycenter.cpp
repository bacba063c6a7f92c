#include <catch2/catch_amalgamated.hpp>

#include "natlab/barycenter.hpp"
#include "test_util.hpp"

using namespace natlab;
using natlab::testing::random_boundary;
using natlab::testing::random_isometry;
using natlab::testing::random_point;

namespace {

AtomicBoundaryMeasure random_atomic(std::mt19937_64& rng, int m, int count) {
    std::uniform_real_distribution<double> ur(0.2, 1.0);
    AtomicBoundaryMeasure mu;
    for (int i = 0; i < count; ++i) mu.atoms.push_back({ur(rng), random_boundary(rng, m)});
    return mu;
}

VisualMixture random_mixture(std::mt19937_64& rng, int m, int count, double spread = 2.0) {
    std::uniform_real_distribution<double> ur(0.2, 1.0);
    std::vector<std::pair<double, Point>> terms;
    for (int i = 0; i < count; ++i) terms.emplace_back(ur(rng), random_point(rng, m, spread));
    return VisualMixture::from_terms(terms);
}

} // namespace

TEST_CASE("radial profile shape", "[barycenter]") {
    for (int n : {2, 3, 4}) {
        const RadialProfile& p = RadialProfile::get(n);
        CHECK_THAT(p.g(0.0), Catch::Matchers::WithinAbs(0.0, 1e-12));
        CHECK_THAT(p.dg(0.0), Catch::Matchers::WithinAbs(0.0, 1e-10));
        double prev_g = -1e-12, prev_dg = -1e-12;
        for (double r = 0.1; r <= 25.0; r += 0.37) {
            CHECK(p.g(r) > prev_g);               // increasing
            CHECK(p.dg(r) >= prev_dg - 1e-12);    // convex (rounding slack)
            CHECK(p.dg(r) < 1.0);                 // slope below 1
            CHECK(p.ddg(r) > 0.0);
            prev_g = p.g(r);
            prev_dg = p.dg(r);
        }
        CHECK(p.dg(35.0) > 1.0 - 1e-9); // slope tends to 1
    }
}

TEST_CASE("radial profile matches the closed forms", "[barycenter][oracle]") {
    // n = 2: g(r) = 2 log cosh(r/2); n = 3: g(r) = r coth r - 1
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> ur(0.0, 20.0);
    const RadialProfile& p2 = RadialProfile::get(2);
    const RadialProfile& p3 = RadialProfile::get(3);
    for (int i = 0; i < 100; ++i) {
        const double r = ur(rng);
        CHECK_THAT(RadialProfile::quadrature_g(2, r) - 2.0 * std::log(std::cosh(0.5 * r)),
                   Catch::Matchers::WithinAbs(0.0, 1e-8));
        CHECK_THAT(p2.g(r) - 2.0 * std::log(std::cosh(0.5 * r)),
                   Catch::Matchers::WithinAbs(0.0, 1e-8));
        const double g3 = (r < 1e-8) ? 0.0 : r / std::tanh(r) - 1.0;
        CHECK_THAT(p3.g(r) - g3, Catch::Matchers::WithinAbs(0.0, 1e-8));
    }
}

TEST_CASE("radial profile spline agrees with direct quadrature", "[barycenter][oracle]") {
    std::mt19937_64 rng(987);
    std::uniform_real_distribution<double> ur(0.0, 20.0);
    for (int n : {3, 4}) {
        const RadialProfile& p = RadialProfile::get(n);
        for (int i = 0; i < 100; ++i) {
            const double r = ur(rng);
            CHECK_THAT(p.g(r) - RadialProfile::quadrature_g(n, r),
                       Catch::Matchers::WithinAbs(0.0, 1e-9));
            CHECK_THAT(p.dg(r) - RadialProfile::quadrature_dg(n, r),
                       Catch::Matchers::WithinAbs(0.0, 1e-9));
        }
    }
}

TEST_CASE("functional of a single visual measure is minimal at its center", "[barycenter]") {
    std::mt19937_64 rng(5);
    for (int it = 0; it < 10; ++it) {
        Point y = random_point(rng, 3);
        VisualMixture mix = VisualMixture::from_terms({{1.0, y}});
        auto ev = functional_eval({}, mix, y);
        CHECK(euclidean_norm(ev.frame.to_frame(ev.gradient)) < 1e-12);
    }
}

TEST_CASE("functional is linear in the measure", "[barycenter]") {
    std::mt19937_64 rng(6);
    AtomicBoundaryMeasure mu = random_atomic(rng, 3, 4);
    VisualMixture mix = random_mixture(rng, 3, 5);
    Point y = random_point(rng, 3);
    auto base = functional_eval(mu, mix, y);

    AtomicBoundaryMeasure mu3 = mu;
    for (auto& a : mu3.atoms) a.weight *= 3.0;
    VisualMixture mix3 = mix;
    for (auto& w : mix3.mutable_weights()) w *= 3.0;
    mix3.recompute_mass();
    auto scaled = functional_eval(mu3, mix3, y);
    CHECK_THAT(scaled.value - 3.0 * base.value, Catch::Matchers::WithinAbs(0.0, 1e-10));
}

TEST_CASE("atomic functional Hessian is positive definite off two-point support",
          "[barycenter][property]") {
    std::mt19937_64 rng(7);
    AtomicBoundaryMeasure mu = random_atomic(rng, 3, 4);
    for (int it = 0; it < 50; ++it) {
        Point y = random_point(rng, 3, 2.5);
        auto ev = functional_eval(mu, {}, y);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ev.hessian);
        CHECK(es.eigenvalues()(0) > 0.0);
    }
}

TEST_CASE("analytic gradient matches central finite differences", "[barycenter][property]") {
    std::mt19937_64 rng(8);
    const double h = 1e-5;
    for (int it = 0; it < 100; ++it) {
        const int m = 2 + static_cast<int>(rng() % 3);
        AtomicBoundaryMeasure mu = random_atomic(rng, m, 3);
        VisualMixture mix = random_mixture(rng, m, 4);
        Point y = random_point(rng, m, 2.0);
        auto ev = functional_eval(mu, mix, y);
        TangentFrame frame = ev.frame;
        Vec gf = frame.to_frame(ev.gradient);
        for (int dir = 0; dir < m; ++dir) {
            Vec e = frame.e[dir];
            const double fp = functional_eval(mu, mix, exp_map(y, e * h)).value;
            const double fm = functional_eval(mu, mix, exp_map(y, e * (-h))).value;
            CHECK_THAT((fp - fm) / (2.0 * h) - gf[dir], Catch::Matchers::WithinAbs(0.0, 1e-6));
        }
    }
}

TEST_CASE("barycenter of one visual measure is its center", "[barycenter]") {
    std::mt19937_64 rng(9);
    for (int it = 0; it < 10; ++it) {
        Point y = random_point(rng, 3);
        auto res = solve_barycenter(VisualMixture::from_terms({{1.0, y}}));
        REQUIRE(res.kind == BarycenterResult::Kind::Interior);
        CHECK(dist(res.interior, y) < 1e-8);
        CHECK(res.stats.final_gradient_norm <= 1e-10);
    }
}

TEST_CASE("two equal boundary atoms give the joining geodesic", "[barycenter]") {
    std::mt19937_64 rng(10);
    BoundaryPoint t1 = random_boundary(rng, 3), t2 = random_boundary(rng, 3);
    AtomicBoundaryMeasure mu;
    mu.atoms = {{0.5, t1}, {0.5, t2}};
    auto res = solve_barycenter(mu);
    REQUIRE(res.kind == BarycenterResult::Kind::Geodesic);
    CHECK(res.geodesic_endpoints.first.chordal(t1) < 1e-12);
    CHECK(res.geodesic_endpoints.second.chordal(t2) < 1e-12);

    // the functional is constant along the joining geodesic
    for (double s : {-1.3, 0.0, 2.1}) {
        Point on = detail::geodesic_between_ideal(t1, t2, s);
        auto ev = functional_eval(mu, {}, on);
        CHECK_THAT(ev.value - res.functional_value, Catch::Matchers::WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("a heavy boundary atom sends the minimum to the boundary", "[barycenter]") {
    std::mt19937_64 rng(11);
    BoundaryPoint theta = random_boundary(rng, 3);
    AtomicBoundaryMeasure mu;
    mu.atoms = {{0.6, theta}};
    VisualMixture mix = VisualMixture::from_terms({{0.4, Point::origin(3)}});
    auto res = solve_barycenter(mu, mix);
    REQUIRE(res.kind == BarycenterResult::Kind::Boundary);
    CHECK(res.boundary.chordal(theta) < 1e-12);
    CHECK(res.functional_value == -std::numeric_limits<double>::infinity());

    // the functional really is unbounded below along the ray toward theta
    double prev = functional_eval(mu, mix, Point::origin(3)).value;
    for (double t : {2.0, 4.0, 6.0}) {
        const double v = functional_eval(mu, mix, geodesic(Point::origin(3), theta, t)).value;
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("barycenter is scale invariant", "[barycenter][property]") {
    std::mt19937_64 rng(12);
    AtomicBoundaryMeasure mu = random_atomic(rng, 3, 5);
    VisualMixture mix = random_mixture(rng, 3, 4);
    auto base = solve_barycenter(mu, mix);
    REQUIRE(base.kind == BarycenterResult::Kind::Interior);
    for (double c : {1e-3, 0.1, 7.0, 1e3}) {
        AtomicBoundaryMeasure cmu = mu;
        for (auto& a : cmu.atoms) a.weight *= c;
        VisualMixture cmix = mix;
        for (auto& w : cmix.mutable_weights()) w *= c;
        cmix.recompute_mass();
        auto res = solve_barycenter(cmu, cmix);
        REQUIRE(res.kind == BarycenterResult::Kind::Interior);
        CHECK(dist(res.interior, base.interior) <= 1e-10);
        CHECK_THAT(res.functional_value - c * base.functional_value,
                   Catch::Matchers::WithinAbs(0.0, 1e-8 * std::max(1.0, c)));
    }
}

TEST_CASE("barycenter is equivariant under isometries", "[barycenter][property]") {
    std::mt19937_64 rng(13);
    for (int it = 0; it < 20; ++it) {
        AtomicBoundaryMeasure mu = random_atomic(rng, 3, 5);
        Isometry g = random_isometry(rng, 3);
        auto lhs = solve_barycenter(pushforward(g, mu));
        auto rhs = solve_barycenter(mu);
        REQUIRE(lhs.kind == BarycenterResult::Kind::Interior);
        REQUIRE(rhs.kind == BarycenterResult::Kind::Interior);
        CHECK(dist(lhs.interior, g.apply(rhs.interior)) <= 1e-8);
    }
    for (int it = 0; it < 10; ++it) {
        VisualMixture mix = random_mixture(rng, 3, 5);
        Isometry g = random_isometry(rng, 3);
        auto lhs = solve_barycenter(pushforward(g, mix));
        auto rhs = solve_barycenter(mix);
        CHECK(dist(lhs.interior, g.apply(rhs.interior)) <= 1e-8);
    }
}

TEST_CASE("newton iterates strictly decrease the functional", "[barycenter][property]") {
    std::mt19937_64 rng(14);
    for (int it = 0; it < 10; ++it) {
        AtomicBoundaryMeasure mu = random_atomic(rng, 3, 4);
        VisualMixture mix = random_mixture(rng, 3, 3);
        std::vector<double> trace;
        SolverOptions opt;
        opt.value_trace = &trace;
        // start far away so several steps are needed
        opt.initial = random_point(rng, 3, 4.0);
        auto res = solve_barycenter(mu, mix, opt);
        REQUIRE(res.kind == BarycenterResult::Kind::Interior);
        // strict decrease above the value's rounding resolution
        for (size_t i = 1; i < trace.size(); ++i) {
            const double floor = 1e-14 * (std::abs(trace[i]) + 1.0);
            CHECK(trace[i] < trace[i - 1] + floor);
            if (std::abs(trace[i] - trace[i - 1]) > floor) CHECK(trace[i] < trace[i - 1]);
        }
    }
}

TEST_CASE("strict midpoint convexity along random geodesics", "[barycenter][property]") {
    std::mt19937_64 rng(15);
    AtomicBoundaryMeasure mu = random_atomic(rng, 3, 4);
    VisualMixture mix = random_mixture(rng, 3, 3);
    for (int it = 0; it < 20; ++it) {
        Point a = random_point(rng, 3, 2.5), b = random_point(rng, 3, 2.5);
        if (dist(a, b) < 1e-3) continue;
        Point mid = geodesic(a, b, 0.5 * dist(a, b));
        const double fa = functional_eval(mu, mix, a).value;
        const double fb = functional_eval(mu, mix, b).value;
        const double fm = functional_eval(mu, mix, mid).value;
        CHECK(fm < 0.5 * (fa + fb));
    }
}

TEST_CASE("barycenter is continuous under weight perturbations", "[barycenter][property]") {
    std::mt19937_64 rng(16);
    VisualMixture mix = random_mixture(rng, 3, 5);
    auto limit = solve_barycenter(mix);
    double prev_gap = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= 10; ++i) {
        VisualMixture pert = mix;
        const double f = std::pow(2.0, -i);
        for (size_t j = 0; j < pert.mutable_weights().size(); ++j)
            pert.mutable_weights()[j] *= (j % 2 == 0) ? (1.0 + f) : (1.0 - f);
        pert.recompute_mass();
        auto res = solve_barycenter(pert);
        const double gap = dist(res.interior, limit.interior);
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-2);
}

TEST_CASE("iteration cap surfaces as an error with diagnostics", "[barycenter]") {
    std::mt19937_64 rng(17);
    VisualMixture mix = random_mixture(rng, 3, 4);
    SolverOptions opt;
    opt.max_iterations = 1;
    opt.initial = random_point(rng, 3, 5.0);
    CHECK_THROWS_AS(solve_barycenter(mix, opt), NumericalError);
}

TEST_CASE("tv distance basics", "[barycenter]") {
    std::mt19937_64 rng(18);
    VisualMixture mix = random_mixture(rng, 3, 6);
    CHECK(tv_distance(mix, mix) == 0.0);

    AtomicBoundaryMeasure mu = random_atomic(rng, 3, 5);
    CHECK(tv_distance(mu, mu) == 0.0);

    Isometry g = random_isometry(rng, 3);
    CHECK_THAT(tv_distance(pushforward(g, mix), mix) -
                   tv_distance(mix, pushforward(g.inverse(), mix)),
               Catch::Matchers::WithinAbs(0.0, 1e-10));
}

TEST_CASE("tv distance matches weights and counts unmatched mass", "[barycenter]") {
    std::mt19937_64 rng(19);
    std::vector<std::pair<double, Point>> terms = {
        {1.0, random_point(rng, 3)}, {2.0, random_point(rng, 3)}, {0.5, random_point(rng, 3)}};
    VisualMixture a = VisualMixture::from_terms(terms);
    auto terms2 = terms;
    terms2[1].first = 2.25;             // weight difference 0.25
    terms2.pop_back();                   // 0.5 unmatched on side a
    terms2.emplace_back(0.75, random_point(rng, 3)); // 0.75 unmatched on side b
    VisualMixture b = VisualMixture::from_terms(terms2);
    CHECK_THAT(tv_distance(a, b), Catch::Matchers::WithinAbs(0.25 + 0.5 + 0.75, 1e-12));

    // coincident centers aggregate before matching
    VisualMixture split = VisualMixture::from_terms(
        {{0.4, terms[0].second}, {0.6, terms[0].second}, {2.0, terms[1].second},
         {0.5, terms[2].second}});
    CHECK(tv_distance(a, split) < 1e-12);
}

TEST_CASE("pushforward keeps weights and moves support", "[barycenter]") {
    std::mt19937_64 rng(20);
    AtomicBoundaryMeasure mu = random_atomic(rng, 3, 4);
    Isometry g = random_isometry(rng, 3);
    AtomicBoundaryMeasure push = pushforward(g, mu);
    REQUIRE(push.atoms.size() == mu.atoms.size());
    for (size_t i = 0; i < mu.atoms.size(); ++i) {
        CHECK(push.atoms[i].weight == mu.atoms[i].weight);
        CHECK(push.atoms[i].point.chordal(g.apply(mu.atoms[i].point)) < 1e-12);
    }
}
