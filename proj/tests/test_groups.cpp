#include <catch2/catch_amalgamated.hpp>

#include "natlab/groups.hpp"
#include "test_util.hpp"

using namespace natlab;
using natlab::testing::figure8_identity_rep;
using natlab::testing::z2_cusp_rep;

namespace {

/// Schottky-style free pair: long boosts along orthogonal axes.
RepresentationData free_rank2_rep() {
    auto boost = [](int axis, double t) {
        Mat m = Mat::identity(4);
        m(0, 0) = std::cosh(t);
        m(0, axis) = std::sinh(t);
        m(axis, 0) = std::sinh(t);
        m(axis, axis) = std::cosh(t);
        return Isometry(m);
    };
    RepresentationData rep;
    rep.k = rep.n = 3;
    rep.domain_gens = {boost(1, 3.0), boost(2, 3.0)};
    rep.target_images = rep.domain_gens;
    return rep;
}

} // namespace

TEST_CASE("validate_representation on the trivial representation", "[groups]") {
    RepresentationData rep = figure8_identity_rep();
    for (auto& g : rep.target_images) g = Isometry::identity(3);
    auto report = validate_representation(rep);
    CHECK(report.pass());
    CHECK(report.relator_residual_target[0] == 0.0);
}

TEST_CASE("validate_representation accepts the bundled group data", "[groups]") {
    auto report = validate_representation(figure8_identity_rep());
    CHECK(report.max_residual <= 1e-12);
    CHECK(report.domain_gen_types[0] == IsomType::Parabolic);
    CHECK(report.domain_gen_types[1] == IsomType::Parabolic);
}

TEST_CASE("validate_representation flags a corrupted matrix", "[groups]") {
    RepresentationData rep = figure8_identity_rep();
    Mat m = rep.target_images[0].matrix();
    m(1, 2) += 1e-3;
    // the perturbed matrix is no longer Lorentz at tolerance, so the
    // corruption surfaces on construction
    CHECK_THROWS_AS(Isometry(m), InputError);

    // a subtler corruption: a valid isometry that breaks the relation
    rep.target_images[0] = sl2c_to_lorentz({1.0, 0.999, 0.0, 1.0});
    auto report = validate_representation(rep);
    CHECK_FALSE(report.pass());
    CHECK(report.max_residual > 1e-9);
}

TEST_CASE("validate_representation rejects mismatched generator counts", "[groups]") {
    RepresentationData rep = figure8_identity_rep();
    rep.target_images.pop_back();
    CHECK_THROWS_AS(validate_representation(rep), InputError);
}

TEST_CASE("enumerate_orbit of the trivial group", "[groups]") {
    RepresentationData rep;
    rep.k = rep.n = 3;
    WeightedOrbit orbit = enumerate_orbit(rep, 5);
    REQUIRE(orbit.size() == 1);
    CHECK(orbit.dist0(0) == 0.0);
    CHECK(dist(orbit.target_point(0), Point::origin(3)) == 0.0);
}

TEST_CASE("enumerate_orbit counts reduced words of a free pair", "[groups]") {
    RepresentationData rep = free_rank2_rep();
    CHECK(enumerate_orbit(rep, 1).size() == 5);
    CHECK(enumerate_orbit(rep, 2).size() == 17);
    CHECK(enumerate_orbit(rep, 3).size() == 53);
}

TEST_CASE("enumerate_orbit deduplicates relation collisions", "[groups]") {
    // Z^2: ab and ba collide at length 2; 12 reduced words give 8 elements
    WeightedOrbit orbit = enumerate_orbit(z2_cusp_rep(), 2);
    CHECK(orbit.size() == 13);

    // brute-force dedup correctness on this small orbit
    for (size_t i = 0; i < orbit.size(); ++i)
        for (size_t j = i + 1; j < orbit.size(); ++j) {
            const bool both_close =
                dist(orbit.domain_point(i), orbit.domain_point(j)) < kOrbitDedupTol &&
                dist(orbit.target_point(i), orbit.target_point(j)) < kOrbitDedupTol;
            CHECK_FALSE(both_close);
        }
}

TEST_CASE("enumerate_orbit is deterministic and distance-sorted", "[groups][property]") {
    WeightedOrbit a = enumerate_orbit(figure8_identity_rep(), 4);
    WeightedOrbit b = enumerate_orbit(figure8_identity_rep(), 4);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a.word(i) == b.word(i));
        CHECK(a.dist0(i) == b.dist0(i));
        if (i > 0) CHECK(a.dist0(i) >= a.dist0(i - 1));
    }
}

TEST_CASE("enumerate_orbit enforces the size cap", "[groups]") {
    CHECK_THROWS_AS(enumerate_orbit(figure8_identity_rep(), 6, 100), InputError);
}

TEST_CASE("poincare_series basics", "[groups]") {
    RepresentationData trivial;
    trivial.k = trivial.n = 3;
    WeightedOrbit orbit = enumerate_orbit(trivial, 3);
    auto r = poincare_series(orbit, 2.2, Point::origin(3));
    CHECK(r.value == 1.0);
    CHECK(r.tail_bound == 0.0);
    CHECK_FALSE(r.below_critical);
}

TEST_CASE("poincare_series is monotone in s and in L", "[groups][property]") {
    RepresentationData rep = figure8_identity_rep();
    const Point O = Point::origin(3);
    WeightedOrbit o4 = enumerate_orbit(rep, 4);
    double prev = std::numeric_limits<double>::infinity();
    for (double s : {2.0, 2.2, 2.5, 3.0, 4.0}) {
        const double v = poincare_series(o4, s, O).value;
        CHECK(v < prev);
        prev = v;
    }
    // positive terms: partial sums nondecreasing in L
    double prev_l = 0.0;
    for (int L : {0, 1, 2, 3, 4, 5}) {
        const double v = poincare_series(enumerate_orbit(rep, L), 2.2, O).value;
        CHECK(v >= prev_l);
        prev_l = v;
    }
    CHECK(poincare_series(o4, 1.5, O).below_critical);
}

TEST_CASE("cusp_fixed_point of the bundled cusp", "[groups]") {
    RepresentationData rep = figure8_identity_rep();
    auto cfp = cusp_fixed_point(rep, rep.cusps[0]);
    CHECK(cfp.xi.chordal(sl2c_boundary_infinity()) < 1e-8);
    // identity representation: the target fixed set is the same point
    REQUIRE(cfp.target_fix.boundary_points.size() == 1);
    CHECK(cfp.target_fix.boundary_points[0].chordal(sl2c_boundary_infinity()) < 1e-8);
    CHECK(cfp.target_fix.description == FixedSetKind::Ideal);
}

TEST_CASE("cusp_fixed_point with trivial target images", "[groups]") {
    RepresentationData rep = figure8_identity_rep();
    for (auto& g : rep.target_images) g = Isometry::identity(3);
    auto cfp = cusp_fixed_point(rep, rep.cusps[0]);
    CHECK(cfp.target_fix.description == FixedSetKind::Pointwise);
    CHECK(cfp.target_fix.everything);
}

TEST_CASE("cusp_fixed_point with a common translation axis downstairs", "[groups]") {
    RepresentationData rep = z2_cusp_rep();
    const SL2C h1{std::exp(0.5), 0.0, 0.0, std::exp(-0.5)};
    const SL2C h2{std::exp(0.5 * std::sqrt(2.0)), 0.0, 0.0, std::exp(-0.5 * std::sqrt(2.0))};
    rep.target_images = {sl2c_to_lorentz(h1), sl2c_to_lorentz(h2)};
    auto cfp = cusp_fixed_point(rep, rep.cusps[0]);
    REQUIRE(cfp.target_fix.invariant_geodesics.size() >= 1);
    CHECK(cfp.target_fix.boundary_points.size() == 2);
}

TEST_CASE("cusp_fixed_point rejects non-parabolic cusp generators", "[groups]") {
    RepresentationData rep = z2_cusp_rep();
    const SL2C hyp{std::exp(0.5), 0.0, 0.0, std::exp(-0.5)};
    rep.domain_gens[1] = sl2c_to_lorentz(hyp);
    rep.target_images = rep.domain_gens;
    CHECK_THROWS_AS(cusp_fixed_point(rep, rep.cusps[0]), InputError);
}

TEST_CASE("fuchsian data: domain and target residuals agree", "[groups]") {
    auto report = validate_representation(figure8_identity_rep());
    for (size_t i = 0; i < report.relator_residual_domain.size(); ++i)
        CHECK(std::abs(report.relator_residual_domain[i] - report.relator_residual_target[i]) <=
              1e-12);
}

TEST_CASE("horospherical coordinates see parabolic translations", "[groups]") {
    RepresentationData rep = z2_cusp_rep();
    auto cfp = cusp_fixed_point(rep, rep.cusps[0]);
    HoroFrame frame = HoroFrame::build(cfp.xi);
    const Point O = Point::origin(3);

    auto c0 = frame.coords(O.coords());
    CHECK_THAT(c0.height, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK(euclidean_norm(c0.u) < 1e-12);

    // each generator translates u by a fixed vector and keeps heights
    for (int gi = 0; gi < 2; ++gi) {
        auto c1 = frame.coords(rep.domain_gens[gi].apply_raw(O.coords()));
        CHECK_THAT(c1.height, Catch::Matchers::WithinAbs(0.0, 1e-10));
        CHECK_THAT(euclidean_norm(c1.u), Catch::Matchers::WithinAbs(1.0, 1e-10));
        Point deep = geodesic(O, cfp.xi, -1.2); // away from the cusp
        auto before = frame.coords(deep.coords());
        auto after = frame.coords(rep.domain_gens[gi].apply_raw(deep.coords()));
        CHECK_THAT(after.height - before.height, Catch::Matchers::WithinAbs(0.0, 1e-10));
        Vec delta = after.u - before.u;
        Vec tau = c1.u - c0.u;
        CHECK(euclidean_norm(delta - tau) < 1e-9);
    }
}

TEST_CASE("cusp lattice saturation covers the lattice ball", "[groups]") {
    RepresentationData rep = z2_cusp_rep();
    WeightedOrbit bulk = enumerate_orbit(rep, 2);
    SaturationParams par;
    par.radius_factor = 3.0;
    WeightedOrbit sat = saturate_cusp_orbit(rep, rep.cusps[0], bulk, 2.0, par);

    // single coset (the group IS the lattice): ball of radius 3 e
    const double R = 3.0 * std::exp(1.0);
    size_t expect = 0;
    const int m = static_cast<int>(R) + 1;
    for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j)
            if (std::hypot(static_cast<double>(i), static_cast<double>(j)) <= R) ++expect;
    CHECK(sat.size() == expect);

    // entries are genuine orbit points: re-reduce and land at the origin
    CuspLattice lat = CuspLattice::build(rep, rep.cusps[0], cusp_fixed_point(rep, rep.cusps[0]).xi);
    for (size_t i = 0; i < sat.size(); i += 97) {
        auto v = lat.reduce(sat.domain_raw(i));
        for (int& c : v) c = -c;
        Point back(lat.apply_domain(v, sat.domain_raw(i)));
        CHECK(dist(back, Point::origin(3)) < 1e-9);
    }

    // determinism
    WeightedOrbit sat2 = saturate_cusp_orbit(rep, rep.cusps[0], bulk, 2.0, par);
    REQUIRE(sat2.size() == sat.size());
    for (size_t i = 0; i < sat.size(); i += 53)
        CHECK(dist(sat.domain_point(i), sat2.domain_point(i)) == 0.0);
}

TEST_CASE("saturation keeps low cosets of the knot group", "[groups]") {
    RepresentationData rep = figure8_identity_rep();
    WeightedOrbit bulk = enumerate_orbit(rep, 4);
    SaturationParams par;
    par.radius_factor = 3.0;
    par.coset_height_cap = 1.5;
    WeightedOrbit sat = saturate_cusp_orbit(rep, rep.cusps[0], bulk, 2.0, par);
    CHECK(sat.size() > bulk.size());
    // identity must be present: some entry at distance ~0
    double dmin = 1e9;
    for (size_t i = 0; i < sat.size(); ++i) dmin = std::min(dmin, sat.dist0(i));
    CHECK(dmin < 1e-9);
}
