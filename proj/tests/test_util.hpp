#pragma once

// Shared random generators and small fixtures for the test suites.
// Everything is seeded explicitly so failures reproduce.

#include <random>

#include "natlab/groups.hpp"
#include "natlab/hypgeo.hpp"

namespace natlab::testing {

/// Parabolic pair generating the figure-eight knot group, with the
/// standard length-10 relator and the meridian/longitude cusp pair.
/// The same data ships as a bundled scenario; tests that validate the
/// bundled files go through the scenario module instead.
inline RepresentationData figure8_identity_rep() {
    const std::complex<double> omega(-0.5, std::sqrt(3.0) / 2.0);
    RepresentationData rep;
    rep.k = rep.n = 3;
    rep.domain_gens = {sl2c_to_lorentz({1.0, 1.0, 0.0, 1.0}),
                       sl2c_to_lorentz({1.0, 0.0, -omega, 1.0})};
    rep.target_images = rep.domain_gens;
    rep.relators = {{1, 2, -1, 2, 1, -2, -1, 2, -1, -2}};
    rep.cusps = {CuspData{{{1}, {2, -1, -2, 1, 1, -2, -1, 2}}}};
    return rep;
}

/// Z^2 parabolic cusp group acting on H^3, identity representation.
inline RepresentationData z2_cusp_rep() {
    RepresentationData rep;
    rep.k = rep.n = 3;
    rep.domain_gens = {sl2c_to_lorentz({1.0, 1.0, 0.0, 1.0}),
                       sl2c_to_lorentz({1.0, std::complex<double>(0.0, 1.0), 0.0, 1.0})};
    rep.target_images = rep.domain_gens;
    rep.relators = {{1, 2, -1, -2}};
    rep.cusps = {CuspData{{{1}, {2}}}};
    return rep;
}

inline Vec random_unit_direction(std::mt19937_64& rng, int m) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec u(m);
    double n = 0.0;
    do {
        for (int i = 0; i < m; ++i) u[i] = nd(rng);
        n = euclidean_norm(u);
    } while (n < 1e-3);
    return u * (1.0 / n);
}

inline BoundaryPoint random_boundary(std::mt19937_64& rng, int m) {
    return BoundaryPoint::from_direction(random_unit_direction(rng, m));
}

inline Point random_point(std::mt19937_64& rng, int m, double max_radius = 3.0) {
    std::uniform_real_distribution<double> ur(0.0, max_radius);
    const double r = ur(rng);
    Vec u = random_unit_direction(rng, m);
    Vec v(m + 1);
    v[0] = std::cosh(r);
    for (int i = 0; i < m; ++i) v[i + 1] = std::sinh(r) * u[i];
    return Point(v);
}

/// Random element of O+(m,1): rotation * boost * rotation.
inline Isometry random_isometry(std::mt19937_64& rng, int m, double max_boost = 2.0) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ur(0.0, max_boost);

    auto random_rotation = [&]() {
        Eigen::MatrixXd A(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) A(i, j) = nd(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        Eigen::MatrixXd Q = qr.householderQ();
        Mat g(m + 1);
        g(0, 0) = 1.0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) g(i + 1, j + 1) = Q(i, j);
        return Isometry(g);
    };

    Mat boost(m + 1);
    const double t = ur(rng);
    boost(0, 0) = std::cosh(t);
    boost(0, 1) = std::sinh(t);
    boost(1, 0) = std::sinh(t);
    boost(1, 1) = std::cosh(t);
    for (int i = 2; i <= m; ++i) boost(i, i) = 1.0;

    return random_rotation().compose(Isometry(boost)).compose(random_rotation());
}

} // namespace natlab::testing
