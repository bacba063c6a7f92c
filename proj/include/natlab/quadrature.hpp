#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <vector>

#include "natlab/errors.hpp"

namespace natlab {

struct GaussRule {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights; // sum to 2
};

/// Gauss-Legendre rule of the given order, computed by Newton iteration
/// on the Legendre polynomial and cached.
inline const GaussRule& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    if (n < 1 || n > 64) throw InputError("gauss_legendre: order out of range");

    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Chebyshev initial guess
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            // evaluate P_n(x) and P_n'(x) by recurrence
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return cache.emplace(n, std::move(rule)).first->second;
}

/// Integrate f over [a, b] with one Gauss-Legendre panel.
template <typename F>
double gauss_panel(F&& f, double a, double b, int order) {
    const GaussRule& rule = gauss_legendre(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (size_t i = 0; i < rule.nodes.size(); ++i)
        s += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return s * half;
}

/// Integrate over [0, b] with panels graded geometrically toward 0,
/// resolving integrable endpoint singularities and sharp features of
/// scale down to b * 2^-levels.
template <typename F>
double graded_panels(F&& f, double b, int levels, int order) {
    double total = 0.0;
    double right = b;
    for (int j = 0; j < levels; ++j) {
        const double left = right * 0.5;
        total += gauss_panel(f, left, right, order);
        right = left;
    }
    total += gauss_panel(f, 0.0, right, order);
    return total;
}

/// Deterministic online pairwise accumulator (binary-counter merging).
class PairwiseAcc {
  public:
    void push(double x) {
        for (size_t lvl = 0;; ++lvl) {
            if (lvl == filled_.size()) {
                filled_.push_back(true);
                sums_.push_back(x);
                return;
            }
            if (!filled_[lvl]) {
                filled_[lvl] = true;
                sums_[lvl] = x;
                return;
            }
            x += sums_[lvl];
            filled_[lvl] = false;
        }
    }
    double total() const {
        double s = 0.0;
        for (size_t i = 0; i < sums_.size(); ++i)
            if (filled_[i]) s += sums_[i];
        return s;
    }

  private:
    std::vector<bool> filled_;
    std::vector<double> sums_;
};

} // namespace natlab
