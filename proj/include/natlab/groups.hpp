#pragma once

// Representation data, relator validation, orbit enumeration with
// geometric deduplication, Poincare series, and cusp-subgroup
// bookkeeping (horospherical coordinates and lattice saturation).

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "natlab/hypgeo.hpp"

namespace natlab {

/// Word in the generators: letter i > 0 means gens[i-1], i < 0 its inverse.
using Word = std::vector<int>;

inline Word inverse_word(const Word& w) {
    Word out(w.rbegin(), w.rend());
    for (int& c : out) c = -c;
    return out;
}

inline Isometry evaluate_word(const std::vector<Isometry>& gens, const Word& w, int dim) {
    Isometry acc = Isometry::identity(dim);
    for (int letter : w) {
        const int idx = std::abs(letter) - 1;
        if (idx < 0 || idx >= static_cast<int>(gens.size()))
            throw InputError("evaluate_word: letter out of range");
        acc = acc.compose(letter > 0 ? gens[idx] : gens[idx].inverse());
    }
    return acc;
}

struct CuspData {
    std::vector<Word> parabolic_gens;
};

struct RepresentationData {
    int k = 3; // domain dimension (>= 2 accepted)
    int n = 3; // target dimension >= k
    std::vector<Isometry> domain_gens;
    std::vector<Isometry> target_images;
    std::vector<Word> relators;
    std::vector<CuspData> cusps;

    Isometry domain_element(const Word& w) const { return evaluate_word(domain_gens, w, k); }
    Isometry target_element(const Word& w) const { return evaluate_word(target_images, w, n); }
};

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
    std::vector<double> relator_residual_domain;
    std::vector<double> relator_residual_target;
    double max_residual = 0.0;
    std::vector<IsomType> domain_gen_types;
    std::vector<IsomType> target_gen_types;

    bool pass(double tol = 1e-9) const { return max_residual <= tol; }
};

inline ValidationReport validate_representation(const RepresentationData& rep) {
    if (rep.domain_gens.size() != rep.target_images.size())
        throw InputError("validate_representation: generator count mismatch between domain and target");
    if (rep.n < rep.k) throw InputError("validate_representation: target dimension below domain dimension");
    ValidationReport out;
    for (const Word& r : rep.relators) {
        const double rd =
            rep.domain_element(r).matrix().max_abs_diff(Mat::identity(rep.k + 1));
        const double rt =
            rep.target_element(r).matrix().max_abs_diff(Mat::identity(rep.n + 1));
        out.relator_residual_domain.push_back(rd);
        out.relator_residual_target.push_back(rt);
        out.max_residual = std::max({out.max_residual, rd, rt});
    }
    for (const auto& g : rep.domain_gens) out.domain_gen_types.push_back(classify_isometry(g).type);
    for (const auto& g : rep.target_images) out.target_gen_types.push_back(classify_isometry(g).type);
    return out;
}

// ---------------------------------------------------------------------------
// Weighted orbits

/// Finite piece of the orbit (gamma O, rho(gamma) O') with bookkeeping.
/// Entries are sorted by d(O, gamma O) nondecreasing; ties resolved by
/// word length then lexicographic word, so enumeration is deterministic.
class WeightedOrbit {
  public:
    int k = 0, n = 0;
    int cutoff_L = 0;
    Point base_domain, base_target;

    size_t size() const { return d0_.size(); }

    Point domain_point(size_t i) const { return Point(domain_raw(i)); }
    Point target_point(size_t i) const { return Point(target_raw(i)); }
    Vec domain_raw(size_t i) const {
        Vec v(k + 1);
        for (int c = 0; c <= k; ++c) v[c] = dom_[i * (k + 1) + c];
        return v;
    }
    Vec target_raw(size_t i) const {
        Vec v(n + 1);
        for (int c = 0; c <= n; ++c) v[c] = (*tgt_)[i * (n + 1) + c];
        return v;
    }
    const double* target_ptr(size_t i) const { return tgt_->data() + i * (n + 1); }
    const double* domain_ptr(size_t i) const { return dom_.data() + i * (k + 1); }

    /// Shared view of the flat target-point column (stride n+1); lets
    /// mixtures over large orbits avoid copying the centers.
    std::shared_ptr<const std::vector<double>> target_pool() const { return tgt_; }

    double dist0(size_t i) const { return d0_[i]; }
    int word_length(size_t i) const { return wlen_[i]; }
    bool has_words() const { return words_.size() == d0_.size() && !d0_.empty(); }
    const Word& word(size_t i) const { return words_[i]; }

    /// Entry with its word (bulk enumeration).
    void push(const Vec& dom, const Vec& tgt, double d, int wlen, Word w) {
        push_plain(dom, tgt, d, wlen);
        words_.push_back(std::move(w));
    }

    /// Entry without word bookkeeping (saturated orbits; the words would
    /// be thousands of letters long).
    void push_plain(const Vec& dom, const Vec& tgt, double d, int wlen) {
        for (int c = 0; c <= k; ++c) dom_.push_back(dom[c]);
        for (int c = 0; c <= n; ++c) tgt_->push_back(tgt[c]);
        d0_.push_back(d);
        wlen_.push_back(wlen);
    }

    /// Translate the whole orbit: points g.(gamma O), h.(rho(gamma) O').
    /// Used to re-center truncation when testing equivariance.
    WeightedOrbit translated(const Isometry& g, const Isometry& h) const {
        WeightedOrbit out;
        out.k = k;
        out.n = n;
        out.cutoff_L = cutoff_L;
        out.base_domain = g.apply(base_domain);
        out.base_target = h.apply(base_target);
        out.dom_.reserve(dom_.size());
        out.tgt_->reserve(tgt_->size());
        for (size_t i = 0; i < size(); ++i) {
            Vec dv = g.apply_raw(domain_raw(i));
            Vec tv = h.apply_raw(target_raw(i));
            for (int c = 0; c <= k; ++c) out.dom_.push_back(dv[c]);
            for (int c = 0; c <= n; ++c) out.tgt_->push_back(tv[c]);
        }
        out.d0_ = d0_;
        out.wlen_ = wlen_;
        out.words_ = words_;
        return out;
    }

    void sort_by_distance() {
        std::vector<size_t> idx(size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            if (d0_[a] != d0_[b]) return d0_[a] < d0_[b];
            if (wlen_[a] != wlen_[b]) return wlen_[a] < wlen_[b];
            if (a < words_.size() && b < words_.size()) return words_[a] < words_[b];
            return a < b;
        });
        WeightedOrbit tmp;
        tmp.k = k;
        tmp.n = n;
        const bool worded = has_words();
        for (size_t i : idx) {
            if (worded)
                tmp.push(domain_raw(i), target_raw(i), d0_[i], wlen_[i], words_[i]);
            else
                tmp.push_plain(domain_raw(i), target_raw(i), d0_[i], wlen_[i]);
        }
        dom_ = std::move(tmp.dom_);
        tgt_ = std::move(tmp.tgt_);
        d0_ = std::move(tmp.d0_);
        wlen_ = std::move(tmp.wlen_);
        words_ = std::move(tmp.words_);
    }

  private:
    std::vector<double> dom_;
    std::shared_ptr<std::vector<double>> tgt_ = std::make_shared<std::vector<double>>();
    std::vector<double> d0_;
    std::vector<int> wlen_;
    std::vector<Word> words_;
};

inline constexpr double kOrbitDedupTol = 1e-8;

namespace detail {

/// Spatial hash for orbit dedup. Cell size is much coarser than the
/// dedup tolerance; true duplicates land in the same or a neighboring
/// cell and are then checked exactly.
class OrbitHash {
  public:
    explicit OrbitHash(int dim) : dim_(dim) {}

    static int64_t key_of(const double* c, int dim) {
        int64_t h = 1469598103934665603LL;
        for (int i = 0; i < dim; ++i) {
            const auto q = static_cast<int64_t>(std::llround(c[i] / 1e-3));
            h = (h ^ q) * 1099511628211LL;
        }
        return h;
    }

    void insert(const Vec& v, size_t idx) {
        std::array<double, kMaxAmbient> c{};
        for (int i = 0; i < dim_; ++i) c[i] = v[i];
        map_.emplace(key_of(c.data(), dim_), idx);
    }

    template <typename Check>
    bool probe(const Vec& v, Check&& check) const {
        std::array<double, kMaxAmbient> c{};
        for (int i = 0; i < dim_; ++i) c[i] = v[i];
        // walk all neighbor cells in {-1,0,1}^dim of the quantized position
        std::array<double, kMaxAmbient> probe_c{};
        std::array<int, kMaxAmbient> t{};
        t.fill(-1);
        while (true) {
            for (int i = 0; i < dim_; ++i) probe_c[i] = c[i] + t[i] * 1e-3;
            auto range = map_.equal_range(key_of(probe_c.data(), dim_));
            for (auto it = range.first; it != range.second; ++it)
                if (check(it->second)) return true;
            int i = 0;
            for (; i < dim_; ++i) {
                if (t[i] < 1) {
                    ++t[i];
                    break;
                }
                t[i] = -1;
            }
            if (i == dim_) break;
        }
        return false;
    }

  private:
    int dim_;
    std::unordered_multimap<int64_t, size_t> map_;
};

} // namespace detail

/// All freely reduced words of length <= L, deduplicated by simultaneous
/// proximity of the domain and target orbit points. Deterministic.
inline WeightedOrbit enumerate_orbit(const RepresentationData& rep, int L,
                                     size_t cap = 1000000) {
    if (L < 0) throw InputError("enumerate_orbit: negative word length");
    const int k = rep.k, n = rep.n;
    WeightedOrbit orbit;
    orbit.k = k;
    orbit.n = n;
    orbit.cutoff_L = L;
    orbit.base_domain = Point::origin(k);
    orbit.base_target = Point::origin(n);

    const Point O = orbit.base_domain;

    std::vector<Isometry> dgens, tgens; // interleaved g, g^{-1}
    for (size_t i = 0; i < rep.domain_gens.size(); ++i) {
        dgens.push_back(rep.domain_gens[i]);
        dgens.push_back(rep.domain_gens[i].inverse());
        tgens.push_back(rep.target_images[i]);
        tgens.push_back(rep.target_images[i].inverse());
    }

    detail::OrbitHash hash(k + 1);
    auto is_dup = [&](const Vec& dv, const Vec& tv) {
        Point dp(dv), tp(tv);
        return hash.probe(dv, [&](size_t idx) {
            return dist(orbit.domain_point(idx), dp) < kOrbitDedupTol &&
                   dist(orbit.target_point(idx), tp) < kOrbitDedupTol;
        });
    };

    Vec O_dom = O.coords(), O_tgt = orbit.base_target.coords();
    orbit.push(O_dom, O_tgt, 0.0, 0, Word{});
    hash.insert(O_dom, 0);

    // BFS by shells; words grow by a letter on the left so extensions
    // need only the parent's points, never its matrix.
    std::vector<size_t> shell{0};
    for (int len = 1; len <= L && !shell.empty(); ++len) {
        std::vector<size_t> next;
        for (size_t idx : shell) {
            const Word parent = orbit.word(idx);
            const int first = parent.empty() ? 0 : parent.front();
            for (size_t gi = 0; gi < dgens.size(); ++gi) {
                const int letter = (gi % 2 == 0) ? static_cast<int>(gi / 2) + 1
                                                 : -(static_cast<int>(gi / 2) + 1);
                if (first != 0 && letter == -first) continue; // free reduction
                Vec dv = dgens[gi].apply_raw(orbit.domain_raw(idx));
                Vec tv = tgens[gi].apply_raw(orbit.target_raw(idx));
                Point dp(dv), tp(tv);
                if (is_dup(dp.coords(), tp.coords())) continue;
                if (orbit.size() >= cap)
                    throw InputError("enumerate_orbit: orbit size cap exceeded");
                Word w;
                w.reserve(parent.size() + 1);
                w.push_back(letter);
                w.insert(w.end(), parent.begin(), parent.end());
                const double d = dist(O, dp);
                orbit.push(dp.coords(), tp.coords(), d, len, std::move(w));
                hash.insert(dp.coords(), orbit.size() - 1);
                next.push_back(orbit.size() - 1);
            }
        }
        shell = std::move(next);
    }

    orbit.sort_by_distance();
    return orbit;
}

// ---------------------------------------------------------------------------
// Poincare series

struct PoincareResult {
    double value = 0.0;
    double tail_bound = 0.0; // heuristic last-shell geometric estimate, not certified
    bool below_critical = false;
};

inline PoincareResult poincare_series(const WeightedOrbit& orbit, double s, const Point& x) {
    if (orbit.size() == 0) throw InputError("poincare_series: empty orbit");
    PoincareResult out;
    out.below_critical = (s <= orbit.k - 1);

    std::vector<double> terms(orbit.size());
    std::vector<double> shell_mass;
    for (size_t i = 0; i < orbit.size(); ++i) {
        const double t = std::exp(-s * dist(x, orbit.domain_point(i)));
        terms[i] = t;
        const int len = orbit.word_length(i);
        if (shell_mass.size() <= static_cast<size_t>(len)) shell_mass.resize(len + 1, 0.0);
        shell_mass[len] += t;
    }
    out.value = pairwise_sum(terms);

    if (shell_mass.size() >= 2) {
        const double last = shell_mass.back();
        const double prev = shell_mass[shell_mass.size() - 2];
        if (prev > 0.0 && last > 0.0) {
            const double r = std::min(last / prev, 0.95);
            out.tail_bound = last * r / (1.0 - r);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cusp subgroups

struct CuspFixedPoints {
    BoundaryPoint xi;   // unique domain fixed point
    FixedSet target_fix; // fixed set of the image group in the closed target ball
};

inline CuspFixedPoints cusp_fixed_point(const RepresentationData& rep, const CuspData& cusp) {
    if (cusp.parabolic_gens.empty()) throw InputError("cusp_fixed_point: no cusp generators");
    std::vector<Isometry> dom, tgt;
    for (const Word& w : cusp.parabolic_gens) {
        dom.push_back(rep.domain_element(w));
        tgt.push_back(rep.target_element(w));
    }
    for (const auto& g : dom) {
        if (g.is_identity()) continue;
        if (classify_isometry(g).type != IsomType::Parabolic)
            throw InputError("cusp_fixed_point: domain cusp generator is not parabolic");
    }
    FixedSet dfs = common_fixed_set(dom);
    if (dfs.boundary_points.size() != 1 || !dfs.interior_points.empty())
        throw InputError("cusp_fixed_point: domain cusp group has no unique boundary fixed point");
    CuspFixedPoints out{dfs.boundary_points[0], common_fixed_set(tgt)};
    return out;
}

// ---------------------------------------------------------------------------
// Horospherical coordinates and cusp-lattice saturation

/// Null frame adapted to a cusp point xi (normalized at O): coordinates
/// x = a xi + b xi_minus + sum c_j w_j with B_xi(x) = log(2b) and flat
/// horospherical position u = c / (2b). Parabolic elements fixing xi act
/// on u as Euclidean isometries; for cusp lattices, as translations.
struct HoroFrame {
    BoundaryPoint xi;
    Vec xi_minus;
    std::vector<Vec> spatial; // k-1 spacelike unit vectors

    struct Coords {
        Vec u;         // flat horosphere position (dimension k-1)
        double height; // B_xi(x)
    };

    static HoroFrame build(const BoundaryPoint& xi) {
        HoroFrame f;
        f.xi = xi;
        const int k = xi.dim();
        Vec u = xi.direction();
        f.xi_minus = Vec(k + 1);
        f.xi_minus[0] = 1.0;
        for (int i = 0; i < k; ++i) f.xi_minus[i + 1] = -u[i];
        // Householder complement of u in the spatial factor
        Vec w = u;
        w[0] -= 1.0;
        const double wn2 = euclidean_dot(w, w);
        for (int j = 1; j < k; ++j) {
            Vec col(k);
            col[j] = 1.0;
            if (wn2 > 1e-30) {
                const double fct = 2.0 * w[j] / wn2;
                for (int i = 0; i < k; ++i) col[i] -= fct * w[i];
            }
            Vec v(k + 1);
            for (int i = 0; i < k; ++i) v[i + 1] = col[i];
            f.spatial.push_back(v);
        }
        return f;
    }

    Coords coords(const Vec& x) const {
        Coords out;
        const double b = -0.5 * minkowski_form(x, xi.coords());
        out.height = std::log(2.0 * b);
        out.u = Vec(static_cast<int>(spatial.size()));
        for (size_t j = 0; j < spatial.size(); ++j)
            out.u[static_cast<int>(j)] = minkowski_form(x, spatial[j]) / (2.0 * b);
        return out;
    }
};

/// Pure-translation parabolic action written in a null frame. Mapping a
/// point means translating its flat horosphere coordinate, which is
/// exact for any power: matrix powers of parabolics grow quadratically
/// and shed their Lorentz structure long before the lattice radii that
/// cusp saturation needs.
struct NullFrameAction {
    HoroFrame frame;
    Eigen::MatrixXd T; // (dim-1) x rank translation matrix in u-coordinates
    bool trivial = false;

    Vec apply(const std::vector<int>& v, const Vec& x) const {
        if (trivial) return x;
        const int m1 = x.size(); // ambient dimension m+1
        const double b = -0.5 * minkowski_form(x, frame.xi.coords());
        const int d = static_cast<int>(frame.spatial.size());
        Vec c(d);
        for (int j = 0; j < d; ++j) c[j] = minkowski_form(x, frame.spatial[j]);
        for (int j = 0; j < d; ++j) {
            double shift = 0.0;
            for (int r = 0; r < static_cast<int>(v.size()); ++r) shift += T(j, r) * v[r];
            c[j] += 2.0 * b * shift;
        }
        double c2 = 0.0;
        for (int j = 0; j < d; ++j) c2 += c[j] * c[j];
        const double a = (1.0 + c2) / (4.0 * b);
        Vec out(m1);
        out += a * frame.xi.coords();
        out += b * frame.xi_minus;
        for (int j = 0; j < d; ++j) out += c[j] * frame.spatial[j];
        return out;
    }
};

/// The Z^r lattice of a cusp, acting on both sides through exact
/// null-frame translations. Requires pure-translation parabolic action
/// (always the case in H^3 and for subspace embeddings of it); the
/// constructor verifies this numerically and refuses otherwise.
class CuspLattice {
  public:
    static CuspLattice build(const RepresentationData& rep, const CuspData& cusp,
                             const BoundaryPoint& xi) {
        CuspLattice lat;
        std::vector<Isometry> dom, tgt;
        for (const Word& w : cusp.parabolic_gens) {
            dom.push_back(rep.domain_element(w));
            tgt.push_back(rep.target_element(w));
            lat.words_.push_back(w);
        }
        lat.rank_ = static_cast<int>(dom.size());

        lat.dom_action_.frame = HoroFrame::build(xi);
        lat.dom_action_.T = translation_matrix(lat.dom_action_.frame, dom, rep.k);
        verify_pure(lat.dom_action_, dom, rep.k, "domain");
        lat.Tsolve_ = lat.dom_action_.T.completeOrthogonalDecomposition();

        bool all_trivial = true;
        for (const auto& g : tgt) all_trivial = all_trivial && g.is_identity();
        if (all_trivial) {
            lat.tgt_action_.trivial = true;
        } else {
            FixedSet tfix = common_fixed_set(tgt);
            if (tfix.boundary_points.size() != 1 || !tfix.interior_points.empty())
                throw InputError(
                    "CuspLattice: target cusp images are not a parabolic group with a "
                    "unique fixed point");
            lat.tgt_action_.frame = HoroFrame::build(tfix.boundary_points[0]);
            lat.tgt_action_.T = translation_matrix(lat.tgt_action_.frame, tgt, rep.n);
            verify_pure(lat.tgt_action_, tgt, rep.n, "target");
        }
        return lat;
    }

    int rank() const { return rank_; }
    const HoroFrame& frame() const { return dom_action_.frame; }
    const Eigen::MatrixXd& translations() const { return dom_action_.T; }
    const Word& generator_word(int j) const { return words_[j]; }

    /// Nearest lattice vector to the horospherical position of x.
    std::vector<int> reduce(const Vec& x) const {
        auto c = dom_action_.frame.coords(x);
        Eigen::VectorXd u(c.u.size());
        for (int i = 0; i < c.u.size(); ++i) u(i) = c.u[i];
        Eigen::VectorXd v = Tsolve_.solve(u);
        std::vector<int> out(rank_);
        for (int j = 0; j < rank_; ++j) out[j] = static_cast<int>(std::llround(v(j)));
        return out;
    }

    Vec apply_domain(const std::vector<int>& v, const Vec& x) const {
        return dom_action_.apply(v, x);
    }
    Vec apply_target(const std::vector<int>& v, const Vec& x) const {
        return tgt_action_.apply(v, x);
    }

  private:
    static Eigen::MatrixXd translation_matrix(const HoroFrame& frame,
                                              const std::vector<Isometry>& gens, int dim) {
        const Point O = Point::origin(dim);
        const auto base = frame.coords(O.coords());
        Eigen::MatrixXd T(dim - 1, static_cast<int>(gens.size()));
        for (size_t j = 0; j < gens.size(); ++j) {
            auto c = frame.coords(gens[j].apply_raw(O.coords()));
            for (int i = 0; i < dim - 1; ++i) T(i, static_cast<int>(j)) = c.u[i] - base.u[i];
        }
        return T;
    }

    static void verify_pure(const NullFrameAction& action, const std::vector<Isometry>& gens,
                            int dim, const char* side) {
        for (size_t j = 0; j < gens.size(); ++j) {
            std::vector<int> v(gens.size(), 0);
            v[j] = 1;
            for (int s = 0; s < 3; ++s) {
                Vec raw(dim + 1);
                for (int i = 1; i <= dim; ++i)
                    raw[i] = 0.4 * std::sin(1.7 * (s + 1) * i + 0.3 * s); // fixed probes
                raw[0] = std::sqrt(1.0 + euclidean_dot(raw, raw) - raw[0] * raw[0]);
                Point x(raw);
                Point lhs(gens[j].apply_raw(x.coords()));
                Point rhs(action.apply(v, x.coords()));
                if (dist(lhs, rhs) > 1e-9)
                    throw InputError(std::string("CuspLattice: ") + side +
                                     " cusp action is not a pure translation");
            }
        }
    }

    int rank_ = 0;
    std::vector<Word> words_;
    NullFrameAction dom_action_, tgt_action_;
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> Tsolve_;
};

struct SaturationParams {
    double radius_factor = 4.0;    // lattice ball radius = factor * e^{t_max/2}
    double coset_height_cap = 2.5; // keep coset reps with B_xi(rO) below this
    size_t cap = 4000000;          // entry guard
};

/// Replaces word-length truncation near a cusp: the orbit is rebuilt as
/// (coset representatives) x (cusp-lattice ball). A word-length cutoff
/// alone cannot reach deep ray points, because lattice elements at flat
/// radius R cost word length ~R while their orbit points sit only
/// ~2 log R away.
inline WeightedOrbit saturate_cusp_orbit(const RepresentationData& rep, const CuspData& cusp,
                                         const WeightedOrbit& bulk, double t_max,
                                         const SaturationParams& par = {}) {
    const auto cfp = cusp_fixed_point(rep, cusp);
    CuspLattice lat = CuspLattice::build(rep, cusp, cfp.xi);
    const HoroFrame& frame = lat.frame();
    const int k = rep.k, n = rep.n;

    // 1. reduce bulk entries to coset representatives
    struct Rep {
        Vec dom, tgt;
        double height;
        Vec u;
        Word word;
        int wlen;
    };
    std::vector<Rep> reps;
    auto try_add = [&](const Vec& dom_red, const Vec& tgt_red, const Word& w, int wlen) {
        auto c = frame.coords(dom_red);
        if (c.height > par.coset_height_cap) return;
        Point dp(dom_red), tp(tgt_red);
        for (const auto& r : reps)
            if (dist(Point(r.dom), dp) < kOrbitDedupTol && dist(Point(r.tgt), tp) < kOrbitDedupTol)
                return;
        reps.push_back({dp.coords(), tp.coords(), c.height, c.u, w, wlen});
    };
    for (size_t i = 0; i < bulk.size(); ++i) {
        std::vector<int> v = lat.reduce(bulk.domain_raw(i));
        for (int& c : v) c = -c;
        Vec dom_red = lat.apply_domain(v, bulk.domain_raw(i));
        Vec tgt_red = lat.apply_target(v, bulk.target_raw(i));
        try_add(dom_red, tgt_red, bulk.has_words() ? bulk.word(i) : Word{}, bulk.word_length(i));
    }
    std::stable_sort(reps.begin(), reps.end(),
                     [](const Rep& a, const Rep& b) { return a.height < b.height; });

    // 2. lattice ball in flat coordinates
    const double R = par.radius_factor * std::exp(0.5 * t_max);
    if (lat.rank() < 1 || lat.rank() > 2)
        throw InputError("saturate_cusp_orbit: cusp rank must be 1 or 2");
    std::vector<std::vector<int>> ball;
    const auto& T = lat.translations();
    if (lat.rank() == 1) {
        const double t0 = T.col(0).norm();
        const int vmax = static_cast<int>(R / std::max(t0, 1e-9)) + 1;
        for (int i = -vmax; i <= vmax; ++i) ball.push_back({i});
    } else {
        const double t0 = T.col(0).norm(), t1 = T.col(1).norm();
        const int imax = static_cast<int>(R / std::max(t0, 1e-9) * 1.6) + 1;
        const int jmax = static_cast<int>(R / std::max(t1, 1e-9) * 1.6) + 1;
        for (int i = -imax; i <= imax; ++i)
            for (int j = -jmax; j <= jmax; ++j) {
                Eigen::Vector2d u = T * Eigen::Vector2d(i, j);
                if (u.norm() <= R) ball.push_back({i, j});
            }
    }

    // 3. assemble
    WeightedOrbit out;
    out.k = k;
    out.n = n;
    out.cutoff_L = bulk.cutoff_L;
    out.base_domain = bulk.base_domain;
    out.base_target = bulk.base_target;
    const Point O = out.base_domain;
    if (reps.size() * ball.size() > par.cap)
        throw InputError("saturate_cusp_orbit: entry cap exceeded");
    for (const auto& r : reps) {
        for (const auto& v : ball) {
            Point dp(lat.apply_domain(v, r.dom));
            Point tp(lat.apply_target(v, r.tgt));
            int extra = 0;
            for (int c : v) extra += std::abs(c);
            out.push_plain(dp.coords(), tp.coords(), dist(O, dp), r.wlen + extra);
        }
    }
    return out;
}

} // namespace natlab
