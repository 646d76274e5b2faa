// Test-only oracles, kept independent of the library implementation paths
// they check: plain-loop distance scans, a 2D convex hull with polygon
// containment, a cyclic Jacobi eigensolver, a straight-line network
// evaluator and central finite differences.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "modval/surrogate.hpp"

namespace oracle {

// squared-free Euclidean distance with plain loops
inline double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double min_dist_to(const std::vector<std::vector<double>>& pts,
                          const std::vector<double>& z) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) best = std::min(best, dist(p, z));
    return best;
}

// nearest-neighbor distance of each point to the rest
inline std::vector<double> nn_distances(const std::vector<std::vector<double>>& pts) {
    std::vector<double> out;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (i != j) best = std::min(best, dist(pts[i], pts[j]));
        out.push_back(best);
    }
    return out;
}

// ---- 2D convex hull (Andrew monotone chain) + polygon containment --------

struct Pt {
    double x, y;
};

inline double cross(const Pt& o, const Pt& a, const Pt& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline std::vector<Pt> convex_hull_2d(std::vector<Pt> pts) {
    std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Pt& a, const Pt& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;
    std::vector<Pt> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

// boundary counts as inside (tolerance on the cross product)
inline bool polygon_contains(const std::vector<Pt>& hull, const Pt& q, double tol = 1e-9) {
    if (hull.size() == 1) return dist({hull[0].x, hull[0].y}, {q.x, q.y}) <= tol;
    if (hull.size() == 2) {
        const double c = cross(hull[0], hull[1], q);
        if (std::abs(c) > tol) return false;
        const double d = (q.x - hull[0].x) * (hull[1].x - hull[0].x) +
                         (q.y - hull[0].y) * (hull[1].y - hull[0].y);
        const double len2 = (hull[1].x - hull[0].x) * (hull[1].x - hull[0].x) +
                            (hull[1].y - hull[0].y) * (hull[1].y - hull[0].y);
        return d >= -tol && d <= len2 + tol;
    }
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        if (cross(a, b, q) < -tol) return false;  // hull is counterclockwise
    }
    return true;
}

// ---- symmetric eigenvalues via cyclic Jacobi ------------------------------

inline std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-18) continue;
                const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(theta), s = std::sin(theta);
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
    std::sort(eig.rbegin(), eig.rend());
    return eig;
}

// ---- independent forward pass (affine + ReLU chain, plain loops) ----------

inline std::vector<double> forward_reference(const modval::SurrogateModel& m,
                                             const std::vector<double>& x) {
    std::vector<double> a = x;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        std::vector<double> z(static_cast<std::size_t>(m.W[l].rows()), 0.0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            double acc = m.b[l](static_cast<modval::Index>(i));
            for (std::size_t j = 0; j < a.size(); ++j)
                acc += m.W[l](static_cast<modval::Index>(i), static_cast<modval::Index>(j)) * a[j];
            z[i] = acc;
        }
        if (l + 1 < m.W.size())
            for (auto& v : z) v = std::max(0.0, v);
        a = std::move(z);
    }
    return a;
}

// ---- central finite differences over all parameters ----------------------

template <typename LossFn>
inline std::vector<double> finite_difference_gradient(modval::SurrogateModel model,
                                                      LossFn loss_of_model, double h = 1e-5) {
    std::vector<double> grad;
    std::vector<double*> params;
    for (auto& w : model.W)
        for (modval::Index i = 0; i < w.size(); ++i) params.push_back(w.data() + i);
    for (auto& b : model.b)
        for (modval::Index i = 0; i < b.size(); ++i) params.push_back(b.data() + i);
    for (double* p : params) {
        const double orig = *p;
        *p = orig + h;
        const double up = loss_of_model(model);
        *p = orig - h;
        const double dn = loss_of_model(model);
        *p = orig;
        grad.push_back((up - dn) / (2.0 * h));
    }
    return grad;
}

}  // namespace oracle
