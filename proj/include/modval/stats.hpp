#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modval/common.hpp"

namespace modval::stats {

// ---------------------------------------------------------------------------
// Special functions. Series/continued-fraction implementations following the
// classical recipes; accurate to ~1e-12 over the ranges the tests exercise.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kEps = 3e-15;
inline constexpr int kMaxIter = 500;

inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double fpmin = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / fpmin;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

inline double betacf(double a, double b, double x) {
    const double fpmin = std::numeric_limits<double>::min() / kEps;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_p: invalid arguments");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_contfrac(a, x);
}

inline double gamma_q(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_q: invalid arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);  // keeps precision in the far tail
}

// Regularized incomplete beta I_x(a, b).
inline double inc_beta(double a, double b, double x) {
    require(a > 0.0 && b > 0.0, "inc_beta: invalid shape");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    const double front = std::exp(lbeta + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

// Acklam's rational approximation with one Halley refinement step.
inline double normal_quantile(double p) {
    require(p > 0.0 && p < 1.0, "normal_quantile: p outside (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

inline double chi2_sf(double x, double df) {
    require(df > 0.0, "chi2_sf: df must be positive");
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * df, 0.5 * x);
}

inline double f_sf(double f, double df1, double df2) {
    require(df1 > 0.0 && df2 > 0.0, "f_sf: df must be positive");
    if (f <= 0.0) return 1.0;
    if (!std::isfinite(f)) return 0.0;
    return inc_beta(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

// Two-sided p-value of a Student-t statistic.
inline double t_sf_two_sided(double t, double df) {
    require(df > 0.0, "t_sf: df must be positive");
    if (!std::isfinite(t)) return 0.0;
    return inc_beta(0.5 * df, 0.5, df / (df + t * t));
}

inline double t_cdf(double t, double df) {
    const double half = 0.5 * inc_beta(0.5 * df, 0.5, df / (df + t * t));
    return t >= 0.0 ? 1.0 - half : half;
}

inline double t_quantile(double p, double df) {
    require(p > 0.0 && p < 1.0, "t_quantile: p outside (0,1)");
    double lo = -1.0, hi = 1.0;
    while (t_cdf(lo, df) > p) lo *= 2.0;
    while (t_cdf(hi, df) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, df) < p) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-13 * std::max(1.0, std::abs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

// Kolmogorov distribution survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2k^2 l^2}.
inline double kolmogorov_sf(double lambda) {
    if (lambda < 0.18) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Distribution families
// ---------------------------------------------------------------------------

enum class Family { normal, laplace, cauchy, johnson_su };

inline std::string family_name(Family f) {
    switch (f) {
        case Family::normal: return "normal";
        case Family::laplace: return "laplace";
        case Family::cauchy: return "cauchy";
        case Family::johnson_su: return "johnson_su";
    }
    return "?";
}

// Fitted parametric distribution. Parameter layout:
//   normal:     {mu, sigma}
//   laplace:    {loc, scale}
//   cauchy:     {loc, scale}
//   johnson_su: {gamma, delta, xi, lambda}
struct DistributionFit {
    Family family = Family::normal;
    std::array<double, 4> params{};
    std::string method;

    double cdf(double x) const {
        switch (family) {
            case Family::normal:
                return normal_cdf((x - params[0]) / params[1]);
            case Family::laplace: {
                const double z = (x - params[0]) / params[1];
                return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
            }
            case Family::cauchy:
                return 0.5 + std::atan((x - params[0]) / params[1]) / M_PI;
            case Family::johnson_su: {
                const auto [g, d, xi, lam] = as_tuple();
                return normal_cdf(g + d * std::asinh((x - xi) / lam));
            }
        }
        return 0.0;
    }

    double pdf(double x) const {
        switch (family) {
            case Family::normal:
                return normal_pdf((x - params[0]) / params[1]) / params[1];
            case Family::laplace:
                return 0.5 * std::exp(-std::abs(x - params[0]) / params[1]) / params[1];
            case Family::cauchy: {
                const double z = (x - params[0]) / params[1];
                return 1.0 / (M_PI * params[1] * (1.0 + z * z));
            }
            case Family::johnson_su: {
                const auto [g, d, xi, lam] = as_tuple();
                const double u = (x - xi) / lam;
                const double z = g + d * std::asinh(u);
                return d / (lam * std::sqrt(1.0 + u * u)) * normal_pdf(z);
            }
        }
        return 0.0;
    }

    double quantile(double p) const {
        switch (family) {
            case Family::normal:
                return params[0] + params[1] * normal_quantile(p);
            case Family::laplace:
                return p < 0.5 ? params[0] + params[1] * std::log(2.0 * p)
                               : params[0] - params[1] * std::log(2.0 * (1.0 - p));
            case Family::cauchy:
                return params[0] + params[1] * std::tan(M_PI * (p - 0.5));
            case Family::johnson_su: {
                const auto [g, d, xi, lam] = as_tuple();
                return xi + lam * std::sinh((normal_quantile(p) - g) / d);
            }
        }
        return 0.0;
    }

    std::tuple<double, double, double, double> as_tuple() const {
        return {params[0], params[1], params[2], params[3]};
    }
};

struct TestResult {
    double statistic = 0.0;
    double pvalue = 1.0;
    std::string name;
    double df1 = 0.0;   // primary df (or sample size for KS/AD)
    double df2 = 0.0;
};

namespace detail {

inline std::vector<double> sorted_copy(std::span<const double> s) {
    std::vector<double> v(s.begin(), s.end());
    std::sort(v.begin(), v.end());
    return v;
}

inline bool all_equal(std::span<const double> s) {
    for (double x : s)
        if (x != s[0]) return false;
    return true;
}

// Nelder-Mead in 2D, enough for the Johnson SU quantile-matching search.
template <typename F>
inline std::array<double, 2> nelder_mead_2d(F f, std::array<double, 2> start, int iters) {
    std::array<std::array<double, 2>, 3> sx{start,
                                            {start[0] + 0.25, start[1]},
                                            {start[0], start[1] + 0.25}};
    std::array<double, 3> fx{f(sx[0]), f(sx[1]), f(sx[2])};
    for (int it = 0; it < iters; ++it) {
        std::array<int, 3> ord{0, 1, 2};
        std::sort(ord.begin(), ord.end(), [&](int a, int b) { return fx[a] < fx[b]; });
        const auto& best = sx[ord[0]];
        const auto& worst = sx[ord[2]];
        if (std::abs(fx[ord[2]] - fx[ord[0]]) < 1e-15 * (1.0 + std::abs(fx[ord[0]]))) break;
        std::array<double, 2> cen{0.5 * (sx[ord[0]][0] + sx[ord[1]][0]),
                                  0.5 * (sx[ord[0]][1] + sx[ord[1]][1])};
        std::array<double, 2> refl{2.0 * cen[0] - worst[0], 2.0 * cen[1] - worst[1]};
        double fr = f(refl);
        if (fr < fx[ord[0]]) {
            std::array<double, 2> exp_{3.0 * cen[0] - 2.0 * worst[0], 3.0 * cen[1] - 2.0 * worst[1]};
            double fe = f(exp_);
            if (fe < fr) { sx[ord[2]] = exp_; fx[ord[2]] = fe; }
            else { sx[ord[2]] = refl; fx[ord[2]] = fr; }
        } else if (fr < fx[ord[1]]) {
            sx[ord[2]] = refl;
            fx[ord[2]] = fr;
        } else {
            std::array<double, 2> con{0.5 * (cen[0] + worst[0]), 0.5 * (cen[1] + worst[1])};
            double fc = f(con);
            if (fc < fx[ord[2]]) { sx[ord[2]] = con; fx[ord[2]] = fc; }
            else {
                for (int i : {1, 2}) {
                    sx[ord[i]] = {0.5 * (sx[ord[i]][0] + best[0]), 0.5 * (sx[ord[i]][1] + best[1])};
                    fx[ord[i]] = f(sx[ord[i]]);
                }
            }
        }
    }
    int bi = 0;
    for (int i = 1; i < 3; ++i)
        if (fx[i] < fx[bi]) bi = i;
    return sx[bi];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

inline DistributionFit fit_normal(std::span<const double> x) {
    const double mu = mean_of(x);
    double s2 = 0.0;
    for (double v : x) s2 += (v - mu) * (v - mu);
    const double sigma = std::sqrt(s2 / static_cast<double>(x.size()));
    require(sigma > 0.0, "fit: degenerate sample (zero scale)");
    return {Family::normal, {mu, sigma, 0, 0}, "mle"};
}

inline DistributionFit fit_laplace(std::span<const double> x) {
    auto v = detail::sorted_copy(x);
    const double loc = percentile_sorted(v, 0.5);
    double mad = 0.0;
    for (double a : v) mad += std::abs(a - loc);
    mad /= static_cast<double>(v.size());
    require(mad > 0.0, "fit: degenerate sample (zero scale)");
    return {Family::laplace, {loc, mad, 0, 0}, "mle"};
}

inline DistributionFit fit_cauchy(std::span<const double> x) {
    auto v = detail::sorted_copy(x);
    const double loc = percentile_sorted(v, 0.5);
    const double scale = 0.5 * (percentile_sorted(v, 0.75) - percentile_sorted(v, 0.25));
    require(scale > 0.0, "fit: degenerate sample (zero scale)");
    return {Family::cauchy, {loc, scale, 0, 0}, "quantile"};
}

// Quantile matching at the 5/25/75/95% points: for fixed (gamma, delta) the
// model quantiles are linear in (xi, lambda), so those two are solved in
// closed form and a 2D search handles the rest.
inline DistributionFit fit_johnson_su(std::span<const double> x) {
    require(x.size() >= 20, "fit: johnson_su needs >= 20 samples");
    auto v = detail::sorted_copy(x);
    require(!detail::all_equal(v), "fit: degenerate sample (zero scale)");
    const std::array<double, 4> ps{0.05, 0.25, 0.75, 0.95};
    std::array<double, 4> zs{}, qs{};
    for (int i = 0; i < 4; ++i) {
        zs[i] = normal_quantile(ps[i]);
        qs[i] = percentile_sorted(v, ps[i]);
    }
    double qvar = 0.0;
    const double qmean = (qs[0] + qs[1] + qs[2] + qs[3]) / 4.0;
    for (double q : qs) qvar += (q - qmean) * (q - qmean);
    if (qvar <= 0.0) qvar = 1.0;

    struct Sol { double g, d, xi, lam, res; };
    auto solve = [&](double g, double logd) -> Sol {
        const double d = std::exp(logd);
        std::array<double, 4> s{};
        for (int i = 0; i < 4; ++i) s[i] = std::sinh((zs[i] - g) / d);
        // least squares q ~ xi + lam * s
        double sm = 0, qm = 0;
        for (int i = 0; i < 4; ++i) { sm += s[i]; qm += qs[i]; }
        sm /= 4; qm /= 4;
        double sxx = 0, sxy = 0;
        for (int i = 0; i < 4; ++i) {
            sxx += (s[i] - sm) * (s[i] - sm);
            sxy += (s[i] - sm) * (qs[i] - qm);
        }
        if (sxx <= 0.0) return {g, d, 0, 0, std::numeric_limits<double>::infinity()};
        const double lam = sxy / sxx;
        const double xi = qm - lam * sm;
        if (lam <= 0.0) return {g, d, xi, lam, std::numeric_limits<double>::infinity()};
        double r = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double e = qs[i] - (xi + lam * s[i]);
            r += e * e;
        }
        return {g, d, xi, lam, r / qvar};
    };

    // coarse grid, then Nelder-Mead from the best starts
    std::vector<std::array<double, 2>> starts;
    {
        std::vector<std::pair<double, std::array<double, 2>>> grid;
        for (int gi = 0; gi <= 12; ++gi) {
            const double g = -3.0 + 0.5 * gi;
            for (int di = 0; di <= 8; ++di) {
                const double logd = std::log(0.2) + di * (std::log(5.0) - std::log(0.2)) / 8.0;
                grid.push_back({solve(g, logd).res, {g, logd}});
            }
        }
        std::sort(grid.begin(), grid.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (int i = 0; i < 3 && i < static_cast<int>(grid.size()); ++i)
            starts.push_back(grid[i].second);
    }
    Sol best{0, 1, 0, 1, std::numeric_limits<double>::infinity()};
    for (const auto& s0 : starts) {
        auto opt = detail::nelder_mead_2d(
            [&](const std::array<double, 2>& t) { return solve(t[0], t[1]).res; }, s0, 300);
        const Sol s = solve(opt[0], opt[1]);
        if (s.res < best.res) best = s;
    }
    require(std::isfinite(best.res), "fit: johnson_su quantile matching failed");
    return {Family::johnson_su, {best.g, best.d, best.xi, best.lam}, "quantile-match"};
}

inline DistributionFit fit(std::span<const double> samples, Family family) {
    require(samples.size() >= 8, "fit: need >= 8 samples");
    if (detail::all_equal(samples)) throw std::invalid_argument("fit: degenerate sample (zero scale)");
    switch (family) {
        case Family::normal: return fit_normal(samples);
        case Family::laplace: return fit_laplace(samples);
        case Family::cauchy: return fit_cauchy(samples);
        case Family::johnson_su: return fit_johnson_su(samples);
    }
    throw std::invalid_argument("fit: unknown family");
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

inline double ks_statistic(std::span<const double> samples, const DistributionFit& fit) {
    auto v = detail::sorted_copy(samples);
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double f = fit.cdf(v[i]);
        d = std::max(d, std::max((static_cast<double>(i) + 1.0) / n - f,
                                 f - static_cast<double>(i) / n));
    }
    return d;
}

// One-sample KS with p from the asymptotic Kolmogorov distribution
// (Stephens' finite-n adjustment of the argument).
inline TestResult ks_test(std::span<const double> samples, const DistributionFit& fit) {
    require(samples.size() >= 8, "ks_test: need >= 8 samples");
    const double n = static_cast<double>(samples.size());
    const double d = ks_statistic(samples, fit);
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    return {d, kolmogorov_sf(lambda), "ks", n, 0.0};
}

inline double ad_statistic(std::span<const double> samples, const DistributionFit& fit) {
    auto v = detail::sorted_copy(samples);
    const std::size_t n = v.size();
    double a2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double fi = std::clamp(fit.cdf(v[i]), 1e-12, 1.0 - 1e-12);
        const double fj = std::clamp(fit.cdf(v[n - 1 - i]), 1e-12, 1.0 - 1e-12);
        a2 += (2.0 * static_cast<double>(i) + 1.0) * (std::log(fi) + std::log1p(-fj));
    }
    return -static_cast<double>(n) - a2 / static_cast<double>(n);
}

// Anderson-Darling with a parametric-bootstrap p-value: parameters are
// refitted on every replicate so the p-value accounts for estimation.
inline TestResult ad_test(std::span<const double> samples, const DistributionFit& fitted,
                          int bootstrap_replicates = 500, std::uint64_t seed = 1,
                          unsigned jobs = 1) {
    require(samples.size() >= 8, "ad_test: need >= 8 samples");
    const std::size_t n = samples.size();
    const double a2 = ad_statistic(samples, fitted);
    std::vector<int> exceed(bootstrap_replicates, 0);
    parallel_for(static_cast<std::size_t>(bootstrap_replicates), jobs, [&](std::size_t b) {
        auto rng = make_rng(seed, b);
        std::uniform_real_distribution<double> unif(1e-12, 1.0 - 1e-12);
        std::vector<double> rep(n);
        for (auto& r : rep) r = fitted.quantile(unif(rng));
        DistributionFit refit;
        try {
            refit = fit(rep, fitted.family);
        } catch (const std::invalid_argument&) {
            refit = fitted;
        }
        if (ad_statistic(rep, refit) >= a2) exceed[b] = 1;
    });
    const double count = std::accumulate(exceed.begin(), exceed.end(), 0);
    const double p = (1.0 + count) / (static_cast<double>(bootstrap_replicates) + 1.0);
    return {a2, p, "ad", static_cast<double>(n), 0.0};
}

// ---------------------------------------------------------------------------
// Group comparison and correlation
// ---------------------------------------------------------------------------

inline TestResult anova(std::span<const std::vector<double>> groups) {
    require(groups.size() >= 2, "anova: need >= 2 groups");
    std::size_t total = 0;
    double grand = 0.0;
    for (const auto& g : groups) {
        require(g.size() >= 2, "anova: a group has < 2 samples");
        total += g.size();
        for (double x : g) grand += x;
    }
    grand /= static_cast<double>(total);
    double ssb = 0.0, ssw = 0.0;
    for (const auto& g : groups) {
        const double m = mean_of(g);
        ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
        for (double x : g) ssw += (x - m) * (x - m);
    }
    const double df1 = static_cast<double>(groups.size() - 1);
    const double df2 = static_cast<double>(total - groups.size());
    double f, p;
    if (ssb <= 0.0) {
        f = 0.0;
        p = 1.0;
    } else if (ssw <= 0.0) {
        f = std::numeric_limits<double>::infinity();
        p = 0.0;
    } else {
        f = (ssb / df1) / (ssw / df2);
        p = f_sf(f, df1, df2);
    }
    return {f, p, "anova", df1, df2};
}

// Brown-Forsythe variant: absolute deviations from the group median.
inline TestResult levene(std::span<const std::vector<double>> groups) {
    require(groups.size() >= 2, "levene: need >= 2 groups");
    std::vector<std::vector<double>> dev(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        require(groups[i].size() >= 2, "levene: a group has < 2 samples");
        const double med = percentile(groups[i], 0.5);
        dev[i].reserve(groups[i].size());
        for (double x : groups[i]) dev[i].push_back(std::abs(x - med));
    }
    auto r = anova(dev);
    r.name = "levene";
    return r;
}

inline TestResult pearson(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "pearson: size mismatch");
    require(x.size() >= 3, "pearson: need >= 3 samples");
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0 && syy > 0.0, "pearson: constant input");
    const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(x.size() - 2);
    double p;
    if (std::abs(r) >= 1.0) {
        p = 0.0;
    } else {
        const double t = r * std::sqrt(df / (1.0 - r * r));
        p = t_sf_two_sided(t, df);
    }
    return {r, p, "pearson", df, 0.0};
}

inline std::vector<double> ranks_average_ties(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline TestResult spearman(std::span<const double> x, std::span<const double> y) {
    auto rx = ranks_average_ties(x);
    auto ry = ranks_average_ties(y);
    auto r = pearson(rx, ry);
    r.name = "spearman";
    return r;
}

// ---------------------------------------------------------------------------
// Outliers: generalized extreme studentized deviate
// ---------------------------------------------------------------------------

// Flags up to max_outliers indices (into the original sample order).
inline std::vector<std::size_t> gesd(std::span<const double> samples, int max_outliers,
                                     double alpha = 0.05) {
    const std::size_t n = samples.size();
    require(max_outliers >= 1, "gesd: max_outliers must be >= 1");
    require(static_cast<std::size_t>(max_outliers) < n - 2 && n > 3,
            "gesd: max_outliers >= n - 2");
    if (detail::all_equal(samples)) throw std::invalid_argument("gesd: zero deviation");
    std::vector<std::size_t> active(n);
    std::iota(active.begin(), active.end(), 0);
    std::vector<std::size_t> removed;
    int last_significant = 0;
    for (int i = 1; i <= max_outliers; ++i) {
        const std::size_t m = active.size();
        double mean = 0.0;
        for (auto idx : active) mean += samples[idx];
        mean /= static_cast<double>(m);
        double s2 = 0.0;
        for (auto idx : active) s2 += (samples[idx] - mean) * (samples[idx] - mean);
        const double sd = std::sqrt(s2 / static_cast<double>(m - 1));
        if (sd <= 0.0) break;
        // candidate: largest studentized deviate; ties broken by value then position
        std::size_t arg = active[0];
        double best = -1.0;
        for (auto idx : active) {
            const double d = std::abs(samples[idx] - mean);
            if (d > best || (d == best && samples[idx] > samples[arg])) {
                best = d;
                arg = idx;
            }
        }
        const double r_i = best / sd;
        const double nn = static_cast<double>(n) - static_cast<double>(i) + 1.0;
        const double pq = 1.0 - alpha / (2.0 * nn);
        const double t = t_quantile(pq, nn - 2.0);
        const double lambda_i =
            (nn - 1.0) * t / std::sqrt((nn - 2.0 + t * t) * nn);
        removed.push_back(arg);
        active.erase(std::find(active.begin(), active.end(), arg));
        if (r_i > lambda_i) last_significant = i;
    }
    removed.resize(static_cast<std::size_t>(last_significant));
    std::sort(removed.begin(), removed.end());
    return removed;
}

// Johnson SU normalization: z = gamma + delta * asinh((x - xi)/lambda) ~ N(0,1)
// when x follows the fitted Johnson SU distribution.
inline std::vector<double> johnson_normalize(std::span<const double> samples,
                                             const DistributionFit& fit) {
    require(fit.family == Family::johnson_su, "johnson_normalize: fit is not johnson_su");
    const auto [g, d, xi, lam] = fit.as_tuple();
    require(lam > 0.0 && d > 0.0, "johnson_normalize: invalid parameters");
    std::vector<double> z;
    z.reserve(samples.size());
    for (double x : samples) z.push_back(g + d * std::asinh((x - xi) / lam));
    return z;
}

// ---------------------------------------------------------------------------
// Nonparametric bootstrap
// ---------------------------------------------------------------------------

struct Statistic {
    enum class Kind { mean, std_dev, median, percentile } kind = Kind::mean;
    double p = 0.5;  // percentile only

    static Statistic parse(const std::string& tag) {
        if (tag == "mean") return {Kind::mean, 0};
        if (tag == "std") return {Kind::std_dev, 0};
        if (tag == "median") return {Kind::median, 0.5};
        if (tag.rfind("percentile:", 0) == 0) {
            const double p = std::stod(tag.substr(11)) / 100.0;
            require(p >= 0.0 && p <= 1.0, "statistic: percentile outside [0,100]");
            return {Kind::percentile, p};
        }
        throw std::invalid_argument("unknown statistic tag: " + tag);
    }

    std::string name() const {
        switch (kind) {
            case Kind::mean: return "mean";
            case Kind::std_dev: return "std";
            case Kind::median: return "median";
            case Kind::percentile: return "percentile:" + std::to_string(p * 100.0);
        }
        return "?";
    }

    double operator()(std::vector<double>& scratch) const {
        switch (kind) {
            case Kind::mean: return mean_of(scratch);
            case Kind::std_dev: return stddev_of(scratch);
            case Kind::median:
            case Kind::percentile:
                std::sort(scratch.begin(), scratch.end());
                return percentile_sorted(scratch, kind == Kind::median ? 0.5 : p);
        }
        return 0.0;
    }
};

struct BootstrapResult {
    double point_estimate = 0.0;
    double bootstrap_mean = 0.0;
    double ci_lo = 0.0;   // ascending: lo <= hi
    double ci_hi = 0.0;
    int replicates = 0;
    std::string statistic;
};

inline BootstrapResult bootstrap(std::span<const double> samples, const Statistic& stat,
                                 int replicates, std::uint64_t seed, unsigned jobs = 1) {
    require(samples.size() >= 2, "bootstrap: need >= 2 samples");
    require(replicates >= 200, "bootstrap: need >= 200 replicates");
    const std::size_t n = samples.size();
    std::vector<double> scratch(samples.begin(), samples.end());
    const double point = stat(scratch);
    std::vector<double> vals(static_cast<std::size_t>(replicates));
    parallel_for(vals.size(), jobs, [&](std::size_t b) {
        auto rng = make_rng(seed, b);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<double> rep(n);
        for (auto& r : rep) r = samples[pick(rng)];
        vals[b] = stat(rep);
    });
    double bmean = 0.0;
    for (double v : vals) bmean += v;
    bmean /= static_cast<double>(vals.size());
    std::sort(vals.begin(), vals.end());
    return {point,
            bmean,
            percentile_sorted(vals, 0.025),
            percentile_sorted(vals, 0.975),
            replicates,
            stat.name()};
}

// Split-half goodness of fit: parameters come from one random half, the test
// statistic from the other. Avoids the anti-conservative bias of testing
// against parameters fitted on the same data.
struct SplitHalfGof {
    DistributionFit fit;
    TestResult ks;
};

inline SplitHalfGof split_half_ks(std::span<const double> samples, Family family,
                                  std::uint64_t seed) {
    require(samples.size() >= 16, "split_half_ks: need >= 16 samples");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = samples.size() / 2;
    std::vector<double> fit_part, test_part;
    for (std::size_t i = 0; i < samples.size(); ++i)
        (i < half ? fit_part : test_part).push_back(samples[order[i]]);
    SplitHalfGof out;
    out.fit = fit(fit_part, family);
    out.ks = ks_test(test_part, out.fit);
    return out;
}

// ---------------------------------------------------------------------------
// Order-statistic tolerance band
// ---------------------------------------------------------------------------

// 1-based order-statistic positions (j, k) such that the interval
// (x_(j), x_(k)) covers at least `level` of the sampled distribution with
// probability >= `confidence`. Coverage of such an interval is distributed
// Beta(k - j, n + 1 - (k - j)); plain sample percentiles systematically
// under-cover at finite n, which this construction corrects.
inline std::pair<int, int> tolerance_band_indices(int n, double level, double confidence) {
    require(n >= 2, "tolerance_band: need n >= 2");
    require(level > 0.0 && level < 1.0, "tolerance_band: level outside (0,1)");
    const double np1 = static_cast<double>(n + 1);
    const double tail = 0.5 * (1.0 - level);
    int m = static_cast<int>(std::ceil((1.0 - tail) * np1)) -
            static_cast<int>(std::floor(tail * np1));
    m = std::clamp(m, 1, n - 1);
    auto coverage_conf = [&](int width) {
        // P(Beta(width, n+1-width) >= level)
        return inc_beta(static_cast<double>(n + 1 - width), static_cast<double>(width),
                        1.0 - level);
    };
    while (m < n - 1 && coverage_conf(m) < confidence) ++m;
    int j = std::max(1, (n + 1 - m) / 2);
    int k = std::min(n, j + m);
    j = std::max(1, k - m);
    return {j, k};
}

}  // namespace modval::stats
