// Test-only oracles, independent of the library's solver path: Pearson
// correlation on raw samples and a random-restart pattern search that
// maximizes |corr(Xa, Yb)| directly over unit vectors.

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97f4A7C15ull;
        std::uint64_t z = state_;
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        // Box-Muller, cosine branch only.
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * uniform());
    }

private:
    std::uint64_t state_;
};

inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0 || syy <= 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

namespace detail {

inline void normalize(std::vector<double>& v) {
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-300) {
        v.assign(v.size(), 0.0);
        v[0] = 1.0;
        return;
    }
    for (double& x : v) x /= norm;
}

// |corr| of the samples projected onto (a, b).
inline double objective(const std::vector<double>& x, const std::vector<double>& y, std::size_t n,
                        std::size_t dx, std::size_t dy, const std::vector<double>& a,
                        const std::vector<double>& b) {
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        double su = 0;
        const double* row = x.data() + i * dx;
        for (std::size_t j = 0; j < dx; ++j) su += row[j] * a[j];
        u[i] = su;
        double sv = 0;
        const double* rowy = y.data() + i * dy;
        for (std::size_t j = 0; j < dy; ++j) sv += rowy[j] * b[j];
        v[i] = sv;
    }
    return std::fabs(pearson(u, v));
}

} // namespace detail

// Maximizes |corr(Xa, Yb)| by compass search over the entries of a and b
// (renormalized after every step), with random restarts. x and y are
// row-major n x dx and n x dy.
inline double brute_force_top_correlation(const std::vector<double>& x,
                                          const std::vector<double>& y, std::size_t n,
                                          std::size_t dx, std::size_t dy, int restarts = 30,
                                          std::uint64_t seed = 12345) {
    Rng rng(seed);
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        std::vector<double> a(dx), b(dy);
        for (double& v : a) v = rng.normal();
        for (double& v : b) v = rng.normal();
        detail::normalize(a);
        detail::normalize(b);
        double value = detail::objective(x, y, n, dx, dy, a, b);
        double step = 0.5;
        while (step > 1e-7) {
            bool improved = false;
            for (std::size_t j = 0; j < dx + dy; ++j) {
                std::vector<double>& target = j < dx ? a : b;
                const std::size_t idx = j < dx ? j : j - dx;
                for (double dir : {step, -step}) {
                    std::vector<double> cand = target;
                    cand[idx] += dir;
                    detail::normalize(cand);
                    std::vector<double> a2 = j < dx ? cand : a;
                    std::vector<double> b2 = j < dx ? b : cand;
                    const double obj = detail::objective(x, y, n, dx, dy, a2, b2);
                    if (obj > value + 1e-15) {
                        value = obj;
                        target = cand;
                        improved = true;
                        break;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        if (value > best) best = value;
    }
    return best;
}

} // namespace oracle
