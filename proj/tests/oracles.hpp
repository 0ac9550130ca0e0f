#pragma once

// Reference implementations used only by the tests. They are deliberately
// written the slow, obvious way (plain loops, full enumerations, std::sort)
// and share no code with the library paths they check.

#include "morfi/resample.hpp"
#include "morfi/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace testref {

using morfi::Index;

// ---------------------------------------------------------------- rank stats

inline std::vector<double> average_ranks(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<double> r(n);
    for (size_t i = 0; i < n; ++i) {
        size_t less = 0, equal = 0;
        for (size_t j = 0; j < n; ++j) {
            if (x[j] < x[i]) ++less;
            if (x[j] == x[i]) ++equal;
        }
        r[i] = static_cast<double>(less) + (1.0 + static_cast<double>(equal)) / 2.0;
    }
    return r;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, da = 0.0, db = 0.0;
    for (size_t i = 0; i < n; ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

inline double spearman_rho(std::span<const double> x, std::span<const double> v) {
    const auto rx = average_ranks(x);
    const auto rv = average_ranks(v);
    return pearson(rx, rv);
}

// Integer twice-average-ranks so permutation counting stays exact.
inline std::vector<int64_t> twice_ranks(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<int64_t> r(n);
    for (size_t i = 0; i < n; ++i) {
        int64_t less = 0, equal = 0;
        for (size_t j = 0; j < n; ++j) {
            if (x[j] < x[i]) ++less;
            if (x[j] == x[i]) ++equal;
        }
        r[i] = 2 * less + equal + 1;
    }
    return r;
}

// Exact two-sided permutation p-value for Spearman: the fraction of distinct
// arrangements of x's rank multiset (against fixed v ranks) whose |numerator|
// reaches the observed one. The shared denominator cancels, so integer
// numerator comparison is exact.
inline double spearman_exact_p(std::span<const double> x, std::span<const double> v) {
    const auto a_obs = twice_ranks(x);
    const auto b = twice_ranks(v);
    const auto n = static_cast<int64_t>(x.size());

    auto numerator = [&](const std::vector<int64_t>& a) {
        int64_t dot = 0, sa = 0, sb = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            sa += a[i];
            sb += b[i];
        }
        return n * dot - sa * sb;
    };
    const int64_t target = std::llabs(numerator(a_obs));

    static std::map<std::pair<std::vector<int64_t>, std::vector<int64_t>>,
                    std::map<int64_t, double>>
        memo;
    std::vector<int64_t> a_sorted = a_obs;
    std::sort(a_sorted.begin(), a_sorted.end());
    auto& tails = memo[{a_sorted, b}];
    if (auto it = tails.find(target); it != tails.end()) return it->second;

    int64_t hits = 0, total = 0;
    std::vector<int64_t> perm = a_sorted;
    do {
        ++total;
        if (std::llabs(numerator(perm)) >= target) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double p = static_cast<double>(hits) / static_cast<double>(total);
    tails[target] = p;
    return p;
}

// ------------------------------------------------------------- Mann-Kendall

inline int64_t mk_s(std::span<const double> x) {
    int64_t s = 0;
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = i + 1; j < x.size(); ++j) {
            if (x[j] > x[i]) ++s;
            if (x[j] < x[i]) --s;
        }
    return s;
}

inline double mk_tau(std::span<const double> x) {
    const auto n = static_cast<int64_t>(x.size());
    std::map<double, int64_t> ties;
    for (double v : x) ++ties[v];
    const int64_t n0 = n * (n - 1) / 2;
    int64_t n1 = 0;
    for (const auto& [value, t] : ties) n1 += t * (t - 1) / 2;
    if (n1 == n0) return 0.0;
    return static_cast<double>(mk_s(x)) /
           std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0));
}

// Exact two-sided permutation p-value of S over distinct arrangements of the
// observed tie pattern.
inline double mk_exact_p(std::span<const double> x) {
    std::map<double, int64_t> ties;
    for (double v : x) ++ties[v];
    std::vector<int64_t> blocks;
    for (const auto& [value, t] : ties) blocks.push_back(t);
    std::sort(blocks.begin(), blocks.end());
    const int64_t target = std::llabs(mk_s(x));

    static std::map<std::vector<int64_t>, std::map<int64_t, double>> memo;
    auto& tails = memo[blocks];
    if (auto it = tails.find(target); it != tails.end()) return it->second;

    std::vector<double> values;
    for (size_t b = 0; b < blocks.size(); ++b)
        for (int64_t c = 0; c < blocks[b]; ++c) values.push_back(static_cast<double>(b));
    std::sort(values.begin(), values.end());
    int64_t hits = 0, total = 0;
    do {
        ++total;
        if (std::llabs(mk_s(values)) >= target) ++hits;
    } while (std::next_permutation(values.begin(), values.end()));
    const double p = static_cast<double>(hits) / static_cast<double>(total);
    tails[target] = p;
    return p;
}

// --------------------------------------------- tail probabilities by quadrature

// Adaptive Simpson integration, for checking the closed-form tail helpers
// against nothing but the density itself.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double eps,
                               int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 48);
}

// Two-sided Student-t tail 2 P(T >= |t|), integrating the density outward
// from |t| until it is negligible.
inline double student_t_two_sided_quad(double t, double dof) {
    const double at = std::fabs(t);
    const double log_norm =
        std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0) - 0.5 * std::log(dof * M_PI);
    auto pdf = [&](double u) {
        return std::exp(log_norm - (dof + 1.0) / 2.0 * std::log1p(u * u / dof));
    };
    double tail = 0.0;
    double lo = at;
    double span = std::max(1.0, at);
    for (int seg = 0; seg < 200; ++seg) {
        const double hi = lo + span;
        const double piece = integrate(pdf, lo, hi, 1e-17);
        tail += piece;
        lo = hi;
        span *= 1.5;
        if (piece < 1e-19 && seg > 4) break;
    }
    return std::min(1.0, 2.0 * tail);
}

// Two-sided normal tail 2 P(Z >= |z|) by quadrature.
inline double normal_two_sided_quad(double z) {
    const double az = std::fabs(z);
    auto pdf = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI); };
    double tail = integrate(pdf, az, az + 12.0, 1e-17);
    tail += integrate(pdf, az + 12.0, az + 40.0, 1e-17);
    return std::min(1.0, 2.0 * tail);
}

// ------------------------------------------------------------------ folds

// Naive [N, S, F] masked mean.
inline std::vector<double> masked_mean_naive(const std::vector<double>& values,
                                             const std::vector<bool>& mask, Index n, Index s,
                                             Index f) {
    std::vector<double> out(static_cast<size_t>(n * f), 0.0);
    for (Index i = 0; i < n; ++i) {
        int64_t valid = 0;
        for (Index j = 0; j < s; ++j)
            if (mask[static_cast<size_t>(i * s + j)]) ++valid;
        for (Index k = 0; k < f; ++k) {
            double acc = 0.0;
            for (Index j = 0; j < s; ++j)
                if (mask[static_cast<size_t>(i * s + j)])
                    acc += values[static_cast<size_t>((i * s + j) * f + k)];
            out[static_cast<size_t>(i * f + k)] = acc / static_cast<double>(valid);
        }
    }
    return out;
}

// Naive mean over one axis of a 4-d row-major array.
inline std::vector<double> mean_fold_naive(const std::vector<double>& a,
                                           const std::array<Index, 4>& dims, int dim) {
    std::array<Index, 4> od = dims;
    od[static_cast<size_t>(dim)] = 1;
    std::vector<double> out(static_cast<size_t>(od[0] * od[1] * od[2] * od[3]), 0.0);
    auto at = [&](const std::array<Index, 4>& d, Index i0, Index i1, Index i2, Index i3) {
        return ((i0 * d[1] + i1) * d[2] + i2) * d[3] + i3;
    };
    for (Index i0 = 0; i0 < dims[0]; ++i0)
        for (Index i1 = 0; i1 < dims[1]; ++i1)
            for (Index i2 = 0; i2 < dims[2]; ++i2)
                for (Index i3 = 0; i3 < dims[3]; ++i3) {
                    std::array<Index, 4> idx = {i0, i1, i2, i3};
                    idx[static_cast<size_t>(dim)] = 0;
                    out[static_cast<size_t>(at(od, idx[0], idx[1], idx[2], idx[3]))] +=
                        a[static_cast<size_t>(at(dims, i0, i1, i2, i3))] /
                        static_cast<double>(dims[static_cast<size_t>(dim)]);
                }
    return out;
}

// Naive weighted resample of a 4-d row-major array along one axis.
inline std::vector<double> bootstrap_fold_naive(const std::vector<double>& a,
                                                const std::array<Index, 4>& dims, int dim,
                                                const morfi::BootstrapPlan& plan) {
    const Index r = plan.indices.rows();
    const Index n = plan.indices.cols();
    std::array<Index, 4> od = dims;
    od[static_cast<size_t>(dim)] = r;
    std::vector<double> out(static_cast<size_t>(od[0] * od[1] * od[2] * od[3]), 0.0);
    auto at = [&](const std::array<Index, 4>& d, Index i0, Index i1, Index i2, Index i3) {
        return ((i0 * d[1] + i1) * d[2] + i2) * d[3] + i3;
    };
    for (Index i0 = 0; i0 < od[0]; ++i0)
        for (Index i1 = 0; i1 < od[1]; ++i1)
            for (Index i2 = 0; i2 < od[2]; ++i2)
                for (Index i3 = 0; i3 < od[3]; ++i3) {
                    std::array<Index, 4> src = {i0, i1, i2, i3};
                    const Index rep = src[static_cast<size_t>(dim)];
                    double acc = 0.0;
                    for (Index x = 0; x < n; ++x) {
                        src[static_cast<size_t>(dim)] = plan.indices(rep, x);
                        acc += plan.weights(rep, x) *
                               a[static_cast<size_t>(at(dims, src[0], src[1], src[2], src[3]))];
                    }
                    out[static_cast<size_t>(at(od, i0, i1, i2, i3))] = acc;
                }
    return out;
}

// ------------------------------------------------------ selection and counts

// Full-sort top-k over one column, mirroring the sentinel and tie rules.
inline std::vector<Index> top_k_sorted(std::span<const double> values, Index k, bool largest) {
    std::vector<std::pair<double, Index>> rows;
    for (size_t i = 0; i < values.size(); ++i)
        if (std::isfinite(values[i])) rows.emplace_back(values[i], static_cast<Index>(i));
    std::sort(rows.begin(), rows.end(), [largest](const auto& a, const auto& b) {
        if (a.first != b.first) return largest ? a.first > b.first : a.first < b.first;
        return a.second < b.second;
    });
    std::vector<Index> out(static_cast<size_t>(k), morfi::kInvalidIndex);
    for (size_t i = 0; i < std::min<size_t>(static_cast<size_t>(k), rows.size()); ++i)
        out[i] = rows[i].second;
    return out;
}

inline std::vector<int64_t> index_count_map(const std::vector<Index>& entries, Index f) {
    std::unordered_map<Index, int64_t> counts;
    for (Index v : entries)
        if (v != morfi::kInvalidIndex) ++counts[v];
    std::vector<int64_t> out(static_cast<size_t>(f), 0);
    for (const auto& [idx, c] : counts) out[static_cast<size_t>(idx)] = c;
    return out;
}

// --------------------------------------------------------------- test data

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(uint64_t seed) : gen(seed) {}
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(gen);
    }
    double gauss() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
    int64_t below(int64_t n) { return std::uniform_int_distribution<int64_t>(0, n - 1)(gen); }
};

// Random sequence of the given length; alphabet 0 means continuous (ties
// almost surely absent), otherwise small-integer draws that force ties.
inline std::vector<double> random_sequence(Rng& rng, size_t n, int alphabet) {
    std::vector<double> x(n);
    for (auto& v : x)
        v = alphabet == 0 ? rng.gauss() : static_cast<double>(rng.below(alphabet));
    return x;
}

} // namespace testref
