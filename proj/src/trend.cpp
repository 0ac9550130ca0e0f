#include "morfi/trend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace morfi {

namespace {

// ---- rank helpers -----------------------------------------------------------

// 2x average rank (1-based), so tied averages stay exact integers.
std::vector<int32_t> scaled_ranks(std::span<const double> x) {
    const size_t n = x.size();
    std::vector<int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int32_t a, int32_t b) { return x[a] < x[b]; });
    std::vector<int32_t> r2(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const int32_t rank2 = static_cast<int32_t>(i + j + 2); // (i+1) + (j+1)
        for (size_t k = i; k <= j; ++k) r2[order[k]] = rank2;
        i = j + 1;
    }
    return r2;
}

std::vector<int32_t> tie_block_sizes(std::span<const double> x) {
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    std::vector<int32_t> blocks;
    size_t i = 0;
    while (i < s.size()) {
        size_t j = i;
        while (j + 1 < s.size() && s[j + 1] == s[i]) ++j;
        blocks.push_back(static_cast<int32_t>(j - i + 1));
        i = j + 1;
    }
    std::sort(blocks.begin(), blocks.end());
    return blocks;
}

void check_finite(std::span<const double> x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw ValidationError(std::string(what) + " contains NaN or Inf");
}

// ---- exact null distributions, memoized by tie pattern -----------------------

// Null of the Spearman numerator num = n*sum(a_i b_i) - sum(a)sum(b) over all
// orderings of the multiset a against the fixed sequence b. The denominator is
// permutation-invariant, so comparing |num| is comparing |rho|, exactly.
struct SpearmanNull {
    std::vector<int64_t> sorted_abs_num; // ascending, one entry per distinct arrangement
    double p_of(int64_t abs_num) const {
        auto it = std::lower_bound(sorted_abs_num.begin(), sorted_abs_num.end(), abs_num);
        return static_cast<double>(sorted_abs_num.end() - it) /
               static_cast<double>(sorted_abs_num.size());
    }
};

// Null of Mann-Kendall S over all distinct orderings of the observed tie
// pattern. tail[s] = P(|S| >= s).
struct MkNull {
    std::vector<double> tail;
    double p_of(int64_t abs_s) const {
        if (abs_s >= static_cast<int64_t>(tail.size())) return 0.0;
        return tail[static_cast<size_t>(abs_s)];
    }
};

std::shared_ptr<const SpearmanNull> build_spearman_null(std::vector<int32_t> a_sorted,
                                                        const std::vector<int32_t>& b) {
    const int n = static_cast<int>(b.size());
    int64_t sum_a = 0, sum_b = 0;
    for (int32_t v : a_sorted) sum_a += v;
    for (int32_t v : b) sum_b += v;
    const int64_t shift = sum_a * sum_b;

    auto null = std::make_shared<SpearmanNull>();
    do {
        int64_t dot = 0;
        for (int i = 0; i < n; ++i) dot += static_cast<int64_t>(a_sorted[static_cast<size_t>(i)]) * b[static_cast<size_t>(i)];
        null->sorted_abs_num.push_back(std::llabs(n * dot - shift));
    } while (std::next_permutation(a_sorted.begin(), a_sorted.end()));
    std::sort(null->sorted_abs_num.begin(), null->sorted_abs_num.end());
    return null;
}

std::shared_ptr<const MkNull> build_mk_null(const std::vector<int32_t>& blocks) {
    const int n = std::accumulate(blocks.begin(), blocks.end(), 0);
    const int n0 = n * (n - 1) / 2;
    auto null = std::make_shared<MkNull>();
    std::vector<int64_t> count_by_abs(static_cast<size_t>(n0) + 1, 0);
    int64_t total = 0;

    const bool untied = std::all_of(blocks.begin(), blocks.end(), [](int32_t t) { return t == 1; });
    if (untied) {
        // Number of permutations of n items with k inversions; S = n0 - 2k.
        std::vector<int64_t> dp(1, 1);
        for (int m = 2; m <= n; ++m) {
            std::vector<int64_t> next(dp.size() + static_cast<size_t>(m) - 1, 0);
            int64_t window = 0;
            for (size_t k = 0; k < next.size(); ++k) {
                if (k < dp.size()) window += dp[k];
                if (k >= static_cast<size_t>(m)) window -= dp[k - static_cast<size_t>(m)];
                next[k] = window;
            }
            dp.swap(next);
        }
        for (size_t k = 0; k < dp.size(); ++k) {
            count_by_abs[static_cast<size_t>(std::llabs(n0 - 2 * static_cast<int64_t>(k)))] += dp[k];
            total += dp[k];
        }
    } else {
        std::vector<int32_t> values;
        for (size_t bi = 0; bi < blocks.size(); ++bi)
            for (int32_t c = 0; c < blocks[bi]; ++c) values.push_back(static_cast<int32_t>(bi));
        do {
            int64_t s = 0;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    s += (values[static_cast<size_t>(j)] > values[static_cast<size_t>(i)]) -
                         (values[static_cast<size_t>(j)] < values[static_cast<size_t>(i)]);
            ++count_by_abs[static_cast<size_t>(std::llabs(s))];
            ++total;
        } while (std::next_permutation(values.begin(), values.end()));
    }

    null->tail.resize(count_by_abs.size());
    int64_t acc = 0;
    for (size_t s = count_by_abs.size(); s-- > 0;) {
        acc += count_by_abs[s];
        null->tail[s] = static_cast<double>(acc) / static_cast<double>(total);
    }
    return null;
}

// Memo shared across threads, with a thread-local front so the hot path never
// takes a lock after the first sighting of a tie pattern.
std::string pattern_key(const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
    std::string key;
    key.reserve(a.size() + b.size() + 1);
    for (int32_t v : a) key.push_back(static_cast<char>(v));
    key.push_back(127);
    for (int32_t v : b) key.push_back(static_cast<char>(v));
    return key;
}

std::shared_ptr<const SpearmanNull> spearman_null_for(const std::vector<int32_t>& a_sorted,
                                                      const std::vector<int32_t>& b) {
    thread_local std::unordered_map<std::string, std::shared_ptr<const SpearmanNull>> local;
    static std::mutex mutex;
    static std::unordered_map<std::string, std::shared_ptr<const SpearmanNull>> global;

    const std::string key = pattern_key(a_sorted, b);
    if (auto it = local.find(key); it != local.end()) return it->second;
    {
        std::lock_guard<std::mutex> lock(mutex);
        if (auto it = global.find(key); it != global.end()) return local[key] = it->second;
    }
    auto built = build_spearman_null(a_sorted, b);
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto [it, inserted] = global.try_emplace(key, built);
        return local[key] = it->second;
    }
}

std::shared_ptr<const MkNull> mk_null_for(const std::vector<int32_t>& blocks) {
    thread_local std::unordered_map<std::string, std::shared_ptr<const MkNull>> local;
    static std::mutex mutex;
    static std::unordered_map<std::string, std::shared_ptr<const MkNull>> global;

    const std::string key = pattern_key(blocks, {});
    if (auto it = local.find(key); it != local.end()) return it->second;
    {
        std::lock_guard<std::mutex> lock(mutex);
        if (auto it = global.find(key); it != global.end()) return local[key] = it->second;
    }
    auto built = build_mk_null(blocks);
    {
        std::lock_guard<std::mutex> lock(mutex);
        auto [it, inserted] = global.try_emplace(key, built);
        return local[key] = it->second;
    }
}

} // namespace

// ---- special functions --------------------------------------------------------

namespace {

double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw ValidationError("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(ln_front) * betacf(a, b, x) / a;
    return 1.0 - std::exp(ln_front) * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double dof) {
    if (!std::isfinite(t)) return 0.0;
    return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

double normal_two_sided(double z) {
    return std::erfc(std::fabs(z) / 1.4142135623730950488);
}

// ---- public tests ---------------------------------------------------------------

TrendResult spearman_trend(std::span<const double> x, std::span<const double> v) {
    const int n = static_cast<int>(x.size());
    if (n < 3) throw ValidationError("spearman_trend: need n >= 3");
    if (v.size() != x.size()) throw ValidationError("spearman_trend: x and v lengths differ");
    check_finite(x, "spearman_trend: x");
    check_finite(v, "spearman_trend: v");

    const auto a = scaled_ranks(x);
    const auto b = scaled_ranks(v);

    int64_t sum_a = 0, sum_b = 0, sum_aa = 0, sum_bb = 0, dot = 0;
    for (int i = 0; i < n; ++i) {
        const auto ai = static_cast<int64_t>(a[static_cast<size_t>(i)]);
        const auto bi = static_cast<int64_t>(b[static_cast<size_t>(i)]);
        sum_a += ai;
        sum_b += bi;
        sum_aa += ai * ai;
        sum_bb += bi * bi;
        dot += ai * bi;
    }
    const int64_t den_b = n * sum_bb - sum_b * sum_b;
    if (den_b == 0) throw ValidationError("spearman_trend: v must have at least two distinct values");
    const int64_t den_a = n * sum_aa - sum_a * sum_a;
    if (den_a == 0) return {0.0, 1.0, n}; // constant x carries no ordering information

    const int64_t num = n * dot - sum_a * sum_b;
    double rho = static_cast<double>(num) /
                 (std::sqrt(static_cast<double>(den_a)) * std::sqrt(static_cast<double>(den_b)));
    rho = std::clamp(rho, -1.0, 1.0);

    double p;
    if (n <= kSpearmanExactMaxN) {
        std::vector<int32_t> a_sorted = a;
        std::sort(a_sorted.begin(), a_sorted.end());
        p = spearman_null_for(a_sorted, b)->p_of(std::llabs(num));
    } else {
        const double r2 = rho * rho;
        if (r2 >= 1.0) {
            p = 0.0;
        } else {
            const double t = std::fabs(rho) * std::sqrt((n - 2) / (1.0 - r2));
            p = student_t_two_sided(t, static_cast<double>(n - 2));
        }
    }
    return {rho, p, n};
}

TrendResult mann_kendall(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    if (n < 3) throw ValidationError("mann_kendall: need n >= 3");
    check_finite(x, "mann_kendall: x");

    int64_t s = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            s += (x[static_cast<size_t>(j)] > x[static_cast<size_t>(i)]) -
                 (x[static_cast<size_t>(j)] < x[static_cast<size_t>(i)]);

    const auto blocks = tie_block_sizes(x);
    const int64_t n0 = static_cast<int64_t>(n) * (n - 1) / 2;
    int64_t n1 = 0, var_ties = 0;
    for (int32_t t : blocks) {
        n1 += static_cast<int64_t>(t) * (t - 1) / 2;
        var_ties += static_cast<int64_t>(t) * (t - 1) * (2 * t + 5);
    }
    if (n1 == n0) return {0.0, 1.0, n}; // every value tied

    const double tau = static_cast<double>(s) /
                       std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0));

    double p;
    if (n <= kMannKendallExactMaxN) {
        p = mk_null_for(blocks)->p_of(std::llabs(s));
    } else if (s == 0) {
        p = 1.0;
    } else {
        const double var_s =
            (static_cast<double>(n) * (n - 1) * (2 * n + 5) - static_cast<double>(var_ties)) / 18.0;
        const double z = (static_cast<double>(std::llabs(s)) - 1.0) / std::sqrt(var_s);
        p = normal_two_sided(z);
    }
    return {tau, p, n};
}

} // namespace morfi
