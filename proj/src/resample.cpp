#include "morfi/resample.hpp"

#include <algorithm>
#include <cmath>

namespace morfi {

BootstrapPlan sample_uniform(Index r, Index n, uint64_t seed) {
    if (r < 1 || n < 1) throw ValidationError("sample_uniform: need r >= 1 and n >= 1");
    BootstrapPlan plan;
    plan.seed = seed;
    plan.indices.resize(r, n);
    plan.weights.setConstant(r, n, 1.0 / static_cast<double>(n));
    for (Index rep = 0; rep < r; ++rep) {
        CounterRng rng(seed, static_cast<uint64_t>(rep));
        for (Index x = 0; x < n; ++x)
            plan.indices(rep, x) = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(n)));
    }
    return plan;
}

void top_k_column(std::span<const double> values, Index k, bool largest, Index* out) {
    thread_local std::vector<std::pair<double, Index>> pool;
    pool.clear();
    for (size_t f = 0; f < values.size(); ++f)
        if (std::isfinite(values[f])) pool.emplace_back(values[f], static_cast<Index>(f));

    const auto want = std::min<size_t>(static_cast<size_t>(k), pool.size());
    auto better = [largest](const std::pair<double, Index>& a, const std::pair<double, Index>& b) {
        if (a.first != b.first) return largest ? a.first > b.first : a.first < b.first;
        return a.second < b.second;
    };
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want), pool.end(),
                      better);
    for (size_t i = 0; i < want; ++i) out[i] = pool[i].second;
    for (Index i = static_cast<Index>(want); i < k; ++i) out[i] = kInvalidIndex;
}

Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> top_k_indices(
    const Eigen::Ref<const Eigen::MatrixXd>& values, Index k, bool largest) {
    const Index f = values.rows();
    const Index r = values.cols();
    if (k < 1) throw ValidationError("top_k_indices: k must be >= 1");
    if (k > f)
        throw ValidationError("top_k_indices: k = " + std::to_string(k) +
                              " exceeds the number of rows " + std::to_string(f));
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> out(k, r);
    std::vector<double> col(static_cast<size_t>(f));
    for (Index c = 0; c < r; ++c) {
        for (Index i = 0; i < f; ++i) col[static_cast<size_t>(i)] = values(i, c);
        top_k_column(col, k, largest, out.col(c).data());
    }
    return out;
}

Eigen::Matrix<int64_t, Eigen::Dynamic, 1> index_count(
    const Eigen::Ref<const Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>>& selected,
    Index f) {
    if (f < 1) throw ValidationError("index_count: domain size must be >= 1");
    Eigen::Matrix<int64_t, Eigen::Dynamic, 1> counts =
        Eigen::Matrix<int64_t, Eigen::Dynamic, 1>::Zero(f);
    for (Index c = 0; c < selected.cols(); ++c) {
        for (Index i = 0; i < selected.rows(); ++i) {
            const Index v = selected(i, c);
            if (v == kInvalidIndex) continue;
            if (v < 0 || v >= f)
                throw ValidationError("index_count: index " + std::to_string(v) +
                                      " outside [0, " + std::to_string(f) + ")");
            ++counts(v);
        }
    }
    return counts;
}

} // namespace morfi
