#pragma once

#include "morfi/rng.hpp"
#include "morfi/tensor.hpp"

#include <span>
#include <vector>

namespace morfi {

// Pads short top-k columns; never a real latent index.
inline constexpr Index kInvalidIndex = -1;

// One resampling design: row r lists the sample indices drawn for replicate r
// and the weight each draw carries (uniform 1/N here; rows always sum to 1).
struct BootstrapPlan {
    Eigen::Matrix<int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> indices; // [R, N]
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> weights;  // [R, N]
    uint64_t seed = 0;
};

// i.i.d. uniform draws from {0..n-1}, R x N. Replicate r consumes its own
// counter stream keyed by (seed, r), so the plan is reproducible and
// independent of any parallel schedule.
BootstrapPlan sample_uniform(Index r, Index n, uint64_t seed);

// Weighted resample along one axis: out[..., r, ...] =
// sum_x weights(r, x) * a[..., indices(r, x), ...].
template <typename Scalar>
DenseTensor<Scalar, 4> bootstrap_fold(const DenseTensor<Scalar, 4>& a, int dim,
                                      const BootstrapPlan& plan);

// Per column of a [F, R] score matrix, the indices of the k largest (or
// smallest) finite entries. Non-finite entries are masking sentinels and are
// never selected; short columns are padded with kInvalidIndex. Ties break
// toward the smaller index.
Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> top_k_indices(
    const Eigen::Ref<const Eigen::MatrixXd>& values, Index k, bool largest);

// Used by top_k_indices and by the per-replicate selection inside the
// bootstrap analysis; out must hold k entries.
void top_k_column(std::span<const double> values, Index k, bool largest, Index* out);

// Occurrence counts over a [k, R] selection matrix: count[f] = how many
// entries equal f. kInvalidIndex entries are ignored; anything else outside
// [0, f) is an error.
Eigen::Matrix<int64_t, Eigen::Dynamic, 1> index_count(
    const Eigen::Ref<const Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>>& selected,
    Index f);

template <typename Scalar>
DenseTensor<Scalar, 4> bootstrap_fold(const DenseTensor<Scalar, 4>& a, int dim,
                                      const BootstrapPlan& plan) {
    if (dim < 0 || dim > 3)
        throw ValidationError("bootstrap_fold: axis " + std::to_string(dim) + " out of range");
    const Index axis = a.dimension(dim);
    const Index r = plan.indices.rows();
    const Index n = plan.indices.cols();
    if (r < 1 || n < 1) throw ValidationError("bootstrap_fold: empty plan");
    if (plan.weights.rows() != r || plan.weights.cols() != n)
        throw ValidationError("bootstrap_fold: plan indices/weights shapes differ");
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < n; ++j)
            if (plan.indices(i, j) < 0 || plan.indices(i, j) >= axis)
                throw ValidationError("bootstrap_fold: plan index out of range for axis length " +
                                      std::to_string(axis));

    Eigen::array<Index, 4> out_dims;
    Index outer = 1, inner = 1;
    for (int d = 0; d < 4; ++d) {
        out_dims[d] = (d == dim) ? r : a.dimension(d);
        if (d < dim) outer *= a.dimension(d);
        if (d > dim) inner *= a.dimension(d);
    }
    DenseTensor<Scalar, 4> out(out_dims);
    const Scalar* src = a.data();
    Scalar* dst = out.data();
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    for (Index o = 0; o < outer; ++o) {
        for (Index rep = 0; rep < r; ++rep) {
            Eigen::Map<Vec> acc(dst + (o * r + rep) * inner, inner);
            acc.setZero();
            for (Index x = 0; x < n; ++x) {
                const auto w = static_cast<Scalar>(plan.weights(rep, x));
                const Scalar* slice = src + (o * axis + plan.indices(rep, x)) * inner;
                acc += w * Eigen::Map<const Vec>(slice, inner);
            }
        }
    }
    return out;
}

} // namespace morfi
