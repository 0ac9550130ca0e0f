#pragma once

#include "morfi/common.hpp"

#include <unsupported/Eigen/CXX11/Tensor>

#include <cmath>
#include <string>
#include <vector>

namespace morfi {

template <typename Scalar, int Rank>
using DenseTensor = Eigen::Tensor<Scalar, Rank, Eigen::RowMajor>;

// Per-sample SAE activations aggregated over token positions, laid out as
// [epochs, mixtures, latents, samples]. Axis labels travel with the data so a
// trend test over either condition axis can rank against the real labels.
template <typename Scalar>
struct ActivationTensor {
    DenseTensor<Scalar, 4> data;                 // [T, P, F, N]
    std::vector<double> epoch_axis;              // length T, strictly increasing
    std::vector<double> mixture_axis;            // length P, strictly increasing
    std::vector<std::string> sample_ids;         // length N

    Index epochs() const { return data.dimension(0); }
    Index mixtures() const { return data.dimension(1); }
    Index latents() const { return data.dimension(2); }
    Index samples() const { return data.dimension(3); }

    void validate() const {
        if (epochs() < 1 || mixtures() < 1 || latents() < 1 || samples() < 1)
            throw ValidationError("activation tensor: every dimension must be >= 1");
        if (static_cast<Index>(epoch_axis.size()) != epochs())
            throw ValidationError("activation tensor: epoch axis length != tensor dim 0");
        if (static_cast<Index>(mixture_axis.size()) != mixtures())
            throw ValidationError("activation tensor: mixture axis length != tensor dim 1");
        if (static_cast<Index>(sample_ids.size()) != samples())
            throw ValidationError("activation tensor: sample id count != tensor dim 3");
        for (size_t i = 1; i < epoch_axis.size(); ++i)
            if (!(epoch_axis[i - 1] < epoch_axis[i]))
                throw ValidationError("activation tensor: epoch axis not strictly increasing");
        for (size_t i = 1; i < mixture_axis.size(); ++i)
            if (!(mixture_axis[i - 1] < mixture_axis[i]))
                throw ValidationError("activation tensor: mixture axis not strictly increasing");
        const Scalar* p = data.data();
        const Index total = data.size();
        for (Index i = 0; i < total; ++i)
            if (!std::isfinite(static_cast<double>(p[i])))
                throw ValidationError("activation tensor: data contains NaN or Inf");
    }
};

// Widens f32 storage to f64 once, at the analysis boundary.
inline ActivationTensor<double> promote(const ActivationTensor<float>& t) {
    ActivationTensor<double> out;
    out.data = t.data.template cast<double>();
    out.epoch_axis = t.epoch_axis;
    out.mixture_axis = t.mixture_axis;
    out.sample_ids = t.sample_ids;
    return out;
}

// Raw per-token activations for one forward pass batch: values [N, S, F] and a
// token validity mask [N, S, 1] (false marks positions to drop, e.g. BOS).
template <typename Scalar>
struct TokenActivationBatch {
    DenseTensor<Scalar, 3> values;  // [N, S, F]
    DenseTensor<bool, 3> mask;      // [N, S, 1]

    void validate() const {
        if (values.dimension(0) < 1 || values.dimension(1) < 1 || values.dimension(2) < 1)
            throw ValidationError("token batch: every dimension must be >= 1");
        if (mask.dimension(0) != values.dimension(0) || mask.dimension(1) != values.dimension(1) ||
            mask.dimension(2) != 1)
            throw ValidationError("token batch: mask must have shape [N, S, 1]");
    }
};

// Mean over valid token positions per (sample, latent): sum of masked values
// divided by the count of true mask entries in that sample's row.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> masked_mean_fold(
    const TokenActivationBatch<Scalar>& batch) {
    batch.validate();
    const Index n = batch.values.dimension(0);
    const Index s = batch.values.dimension(1);
    const Index f = batch.values.dimension(2);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(n, f);
    for (Index i = 0; i < n; ++i) {
        Index valid = 0;
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> acc =
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(f);
        for (Index j = 0; j < s; ++j) {
            if (!batch.mask(i, j, 0)) continue;
            ++valid;
            const Scalar* row = batch.values.data() + (i * s + j) * f;
            acc += Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(row, f);
        }
        if (valid == 0)
            throw ValidationError("masked_mean_fold: sample " + std::to_string(i) +
                                  " has no valid token positions");
        out.row(i) = (acc / static_cast<Scalar>(valid)).transpose();
    }
    return out;
}

// Arithmetic mean along one axis; the remaining axes keep their order.
template <typename Scalar, int Rank>
DenseTensor<Scalar, Rank - 1> mean_fold(const DenseTensor<Scalar, Rank>& a, int dim) {
    static_assert(Rank >= 2, "mean_fold needs at least a 2-d input");
    if (dim < 0 || dim >= Rank)
        throw ValidationError("mean_fold: axis " + std::to_string(dim) + " out of range for rank " +
                              std::to_string(Rank));
    Eigen::array<Index, Rank - 1> out_dims;
    Index outer = 1, axis = a.dimension(dim), inner = 1;
    for (int d = 0, o = 0; d < Rank; ++d) {
        if (d < dim) outer *= a.dimension(d);
        if (d > dim) inner *= a.dimension(d);
        if (d != dim) out_dims[o++] = a.dimension(d);
    }
    DenseTensor<Scalar, Rank - 1> out(out_dims);
    const Scalar* src = a.data();
    Scalar* dst = out.data();
    const Scalar inv = Scalar(1) / static_cast<Scalar>(axis);
    for (Index o = 0; o < outer; ++o) {
        Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> acc(dst + o * inner, inner);
        acc.setZero();
        for (Index k = 0; k < axis; ++k)
            acc += Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(
                src + (o * axis + k) * inner, inner);
        acc *= inv;
    }
    return out;
}

} // namespace morfi
