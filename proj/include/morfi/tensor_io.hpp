#pragma once

#include "morfi/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace morfi {

enum class TensorIoErrorKind {
    bad_magic,       // first 8 bytes are not the container magic
    bad_version,     // container version not understood
    bad_dtype,       // dtype code not f32/f64
    truncated,       // file ends before the declared contents
    shape_mismatch,  // declared dims disagree with stored axes/payload
    io_failure,      // filesystem level failure
};

struct TensorIoError : ValidationError {
    TensorIoError(TensorIoErrorKind k, const std::string& msg) : ValidationError(msg), kind(k) {}
    TensorIoErrorKind kind;
};

// On-disk container: 64-byte header (8-byte magic, u32 version, u32 dtype code,
// four u64 dims, zero padding), both axis label vectors as little-endian f64,
// length-prefixed UTF-8 sample ids, then the row-major payload.
template <typename Scalar>
void write_tensor(const ActivationTensor<Scalar>& t, const std::filesystem::path& path);

template <typename Scalar>
ActivationTensor<Scalar> load_tensor(const std::filesystem::path& path);

// Loads either payload dtype, widening f32 to f64.
ActivationTensor<double> load_tensor_any(const std::filesystem::path& path);

// Assembles a tensor from a directory holding one raw row-major [N, F] f32
// matrix per condition cell, named e{epoch}_p{mixture}.bin after the axis
// labels as given (e.g. e10_p25.bin). Sample ids default to sample_0000... and
// may be overridden.
ActivationTensor<float> import_checkpoint_dir(const std::filesystem::path& dir,
                                              const std::vector<std::string>& epoch_labels,
                                              const std::vector<std::string>& mixture_labels,
                                              Index latents, Index samples,
                                              const std::vector<std::string>& sample_ids = {});

} // namespace morfi
