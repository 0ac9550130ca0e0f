#include "morfi/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "tensor container I/O assumes a little-endian host");

namespace morfi {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'R', 'F', 'I', 'T', 'N', 'S'};
constexpr uint32_t kVersion = 1;
constexpr size_t kHeaderBytes = 64;

constexpr uint32_t kDtypeF32 = 0;
constexpr uint32_t kDtypeF64 = 1;

template <typename Scalar> constexpr uint32_t dtype_code();
template <> constexpr uint32_t dtype_code<float>() { return kDtypeF32; }
template <> constexpr uint32_t dtype_code<double>() { return kDtypeF64; }

void read_exact(std::istream& in, void* dst, size_t bytes, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(in.gcount()) != bytes)
        throw TensorIoError(TensorIoErrorKind::truncated,
                            std::string("tensor file truncated while reading ") + what);
}

struct Header {
    uint32_t version = 0;
    uint32_t dtype = 0;
    uint64_t dims[4] = {0, 0, 0, 0};
};

Header read_header(std::istream& in) {
    char raw[kHeaderBytes];
    in.read(raw, kHeaderBytes);
    if (static_cast<size_t>(in.gcount()) != kHeaderBytes)
        throw TensorIoError(TensorIoErrorKind::truncated, "tensor file shorter than its header");
    if (std::memcmp(raw, kMagic, sizeof(kMagic)) != 0)
        throw TensorIoError(TensorIoErrorKind::bad_magic, "not a tensor container (bad magic bytes)");
    Header h;
    std::memcpy(&h.version, raw + 8, 4);
    std::memcpy(&h.dtype, raw + 12, 4);
    std::memcpy(h.dims, raw + 16, 32);
    if (h.version != kVersion)
        throw TensorIoError(TensorIoErrorKind::bad_version,
                            "unsupported tensor container version " + std::to_string(h.version));
    if (h.dtype != kDtypeF32 && h.dtype != kDtypeF64)
        throw TensorIoError(TensorIoErrorKind::bad_dtype,
                            "unknown tensor dtype code " + std::to_string(h.dtype));
    for (uint64_t d : h.dims)
        if (d == 0)
            throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                                "tensor header declares a zero-length dimension");
    return h;
}

template <typename Scalar>
ActivationTensor<Scalar> read_body(std::istream& in, const Header& h) {
    ActivationTensor<Scalar> t;
    const auto T = static_cast<Index>(h.dims[0]);
    const auto P = static_cast<Index>(h.dims[1]);
    const auto F = static_cast<Index>(h.dims[2]);
    const auto N = static_cast<Index>(h.dims[3]);

    t.epoch_axis.resize(static_cast<size_t>(T));
    read_exact(in, t.epoch_axis.data(), static_cast<size_t>(T) * 8, "epoch axis");
    t.mixture_axis.resize(static_cast<size_t>(P));
    read_exact(in, t.mixture_axis.data(), static_cast<size_t>(P) * 8, "mixture axis");

    t.sample_ids.resize(static_cast<size_t>(N));
    for (Index i = 0; i < N; ++i) {
        uint32_t len = 0;
        read_exact(in, &len, 4, "sample id length");
        if (len > (1u << 20))
            throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                                "sample id length is implausibly large");
        std::string s(len, '\0');
        if (len) read_exact(in, s.data(), len, "sample id");
        t.sample_ids[static_cast<size_t>(i)] = std::move(s);
    }

    t.data.resize(T, P, F, N);
    read_exact(in, t.data.data(), static_cast<size_t>(t.data.size()) * sizeof(Scalar), "payload");
    if (in.peek() != std::char_traits<char>::eof())
        throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                            "tensor file has trailing bytes beyond the declared payload");

    for (size_t i = 1; i < t.epoch_axis.size(); ++i)
        if (!(t.epoch_axis[i - 1] < t.epoch_axis[i]))
            throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                                "stored epoch axis is not strictly increasing");
    for (size_t i = 1; i < t.mixture_axis.size(); ++i)
        if (!(t.mixture_axis[i - 1] < t.mixture_axis[i]))
            throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                                "stored mixture axis is not strictly increasing");
    return t;
}

} // namespace

template <typename Scalar>
void write_tensor(const ActivationTensor<Scalar>& t, const std::filesystem::path& path) {
    t.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw TensorIoError(TensorIoErrorKind::io_failure,
                            "cannot open " + path.string() + " for writing");

    char raw[kHeaderBytes] = {};
    std::memcpy(raw, kMagic, sizeof(kMagic));
    uint32_t version = kVersion, dtype = dtype_code<Scalar>();
    std::memcpy(raw + 8, &version, 4);
    std::memcpy(raw + 12, &dtype, 4);
    uint64_t dims[4] = {static_cast<uint64_t>(t.epochs()), static_cast<uint64_t>(t.mixtures()),
                        static_cast<uint64_t>(t.latents()), static_cast<uint64_t>(t.samples())};
    std::memcpy(raw + 16, dims, 32);
    out.write(raw, kHeaderBytes);

    out.write(reinterpret_cast<const char*>(t.epoch_axis.data()),
              static_cast<std::streamsize>(t.epoch_axis.size() * 8));
    out.write(reinterpret_cast<const char*>(t.mixture_axis.data()),
              static_cast<std::streamsize>(t.mixture_axis.size() * 8));
    for (const auto& id : t.sample_ids) {
        auto len = static_cast<uint32_t>(id.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(static_cast<size_t>(t.data.size()) * sizeof(Scalar)));
    out.flush();
    if (!out)
        throw TensorIoError(TensorIoErrorKind::io_failure, "write to " + path.string() + " failed");
}

template <typename Scalar>
ActivationTensor<Scalar> load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw TensorIoError(TensorIoErrorKind::io_failure, "cannot open " + path.string());
    Header h = read_header(in);
    if (h.dtype != dtype_code<Scalar>())
        throw TensorIoError(TensorIoErrorKind::bad_dtype,
                            path.string() + " holds a different scalar type than requested");
    return read_body<Scalar>(in, h);
}

ActivationTensor<double> load_tensor_any(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw TensorIoError(TensorIoErrorKind::io_failure, "cannot open " + path.string());
    Header h = read_header(in);
    if (h.dtype == kDtypeF64) return read_body<double>(in, h);
    return promote(read_body<float>(in, h));
}

ActivationTensor<float> import_checkpoint_dir(const std::filesystem::path& dir,
                                              const std::vector<std::string>& epoch_labels,
                                              const std::vector<std::string>& mixture_labels,
                                              Index latents, Index samples,
                                              const std::vector<std::string>& sample_ids) {
    if (epoch_labels.empty() || mixture_labels.empty() || latents < 1 || samples < 1)
        throw ValidationError("import: need at least one epoch, one mixture, F >= 1, N >= 1");

    ActivationTensor<float> t;
    auto parse_axis = [](const std::vector<std::string>& labels, const char* what) {
        std::vector<double> axis;
        axis.reserve(labels.size());
        for (const auto& s : labels) {
            try {
                size_t pos = 0;
                axis.push_back(std::stod(s, &pos));
                if (pos != s.size()) throw std::invalid_argument(s);
            } catch (const std::exception&) {
                throw ValidationError(std::string("import: ") + what + " label '" + s +
                                      "' is not numeric");
            }
        }
        return axis;
    };
    t.epoch_axis = parse_axis(epoch_labels, "epoch");
    t.mixture_axis = parse_axis(mixture_labels, "mixture");

    const auto T = static_cast<Index>(epoch_labels.size());
    const auto P = static_cast<Index>(mixture_labels.size());
    t.data.resize(T, P, latents, samples);

    if (!sample_ids.empty()) {
        if (static_cast<Index>(sample_ids.size()) != samples)
            throw ValidationError("import: sample id count does not match N");
        t.sample_ids = sample_ids;
    } else {
        t.sample_ids.resize(static_cast<size_t>(samples));
        for (Index i = 0; i < samples; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "sample_%04lld", static_cast<long long>(i));
            t.sample_ids[static_cast<size_t>(i)] = buf;
        }
    }

    std::vector<float> cell(static_cast<size_t>(samples) * static_cast<size_t>(latents));
    for (Index e = 0; e < T; ++e) {
        for (Index p = 0; p < P; ++p) {
            auto path = dir / ("e" + epoch_labels[static_cast<size_t>(e)] + "_p" +
                               mixture_labels[static_cast<size_t>(p)] + ".bin");
            std::ifstream in(path, std::ios::binary);
            if (!in)
                throw TensorIoError(TensorIoErrorKind::io_failure, "cannot open " + path.string());
            in.seekg(0, std::ios::end);
            const auto bytes = static_cast<uint64_t>(in.tellg());
            const uint64_t want = cell.size() * sizeof(float);
            if (bytes != want)
                throw TensorIoError(TensorIoErrorKind::shape_mismatch,
                                    path.string() + ": expected " + std::to_string(want) +
                                        " bytes for an [N, F] f32 matrix, found " +
                                        std::to_string(bytes));
            in.seekg(0);
            read_exact(in, cell.data(), want, "cell matrix");
            // cell files are [N, F]; the tensor wants [F, N] within this (e, p) slice
            float* slice = t.data.data() + (e * P + p) * latents * samples;
            for (Index n = 0; n < samples; ++n)
                for (Index f = 0; f < latents; ++f)
                    slice[f * samples + n] = cell[static_cast<size_t>(n * latents + f)];
        }
    }
    t.validate();
    return t;
}

template void write_tensor<float>(const ActivationTensor<float>&, const std::filesystem::path&);
template void write_tensor<double>(const ActivationTensor<double>&, const std::filesystem::path&);
template ActivationTensor<float> load_tensor<float>(const std::filesystem::path&);
template ActivationTensor<double> load_tensor<double>(const std::filesystem::path&);

} // namespace morfi
