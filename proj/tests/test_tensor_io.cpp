#include "morfi/tensor_io.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace morfi;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() /
                 ("morfi_io_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

template <typename Scalar>
ActivationTensor<Scalar> random_tensor(testref::Rng& rng, Index t, Index p, Index f, Index n) {
    ActivationTensor<Scalar> a;
    a.data.resize(t, p, f, n);
    for (Index i = 0; i < a.data.size(); ++i)
        a.data.data()[i] = static_cast<Scalar>(rng.gauss());
    double e = rng.uniform(-3.0, 0.0);
    for (Index i = 0; i < t; ++i) a.epoch_axis.push_back(e += rng.uniform(0.1, 2.0));
    double m = rng.uniform(-1.0, 0.0);
    for (Index i = 0; i < p; ++i) a.mixture_axis.push_back(m += rng.uniform(0.1, 2.0));
    for (Index i = 0; i < n; ++i) a.sample_ids.push_back("id_" + std::to_string(i));
    return a;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TensorIoErrorKind load_kind(const fs::path& p) {
    try {
        (void)load_tensor_any(p);
    } catch (const TensorIoError& e) {
        return e.kind;
    }
    FAIL("expected a TensorIoError");
    return TensorIoErrorKind::io_failure;
}

} // namespace

TEST_CASE("round trip preserves a [2,2,4,3] tensor bit for bit") {
    testref::Rng rng(11);
    const auto t = random_tensor<double>(rng, 2, 2, 4, 3);
    const auto path = temp_dir() / "roundtrip.tnsr";
    write_tensor(t, path);
    const auto back = load_tensor<double>(path);

    CHECK(back.epoch_axis == t.epoch_axis);
    CHECK(back.mixture_axis == t.mixture_axis);
    CHECK(back.sample_ids == t.sample_ids);
    REQUIRE(back.data.size() == t.data.size());
    CHECK(std::memcmp(back.data.data(), t.data.data(),
                      static_cast<size_t>(t.data.size()) * sizeof(double)) == 0);
}

TEST_CASE("f32 tensors round trip and promote through load_tensor_any") {
    testref::Rng rng(12);
    const auto t = random_tensor<float>(rng, 1, 3, 2, 2);
    const auto path = temp_dir() / "f32.tnsr";
    write_tensor(t, path);

    const auto same = load_tensor<float>(path);
    CHECK(std::memcmp(same.data.data(), t.data.data(),
                      static_cast<size_t>(t.data.size()) * sizeof(float)) == 0);

    const auto wide = load_tensor_any(path);
    for (Index i = 0; i < t.data.size(); ++i)
        CHECK(wide.data.data()[i] == static_cast<double>(t.data.data()[i]));

    try {
        (void)load_tensor<double>(path);
        FAIL("requesting the wrong scalar type must throw");
    } catch (const TensorIoError& e) {
        CHECK(e.kind == TensorIoErrorKind::bad_dtype);
    }
}

TEST_CASE("serialization is deterministic") {
    testref::Rng rng(13);
    const auto t = random_tensor<double>(rng, 2, 3, 3, 4);
    const auto p1 = temp_dir() / "det1.tnsr";
    const auto p2 = temp_dir() / "det2.tnsr";
    write_tensor(t, p1);
    write_tensor(t, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("each corruption raises its own error kind") {
    testref::Rng rng(14);
    const auto t = random_tensor<double>(rng, 2, 2, 3, 2);
    const auto clean_path = temp_dir() / "clean.tnsr";
    write_tensor(t, clean_path);
    const auto clean = slurp(clean_path);
    const auto mangled = temp_dir() / "mangled.tnsr";

    SUBCASE("corrupted magic") {
        auto bytes = clean;
        bytes[0] = 'X';
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::bad_magic);
    }
    SUBCASE("unknown version") {
        auto bytes = clean;
        bytes[8] = 7;
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::bad_version);
    }
    SUBCASE("unknown dtype code") {
        auto bytes = clean;
        bytes[12] = 9;
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::bad_dtype);
    }
    SUBCASE("header shorter than 64 bytes") {
        auto bytes = clean;
        bytes.resize(30);
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::truncated);
    }
    SUBCASE("payload cut short") {
        auto bytes = clean;
        bytes.resize(bytes.size() - sizeof(double));
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::truncated);
    }
    SUBCASE("header declares more latents than the payload holds") {
        auto bytes = clean;
        uint64_t f = 8; // actual tensor has F = 3
        std::memcpy(bytes.data() + 16 + 16, &f, 8);
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::truncated);
    }
    SUBCASE("trailing bytes beyond the payload") {
        auto bytes = clean;
        bytes.push_back(0);
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::shape_mismatch);
    }
    SUBCASE("zero-length dimension") {
        auto bytes = clean;
        uint64_t zero = 0;
        std::memcpy(bytes.data() + 16, &zero, 8);
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::shape_mismatch);
    }
    SUBCASE("stored epoch axis out of order") {
        auto bytes = clean;
        // swap the two epoch labels right after the header
        double e0, e1;
        std::memcpy(&e0, bytes.data() + 64, 8);
        std::memcpy(&e1, bytes.data() + 72, 8);
        std::memcpy(bytes.data() + 64, &e1, 8);
        std::memcpy(bytes.data() + 72, &e0, 8);
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::shape_mismatch);
    }
    SUBCASE("absurd sample id length") {
        auto bytes = clean;
        const size_t id_len_off = 64 + 2 * 8 + 2 * 8; // header + epoch axis + mixture axis
        uint32_t big = 0x7FFFFFFF;
        std::memcpy(bytes.data() + id_len_off, &big, 4);
        spit(mangled, bytes);
        CHECK(load_kind(mangled) == TensorIoErrorKind::shape_mismatch);
    }
    SUBCASE("missing file") {
        CHECK(load_kind(temp_dir() / "no_such_file.tnsr") == TensorIoErrorKind::io_failure);
    }
}

TEST_CASE("import assembles per-cell matrices, transposing [N,F] to [F,N]") {
    const auto dir = temp_dir() / "import";
    fs::create_directories(dir);

    const Index F = 3, N = 2;
    // values[e][p][n][f] laid out as the raw cell files expect
    float counter = 0.0f;
    for (const char* e : {"10", "20"}) {
        for (const char* p : {"0", "25"}) {
            std::ofstream out(dir / (std::string("e") + e + "_p" + p + ".bin"),
                              std::ios::binary);
            for (Index n = 0; n < N; ++n)
                for (Index f = 0; f < F; ++f) {
                    float v = counter;
                    counter += 1.0f;
                    out.write(reinterpret_cast<const char*>(&v), 4);
                }
        }
    }

    const auto t = import_checkpoint_dir(dir, {"10", "20"}, {"0", "25"}, F, N);
    CHECK(t.epoch_axis == std::vector<double>{10.0, 20.0});
    CHECK(t.mixture_axis == std::vector<double>{0.0, 25.0});
    CHECK(t.sample_ids == std::vector<std::string>{"sample_0000", "sample_0001"});
    // first cell wrote n-major values 0..5; tensor stores latent-major
    CHECK(t.data(0, 0, 0, 0) == 0.0f);
    CHECK(t.data(0, 0, 0, 1) == 3.0f);
    CHECK(t.data(0, 0, 2, 0) == 2.0f);
    CHECK(t.data(0, 0, 2, 1) == 5.0f);
    CHECK(t.data(1, 1, 0, 0) == 18.0f);

    SUBCASE("explicit sample ids are used verbatim") {
        const auto u = import_checkpoint_dir(dir, {"10", "20"}, {"0", "25"}, F, N, {"a", "b"});
        CHECK(u.sample_ids == std::vector<std::string>{"a", "b"});
    }
    SUBCASE("id count mismatch") {
        CHECK_THROWS_AS(import_checkpoint_dir(dir, {"10", "20"}, {"0", "25"}, F, N, {"a"}),
                        ValidationError);
    }
    SUBCASE("missing cell file") {
        CHECK_THROWS_AS(import_checkpoint_dir(dir, {"10", "30"}, {"0", "25"}, F, N),
                        TensorIoError);
    }
    SUBCASE("wrong cell size") {
        CHECK_THROWS_AS(import_checkpoint_dir(dir, {"10", "20"}, {"0", "25"}, F + 1, N),
                        TensorIoError);
    }
    SUBCASE("non-numeric label") {
        CHECK_THROWS_AS(import_checkpoint_dir(dir, {"10", "2x"}, {"0", "25"}, F, N),
                        ValidationError);
    }
}
