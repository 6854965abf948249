#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "maxoutlab/dataio.hpp"

using namespace maxoutlab;

namespace {

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// Writes raw bytes independently of save_idx, so load_idx is checked against
// a hand-assembled file rather than its own inverse.
void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
    return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& dst, const std::vector<unsigned char>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

} // namespace

TEST_CASE("load_idx parses a hand-assembled fixture") {
    // two 2x2 images, pixel bytes 0, 51, 102, 255 and 10, 20, 30, 40
    std::vector<unsigned char> img;
    append(img, be32(0x00000803));
    append(img, be32(2));
    append(img, be32(2));
    append(img, be32(2));
    append(img, {0, 51, 102, 255, 10, 20, 30, 40});
    std::vector<unsigned char> lab;
    append(lab, be32(0x00000801));
    append(lab, be32(2));
    append(lab, {7, 3});

    const std::string ip = tmp_path("idx_fixture_images"), lp = tmp_path("idx_fixture_labels");
    write_bytes(ip, img);
    write_bytes(lp, lab);

    const Dataset d = load_idx(ip, lp);
    REQUIRE(d.size() == 2);
    REQUIRE(d.dim() == 4);
    CHECK(d.inputs.at(0, 0) == 0.0);
    CHECK(d.inputs.at(0, 1) == 51.0 / 255.0);
    CHECK(d.inputs.at(0, 3) == 1.0);
    CHECK(d.inputs.at(1, 2) == 30.0 / 255.0);
    CHECK(d.labels[0] == 7);
    CHECK(d.labels[1] == 3);
    std::remove(ip.c_str());
    std::remove(lp.c_str());
}

TEST_CASE("load_idx reports magic, count and truncation errors") {
    const std::string ip = tmp_path("idx_bad_images"), lp = tmp_path("idx_bad_labels");

    std::vector<unsigned char> lab;
    append(lab, be32(0x00000801));
    append(lab, be32(1));
    append(lab, {0});
    write_bytes(lp, lab);

    std::vector<unsigned char> bad_magic;
    append(bad_magic, be32(0x00000802));
    append(bad_magic, be32(1));
    append(bad_magic, be32(1));
    append(bad_magic, be32(1));
    append(bad_magic, {9});
    write_bytes(ip, bad_magic);
    CHECK_THROWS_WITH_AS(load_idx(ip, lp),
                         doctest::Contains("expected 0x00000803, got 0x00000802"), ParseError);

    std::vector<unsigned char> truncated;
    append(truncated, be32(0x00000803));
    append(truncated, be32(1));
    append(truncated, be32(2));
    append(truncated, be32(2));
    append(truncated, {1, 2});  // 2 of 4 pixel bytes
    write_bytes(ip, truncated);
    CHECK_THROWS_WITH_AS(load_idx(ip, lp), doctest::Contains("truncated at byte 16"),
                         ParseError);

    std::vector<unsigned char> ok;
    append(ok, be32(0x00000803));
    append(ok, be32(2));
    append(ok, be32(1));
    append(ok, be32(1));
    append(ok, {1, 2});
    write_bytes(ip, ok);  // 2 images vs 1 label
    CHECK_THROWS_WITH_AS(load_idx(ip, lp), doctest::Contains("count mismatch"), ParseError);

    std::remove(ip.c_str());
    std::remove(lp.c_str());
}

TEST_CASE("save_idx then load_idx round-trips quantized pixels") {
    Dataset d;
    d.inputs = Tensor({2, 4}, {0.0, 0.5, 1.0, 0.2, 0.9, 0.1, 0.3, 0.7});
    d.labels = {4, 9};
    const std::string ip = tmp_path("idx_rt_images"), lp = tmp_path("idx_rt_labels");
    save_idx(d, ip, lp, 2, 2);
    const Dataset back = load_idx(ip, lp);
    REQUIRE(back.size() == 2);
    CHECK(back.labels == d.labels);
    for (std::size_t i = 0; i < d.inputs.size(); ++i)
        CHECK(back.inputs.data[i] ==
              static_cast<double>(std::lround(d.inputs.data[i] * 255.0)) / 255.0);
    std::remove(ip.c_str());
    std::remove(lp.c_str());
}

TEST_CASE("gcn normalizes one row to hand-computed values") {
    // row (1, 3): mean 2, centered (-1, 1), mean square 1
    Tensor X({1, 2}, {1.0, 3.0});
    const Tensor out = gcn(X, 2.0, 3.0);
    CHECK(out.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));  // 2 * -1 / sqrt(4)
    CHECK(out.at(0, 1) == doctest::Approx(1.0).epsilon(1e-15));

    // constant row with lambda 0 maps to zeros instead of dividing by zero
    Tensor C({1, 3}, {5.0, 5.0, 5.0});
    const Tensor cz = gcn(C, 55.0, 0.0);
    for (double v : cz.data) CHECK(v == 0.0);

    CHECK_THROWS_AS(gcn(X, -1.0, 0.0), std::domain_error);
}

TEST_CASE("zca whitening makes the train covariance near identity") {
    Prng rng(404);
    const std::size_t n = 400, d = 5;
    // correlated inputs: x = A * z
    Tensor Z = sample_normal(rng, 0.0, 1.0, {n, d});
    Tensor A = sample_normal(rng, 0.0, 1.0, {d, d});
    for (std::size_t i = 0; i < d; ++i) A.at(i, i) += 2.0;
    const Tensor X = matmul(Z, A);

    const ZcaTransform t = zca_fit(X, 1e-8);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            CHECK(t.whitening.at(i, j) == doctest::Approx(t.whitening.at(j, i)).epsilon(1e-9));

    const Tensor W = zca_apply(t, X);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double c = 0.0;
            for (std::size_t r = 0; r < n; ++r) c += W.at(r, i) * W.at(r, j);
            c /= static_cast<double>(n);
            CHECK(c == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-5).scale(1.0));
        }

    CHECK_THROWS_AS(zca_apply(t, Tensor::zeros({3, d + 1})), DimensionError);
    CHECK_THROWS_AS(zca_fit(X, 0.0), std::domain_error);
}

TEST_CASE("last-k split preserves order") {
    Dataset d;
    d.inputs = Tensor({5, 1}, {0, 1, 2, 3, 4});
    d.labels = {0, 1, 0, 1, 0};
    SplitSpec spec;
    spec.mode = SplitSpec::Mode::LastK;
    spec.valid_n = 2;
    const SplitResult r = split(d, spec);
    CHECK(r.train_idx == std::vector<std::size_t>{0, 1, 2});
    CHECK(r.valid_idx == std::vector<std::size_t>{3, 4});
    CHECK(r.train.inputs.data == std::vector<double>{0, 1, 2});
    CHECK(r.valid.labels == std::vector<int>{1, 0});

    spec.valid_n = 5;
    CHECK_THROWS_AS(split(d, spec), std::domain_error);
}

TEST_CASE("per-class split is balanced, disjoint and seed-stable") {
    Dataset d;
    const std::size_t n = 60;
    d.inputs = Tensor::zeros({n, 1});
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.labels[i] = static_cast<int>(i % 3);
        d.inputs.data[i] = static_cast<double>(i);
    }
    SplitSpec spec;
    spec.mode = SplitSpec::Mode::PerClass;
    spec.per_class = 4;
    spec.seed = 9;

    const SplitResult a = split(d, spec);
    CHECK(a.valid_idx.size() == 12);
    CHECK(a.train_idx.size() == 48);
    std::array<int, 3> counts{0, 0, 0};
    for (int l : a.valid.labels) counts[static_cast<std::size_t>(l)]++;
    for (int c : counts) CHECK(c == 4);

    std::set<std::size_t> all(a.train_idx.begin(), a.train_idx.end());
    all.insert(a.valid_idx.begin(), a.valid_idx.end());
    CHECK(all.size() == n);

    const SplitResult b = split(d, spec);
    CHECK(a.valid_idx == b.valid_idx);
    spec.seed = 10;
    const SplitResult c = split(d, spec);
    CHECK(a.valid_idx != c.valid_idx);
}

TEST_CASE("synth_teacher labels come from the returned teacher network") {
    NetworkSpec spec;
    spec.input_dim = 6;
    spec.layers = {LayerKind::maxout(4, 2), LayerKind::softmax(3)};
    Prng rng(2024);
    const TeacherDataset t = synth_teacher(rng, spec, 50);
    REQUIRE(t.data.size() == 50);
    const ForwardTrace trace = forward(t.teacher_params, t.teacher_spec, t.data.inputs);
    for (std::size_t i = 0; i < 50; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c)
            if (trace.probs.at(i, c) > trace.probs.at(i, best)) best = c;
        CHECK(t.data.labels[i] == static_cast<int>(best));
    }
}

TEST_CASE("synth_digits is deterministic, balanced and in range") {
    const Dataset a = synth_digits(7, 100);
    const Dataset b = synth_digits(7, 100);
    REQUIRE(a.size() == 100);
    REQUIRE(a.dim() == 784);
    CHECK(a.inputs.data == b.inputs.data);
    CHECK(a.labels == b.labels);

    std::array<int, 10> counts{};
    for (int l : a.labels) {
        REQUIRE(l >= 0);
        REQUIRE(l < 10);
        counts[static_cast<std::size_t>(l)]++;
    }
    for (int c : counts) CHECK(c == 10);  // round-robin class balance
    for (double v : a.inputs.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }

    const Dataset c = synth_digits(8, 100);
    CHECK(a.inputs.data != c.inputs.data);
}
