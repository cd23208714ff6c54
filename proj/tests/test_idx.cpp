#include <doctest.h>

#include <random>

#include "faultlab/error.hpp"
#include "faultlab/idx.hpp"
#include "support.hpp"

using namespace faultlab;
using namespace testsup;

TEST_CASE("decodes a hand-built synthetic image file") {
    TmpDir tmp("idx");
    // header (0x00000803, 2, 2, 2) + bytes [0,255,128,0, 255,0,0,128]
    write_bytes(tmp.path / "img",
                idx_images_bytes(2, 2, 2, {0, 255, 128, 0, 255, 0, 0, 128}));
    Tensor t = idx::load_idx_images(tmp.path / "img");
    REQUIRE(t.shape() == std::vector<std::size_t>({2, 2, 2}));
    CHECK(t.at3(0, 0, 0) == 0.0);
    CHECK(t.at3(0, 0, 1) == 1.0);
    CHECK(t.at3(0, 1, 0) == 128.0 / 255.0);
    CHECK(t.at3(0, 1, 1) == 0.0);
    CHECK(t.at3(1, 0, 0) == 1.0);
    CHECK(t.at3(1, 0, 1) == 0.0);
    CHECK(t.at3(1, 1, 0) == 0.0);
    CHECK(t.at3(1, 1, 1) == 128.0 / 255.0);
}

TEST_CASE("all-zero pixel bytes give an all-zero tensor") {
    TmpDir tmp("idx");
    write_bytes(tmp.path / "img",
                idx_images_bytes(1, 3, 3, std::vector<std::uint8_t>(9, 0)));
    Tensor t = idx::load_idx_images(tmp.path / "img");
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == 0.0);
}

TEST_CASE("label file decodes and validates") {
    TmpDir tmp("idx");
    write_bytes(tmp.path / "lab", idx_labels_bytes({7, 0, 9}));
    CHECK(idx::load_idx_labels(tmp.path / "lab") == std::vector<int>({7, 0, 9}));

    write_bytes(tmp.path / "empty", idx_labels_bytes({}));
    CHECK(idx::load_idx_labels(tmp.path / "empty").empty());

    write_bytes(tmp.path / "bad", idx_labels_bytes({3, 12, 1}));
    CHECK_THROWS_AS(idx::load_idx_labels(tmp.path / "bad"), DomainError);
}

TEST_CASE("wrong magic is named in the error") {
    TmpDir tmp("idx");
    write_bytes(tmp.path / "lab", idx_images_bytes(1, 1, 1, {5}));
    try {
        idx::load_idx_labels(tmp.path / "lab");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("0x00000803") != std::string::npos);
        CHECK(std::string(e.what()).find("0x00000801") != std::string::npos);
    }
}

TEST_CASE("truncated payload is a length mismatch") {
    TmpDir tmp("idx");
    auto bytes = idx_images_bytes(2, 2, 2, {0, 255, 128, 0, 255, 0, 0, 128});
    bytes.pop_back();
    write_bytes(tmp.path / "img", bytes);
    CHECK_THROWS_AS(idx::load_idx_images(tmp.path / "img"), FormatError);
}

TEST_CASE("gzip-compressed files load identically") {
    TmpDir tmp("idx");
    // gzip.compress of the (0x00000801, 3, [7,0,9]) label file, mtime 0.
    static const std::uint8_t gz[] = {
        0x1f, 0x8b, 0x08, 0x00, 0x00, 0x00, 0x00, 0x00, 0x02, 0xff, 0x63,
        0x60, 0xe0, 0x60, 0x64, 0x60, 0x60, 0x60, 0x66, 0x67, 0xe0, 0x04,
        0x00, 0xa5, 0x12, 0xd3, 0x72, 0x0b, 0x00, 0x00, 0x00};
    write_bytes(tmp.path / "lab.gz",
                std::vector<std::uint8_t>(gz, gz + sizeof(gz)));
    CHECK(idx::load_idx_labels(tmp.path / "lab.gz") ==
          std::vector<int>({7, 0, 9}));

    // A corrupted stream must not load silently.
    auto broken = std::vector<std::uint8_t>(gz, gz + sizeof(gz));
    broken[15] ^= 0xFF;
    write_bytes(tmp.path / "bad.gz", broken);
    CHECK_THROWS(idx::load_idx_labels(tmp.path / "bad.gz"));
}

TEST_CASE("one_hot builds basis vectors") {
    Tensor t = idx::one_hot({3}, 10);
    for (std::size_t k = 0; k < 10; ++k)
        CHECK(t.at2(0, k) == (k == 3 ? 1.0 : 0.0));
    Tensor t2 = idx::one_hot({0}, 2);
    CHECK(t2.at2(0, 0) == 1.0);
    CHECK(t2.at2(0, 1) == 0.0);
    Tensor t3 = idx::one_hot({1, 1}, 2);
    CHECK(t3.at2(0, 1) == 1.0);
    CHECK(t3.at2(1, 1) == 1.0);
    CHECK_THROWS_AS(idx::one_hot({2}, 2), DomainError);
}

TEST_CASE("one_hot round-trips through argmax and rows sum to one") {
    std::mt19937 g(5);
    std::vector<int> labels(500);
    for (int& l : labels) l = static_cast<int>(g() % 10);
    Tensor oh = idx::one_hot(labels, 10);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double sum = 0.0;
        std::size_t arg = 0;
        for (std::size_t k = 0; k < 10; ++k) {
            sum += oh.at2(i, k);
            if (oh.at2(i, k) > oh.at2(i, arg)) arg = k;
        }
        CHECK(sum == 1.0);
        CHECK(arg == static_cast<std::size_t>(labels[i]));
    }
}

TEST_CASE("loaded datasets stay inside [0,1] and counts line up") {
    TmpDir tmp("idx");
    write_synth_mnist(tmp.path, 64, 32);
    idx::Dataset train =
        idx::load_dataset(tmp.path / "train-images-idx3-ubyte",
                          tmp.path / "train-labels-idx1-ubyte");
    CHECK(train.count() == 64);
    CHECK(train.images.extent(0) == 64);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < train.images.size(); ++i) {
        lo = std::min(lo, train.images[i]);
        hi = std::max(hi, train.images[i]);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(train.one_hot.extent(0) == 64);

    idx::Dataset sub = idx::subsample(train, 10);
    CHECK(sub.count() == 10);
    CHECK(sub.images.at3(0, 14, 14) == train.images.at3(0, 14, 14));
}

TEST_CASE("count mismatch between images and labels is rejected") {
    TmpDir tmp("idx");
    write_bytes(tmp.path / "img", idx_images_bytes(2, 1, 1, {1, 2}));
    write_bytes(tmp.path / "lab", idx_labels_bytes({1}));
    CHECK_THROWS_AS(idx::load_dataset(tmp.path / "img", tmp.path / "lab"),
                    FormatError);
}
