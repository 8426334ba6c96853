#include "doctest.h"
#include "sadnn/synth.hpp"

using namespace sadnn;

TEST_CASE("synthetic datasets are deterministic in (n, seed)") {
    Dataset a = synth_cls_dataset(6, 17);
    Dataset b = synth_cls_dataset(6, 17);
    Dataset c = synth_cls_dataset(6, 18);
    REQUIRE(a.size() == 6);
    bool identical = true, differs = false;
    for (std::size_t s = 0; s < a.size(); ++s) {
        for (std::size_t i = 0; i < a[s].image.numel(); ++i) {
            identical = identical && a[s].image[i] == b[s].image[i];
            differs = differs || a[s].image[i] != c[s].image[i];
        }
        for (std::size_t i = 0; i < a[s].label.numel(); ++i)
            identical = identical && a[s].label[i] == b[s].label[i];
    }
    CHECK(identical);
    CHECK(differs);

    Dataset sa = synth_seg_dataset(4, 17);
    Dataset sb = synth_seg_dataset(4, 17);
    for (std::size_t s = 0; s < sa.size(); ++s)
        for (std::size_t i = 0; i < sa[s].image.numel(); ++i)
            CHECK(sa[s].image[i] == sb[s].image[i]);
}

TEST_CASE("n = 0 yields an empty dataset") {
    CHECK(synth_cls_dataset(0, 1).empty());
    CHECK(synth_seg_dataset(0, 1).empty());
}

TEST_CASE("classification labels are balanced multi-hot vectors") {
    Dataset data = synth_cls_dataset(1000, 42);
    double marginal[3] = {0, 0, 0};
    for (const auto& s : data) {
        REQUIRE(s.label.numel() == 3);
        for (std::size_t l = 0; l < 3; ++l) {
            CHECK((s.label[l] == 0.0f || s.label[l] == 1.0f));
            marginal[l] += s.label[l];
        }
    }
    for (double m : marginal) {
        CHECK(m / 1000.0 > 0.45);
        CHECK(m / 1000.0 < 0.55);
    }
}

TEST_CASE("classification images stay in [0, 1]") {
    for (const auto& s : synth_cls_dataset(50, 7)) {
        REQUIRE(s.image.shape() == std::vector<std::size_t>{1, 32, 32});
        for (std::size_t i = 0; i < s.image.numel(); ++i) {
            CHECK(s.image[i] >= 0.0f);
            CHECK(s.image[i] <= 1.0f);
        }
    }
}

TEST_CASE("segmentation masks are binary with bounded foreground") {
    Dataset data = synth_seg_dataset(200, 9);
    for (const auto& s : data) {
        REQUIRE(s.label.shape() == s.image.shape());
        double fg = 0;
        for (std::size_t i = 0; i < s.label.numel(); ++i) {
            CHECK((s.label[i] == 0.0f || s.label[i] == 1.0f));
            CHECK(s.image[i] >= 0.0f);
            CHECK(s.image[i] <= 1.0f);
            fg += s.label[i];
        }
        fg /= double(s.label.numel());
        CHECK(fg >= 0.05);  // every sample has at least one blob
        CHECK(fg <= 0.6);
    }
}

TEST_CASE("segmentation foreground is brighter than the background") {
    // blobs are drawn at intensity >= 0.7 over noise <= 0.2
    for (const auto& s : synth_seg_dataset(20, 11)) {
        double fg_min = 1.0, bg_max = 0.0;
        for (std::size_t i = 0; i < s.image.numel(); ++i) {
            if (s.label[i] == 1.0f)
                fg_min = std::min(fg_min, double(s.image[i]));
            else
                bg_max = std::max(bg_max, double(s.image[i]));
        }
        CHECK(fg_min >= 0.7);
        CHECK(bg_max <= 0.2);
    }
}

TEST_CASE("size preconditions are enforced") {
    CHECK_THROWS_AS(synth_cls_dataset(1, 1, 8, 8), ConfigError);
    CHECK_THROWS_AS(synth_seg_dataset(1, 1, 16, 16), ConfigError);
}
