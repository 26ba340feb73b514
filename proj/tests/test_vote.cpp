#include <cmath>
#include <vector>

#include <doctest.h>

#include "crossbar/rng.hpp"
#include "crossbar/submodel.hpp"
#include "crossbar/vote.hpp"

using namespace crossbar;

TEST_CASE("default weights boost the final round of each orientation") {
    CHECK(default_vote_weights(6) == std::vector<double>{1.0, 1.0, 1.5, 1.0, 1.0, 1.5});
    CHECK(default_vote_weights(2) == std::vector<double>{1.5, 1.5});
    CHECK(default_vote_weights(4) == std::vector<double>{1.0, 1.5, 1.0, 1.5});
    CHECK_THROWS_AS(default_vote_weights(3), std::invalid_argument);
    CHECK_THROWS_AS(default_vote_weights(0), std::invalid_argument);
}

TEST_CASE("weighted vote matches exhaustive enumeration under the default weights") {
    const std::vector<double> w = {1.0, 1.0, 1.5, 1.0, 1.0, 1.5};
    for (unsigned pattern = 0; pattern < 64; ++pattern) {
        std::vector<std::uint8_t> labels(6);
        double tumor = 0.0, total = 0.0;
        for (int i = 0; i < 6; ++i) {
            labels[i] = (pattern >> i) & 1u;
            total += w[i];
            if (labels[i]) tumor += w[i];
        }
        const int expected = tumor > total - tumor ? 1 : 0;
        CAPTURE(pattern);
        CHECK(weighted_vote(labels, w) == expected);
    }
}

TEST_CASE("weighted vote is invariant under positive weight scaling") {
    Rng rng(606);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 1 + rng.below(8);
        std::vector<std::uint8_t> labels(n);
        std::vector<double> w(n), scaled(n);
        const double scale = rng.uniform(0.01, 50.0);
        for (size_t i = 0; i < n; ++i) {
            labels[i] = static_cast<std::uint8_t>(rng.below(2));
            w[i] = rng.uniform(0.05, 3.0);
            scaled[i] = w[i] * scale;
        }
        CHECK(weighted_vote(labels, w) == weighted_vote(labels, scaled));
    }
}

TEST_CASE("exact vote ties resolve to non-tumor") {
    CHECK(weighted_vote({1, 0}, {1.0, 1.0}) == 0);
    CHECK(weighted_vote({1, 1, 0}, {1.0, 1.0, 2.0}) == 0);
    CHECK(weighted_vote({1}, {2.0}) == 1);
}

TEST_CASE("weighted vote validates its inputs") {
    CHECK_THROWS_AS(weighted_vote({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(weighted_vote({1, 0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(weighted_vote({1}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(weighted_vote({1}, {-1.0}), std::invalid_argument);
}

TEST_CASE("combining label maps applies the vote pixelwise") {
    BinaryMask a(2, 2), b(2, 2), c(2, 2);
    a.v = {1, 1, 0, 0};
    b.v = {1, 0, 1, 0};
    c.v = {0, 1, 1, 0};
    const std::vector<double> w = {1.0, 1.0, 1.5};
    const BinaryMask out = combine_label_maps({a, b, c}, w);
    // Pixel 0: 2.0 vs 1.5 -> 1; pixel 1: 2.5 vs 1.0 -> 1;
    // pixel 2: 2.5 vs 1.0 -> 1; pixel 3: 0 vs 3.5 -> 0.
    CHECK(out.v == std::vector<std::uint8_t>{1, 1, 1, 0});

    const Image2D score = weighted_score_map({a, b, c}, w);
    CHECK(score.at(0, 0) == doctest::Approx(2.0));
    CHECK(score.at(0, 1) == doctest::Approx(2.5));
    CHECK(score.at(1, 1) == doctest::Approx(0.0));

    BinaryMask bad(2, 3);
    CHECK_THROWS_AS(combine_label_maps({a, bad}, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(combine_label_maps({a, b}, {1.0}), std::invalid_argument);
}

TEST_CASE("strided segmentation copies the nearest evaluated label") {
    const SubModel m = SubModel::build(Orientation::vertical, 41);
    Image2D img(30, 26);
    Rng rng(11);
    for (auto& p : img.pix) p = static_cast<float>(rng.uniform());

    VoteConfig dense_cfg;
    const BinaryMask dense = segment_single(m, img, dense_cfg);

    VoteConfig strided;
    strided.stride = 3;
    const BinaryMask coarse = segment_single(m, img, strided);
    REQUIRE(coarse.rows == img.rows);
    REQUIRE(coarse.cols == img.cols);

    // Every pixel's value equals the dense value at its nearest grid point
    // (midpoints round toward the lower-index neighbour).
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            auto snap = [](int x, int stride, int extent) {
                int k = (x + stride / 2) / stride;
                if (stride % 2 == 0 && x % stride == stride / 2 && x - stride / 2 >= 0) k = x / stride;
                int g = k * stride;
                if (g >= extent) g -= stride;
                return g;
            };
            const int gr = snap(r, 3, img.rows);
            const int gc = snap(c, 3, img.cols);
            CHECK(coarse.at(r, c) == dense.at(gr, gc));
        }
}

TEST_CASE("roi confines predictions and zeroes the outside") {
    const SubModel m = SubModel::build(Orientation::horizontal, 43);
    Image2D img(28, 32);
    Rng rng(13);
    for (auto& p : img.pix) p = static_cast<float>(rng.uniform());

    VoteConfig cfg;
    cfg.roi = RoiRect{4, 6, 20, 25};
    const BinaryMask out = segment_single(m, img, cfg);
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c)
            if (r < 4 || r >= 20 || c < 6 || c >= 25) CHECK(out.at(r, c) == 0);

    VoteConfig bad;
    bad.roi = RoiRect{0, 0, 40, 10};
    CHECK_THROWS_WITH_AS(segment_single(m, img, bad), doctest::Contains("roi"),
                         std::invalid_argument);
}

TEST_CASE("ensemble segmentation combines member votes with the default weights") {
    std::vector<SubModel> models;
    models.push_back(SubModel::build(Orientation::vertical, 51));
    models.push_back(SubModel::build(Orientation::horizontal, 52));
    Image2D img(26, 24);
    Rng rng(17);
    for (auto& p : img.pix) p = static_cast<float>(rng.uniform());

    VoteConfig cfg;
    const SegmentationResult res = segment_ensemble(models, img, cfg);
    REQUIRE(res.votes.size() == 2);
    REQUIRE(res.mask.rows == img.rows);
    REQUIRE(res.score.rows == img.rows);

    const auto w = default_vote_weights(2);
    const BinaryMask expect = combine_label_maps(res.votes, w);
    CHECK(res.mask.v == expect.v);

    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) {
            double sc = 0.0;
            for (size_t i = 0; i < res.votes.size(); ++i)
                if (res.votes[i].at(r, c)) sc += w[i];
            CHECK(res.score.at(r, c) == doctest::Approx(sc));
        }

    CHECK_THROWS_AS(segment_ensemble({}, img, cfg), std::invalid_argument);
}

TEST_CASE("keep-largest-component prunes secondary blobs from the vote") {
    // Stub-free check via combine + config on a single hand-made model is
    // impractical; instead validate the pruning path through segment_single
    // by checking the output has at most one component.
    const SubModel m = SubModel::build(Orientation::vertical, 53);
    Image2D img(34, 30);
    Rng rng(19);
    for (auto& p : img.pix) p = static_cast<float>(rng.uniform());

    VoteConfig cfg;
    cfg.keep_largest_component = true;
    const BinaryMask out = segment_single(m, img, cfg);

    // Count 4-connected components.
    std::vector<char> seen(out.size(), 0);
    int comps = 0;
    for (int s = 0; s < static_cast<int>(out.size()); ++s) {
        if (!out.v[s] || seen[s]) continue;
        ++comps;
        std::vector<int> stack{s};
        seen[s] = 1;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            const int r = i / out.cols, c = i % out.cols;
            const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (auto& [nr, nc] : nb) {
                if (nr < 0 || nr >= out.rows || nc < 0 || nc >= out.cols) continue;
                const int ni = nr * out.cols + nc;
                if (out.v[ni] && !seen[ni]) {
                    seen[ni] = 1;
                    stack.push_back(ni);
                }
            }
        }
    }
    CHECK(comps <= 1);
}
