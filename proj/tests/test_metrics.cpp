#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "crossbar/metrics.hpp"
#include "crossbar/rng.hpp"

using namespace crossbar;

namespace {

BinaryMask rect_mask(int rows, int cols, int r0, int c0, int r1, int c1) {
    BinaryMask m(rows, cols);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) m.at(r, c) = 1;
    return m;
}

BinaryMask random_mask(Rng& rng, int rows, int cols, double density) {
    BinaryMask m(rows, cols);
    for (auto& x : m.v) x = rng.uniform() < density ? 1 : 0;
    return m;
}

// Reference Hausdorff: boundary sets via the same 4-neighbour definition, then
// a direct all-pairs max-min scan in floating point.
double brute_hausdorff(const BinaryMask& a, const BinaryMask& b) {
    auto boundary = [](const BinaryMask& m) {
        std::vector<std::pair<int, int>> out;
        for (int r = 0; r < m.rows; ++r)
            for (int c = 0; c < m.cols; ++c) {
                if (!m.at(r, c)) continue;
                bool edge = r == 0 || r == m.rows - 1 || c == 0 || c == m.cols - 1;
                if (!edge)
                    edge = !m.at(r - 1, c) || !m.at(r + 1, c) || !m.at(r, c - 1) || !m.at(r, c + 1);
                if (edge) out.emplace_back(r, c);
            }
        return out;
    };
    const auto ba = boundary(a), bb = boundary(b);
    double h = 0.0;
    for (const auto& [pr, pc] : ba) {
        double best = 1e300;
        for (const auto& [qr, qc] : bb) best = std::min(best, std::hypot(pr - qr, pc - qc));
        h = std::max(h, best);
    }
    for (const auto& [qr, qc] : bb) {
        double best = 1e300;
        for (const auto& [pr, pc] : ba) best = std::min(best, std::hypot(pr - qr, pc - qc));
        h = std::max(h, best);
    }
    return h;
}

}  // namespace

TEST_CASE("dice on hand-computed overlaps") {
    const BinaryMask a = rect_mask(10, 10, 2, 2, 6, 6);  // 16 px
    const BinaryMask b = rect_mask(10, 10, 4, 4, 8, 8);  // 16 px, overlap 2x2
    CHECK(dice(a, b) == doctest::Approx(2.0 * 4 / 32.0));
    CHECK(dice(a, a) == doctest::Approx(1.0));

    const BinaryMask empty(10, 10);
    CHECK(dice(empty, empty) == 1.0);
    CHECK(dice(empty, a) == 0.0);
    CHECK(dice(a, empty) == 0.0);
}

TEST_CASE("tpf counts recovered truth pixels and rejects empty truth") {
    const BinaryMask truth = rect_mask(12, 12, 3, 3, 9, 9);  // 36 px
    const BinaryMask half = rect_mask(12, 12, 3, 3, 6, 9);   // covers 18 of them
    CHECK(tpf(half, truth) == doctest::Approx(0.5));
    CHECK(tpf(truth, truth) == doctest::Approx(1.0));

    const BinaryMask empty(12, 12);
    CHECK(tpf(empty, truth) == 0.0);
    CHECK_THROWS_WITH_AS(tpf(truth, empty), doctest::Contains("undefined TPF"),
                         std::invalid_argument);
}

TEST_CASE("metrics reject dimension mismatches") {
    const BinaryMask a(8, 8, 1);
    const BinaryMask b(8, 9, 1);
    CHECK_THROWS_AS(dice(a, b), std::invalid_argument);
    CHECK_THROWS_AS(tpf(a, b), std::invalid_argument);
    CHECK_THROWS_AS(hausdorff(a, b), std::invalid_argument);
    CHECK_THROWS_AS(centroid_distance(a, b), std::invalid_argument);
}

TEST_CASE("boundary extraction treats the image border as background") {
    const BinaryMask full(4, 4, 1);
    const auto b = boundary_pixels(full);
    CHECK(b.size() == 12);  // all but the 2x2 interior
    const BinaryMask inner = rect_mask(5, 5, 1, 1, 4, 4);
    CHECK(boundary_pixels(inner).size() == 8);  // 3x3 square minus its center
}

TEST_CASE("hausdorff on hand-placed rectangles") {
    // Identical masks: zero distance.
    const BinaryMask a = rect_mask(20, 20, 2, 2, 8, 8);
    CHECK(hausdorff(a, a) == 0.0);

    // Two single pixels: plain Euclidean distance.
    BinaryMask p(20, 20), q(20, 20);
    p.at(3, 4) = 1;
    q.at(15, 9) = 1;
    CHECK(hausdorff(p, q) == doctest::Approx(std::hypot(12.0, 5.0)));

    // Identical squares shifted by 3 columns.
    const BinaryMask s1 = rect_mask(20, 20, 5, 2, 10, 7);
    const BinaryMask s2 = rect_mask(20, 20, 5, 5, 10, 10);
    CHECK(hausdorff(s1, s2) == doctest::Approx(3.0));

    const BinaryMask empty(20, 20);
    CHECK_THROWS_WITH_AS(hausdorff(empty, a), doctest::Contains("undefined"),
                         std::invalid_argument);
}

TEST_CASE("hausdorff equals the brute-force oracle on random mask pairs") {
    Rng rng(5150);
    int done = 0;
    while (done < 60) {
        const BinaryMask a = random_mask(rng, 20, 20, rng.uniform(0.1, 0.6));
        const BinaryMask b = random_mask(rng, 20, 20, rng.uniform(0.1, 0.6));
        if (a.foreground_count() == 0 || b.foreground_count() == 0) continue;
        CHECK(hausdorff(a, b) == doctest::Approx(brute_hausdorff(a, b)).epsilon(1e-12));
        ++done;
    }
}

TEST_CASE("centroid distance on hand-placed shapes") {
    const BinaryMask a = rect_mask(30, 30, 0, 0, 10, 10);   // centroid (4.5, 4.5)
    const BinaryMask b = rect_mask(30, 30, 10, 14, 20, 24);  // centroid (14.5, 18.5)
    CHECK(centroid_distance(a, b) == doctest::Approx(std::hypot(10.0, 14.0)));
    CHECK(centroid_distance(a, a) == 0.0);

    const BinaryMask empty(30, 30);
    CHECK_THROWS_AS(centroid_distance(a, empty), std::invalid_argument);
}

TEST_CASE("summaries average per-image records and fill the 0.02 histogram") {
    std::vector<MetricRecord> recs;
    recs.push_back({"a", 0.90, 0.95, 4.0, 1.0});
    recs.push_back({"b", 0.80, 0.85, 2.0, 3.0});
    recs.push_back({"c", 1.00, 1.00, 0.0, 0.0});
    const MetricSummary s = summarize(recs);
    CHECK(s.count == 3);
    CHECK(s.mean_dice == doctest::Approx(0.9));
    CHECK(s.mean_tpf == doctest::Approx((0.95 + 0.85 + 1.0) / 3));
    CHECK(s.mean_hausdorff == doctest::Approx(2.0));
    CHECK(s.mean_centroid_distance == doctest::Approx(4.0 / 3));

    REQUIRE(s.dice_histogram.size() == 50);
    CHECK(s.dice_histogram[45] == 1);  // 0.90 lands in [0.90, 0.92)
    CHECK(s.dice_histogram[40] == 1);  // 0.80
    CHECK(s.dice_histogram[49] == 1);  // 1.0 clamps into the last bin
    long total = 0;
    for (long c : s.dice_histogram) total += c;
    CHECK(total == 3);

    CHECK_THROWS_AS(summarize({}), std::invalid_argument);
}

TEST_CASE("summaries skip undefined boundary metrics") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<MetricRecord> recs;
    recs.push_back({"a", 0.0, 0.0, nan, nan});
    recs.push_back({"b", 0.9, 0.9, 6.0, 2.0});
    const MetricSummary s = summarize(recs);
    CHECK(s.mean_dice == doctest::Approx(0.45));
    CHECK(s.mean_hausdorff == doctest::Approx(6.0));
    CHECK(s.mean_centroid_distance == doctest::Approx(2.0));
}
