#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "oracles.hpp"
#include "pano/targetgen.hpp"

using pano::Centroid;
using pano::encode_label;
using pano::PanopticMap;
using pano::Rng;
using pano::Tensor3;
using pano::WeightLadder;
using Catch::Matchers::WithinAbs;

namespace {

PanopticMap single_instance_map(int h, int w, const std::vector<std::pair<int, int>>& pixels) {
    PanopticMap pan;
    pan.class_things = {0, 0, 1};
    pan.labels = pano::LabelGrid(h, w, encode_label(0, 0));
    for (auto [y, x] : pixels) pan.labels.at(y, x) = encode_label(2, 1);
    return pan;
}

}  // namespace

TEST_CASE("instance_centroids computes mass centers", "[targetgen]") {
    SECTION("two-pixel instance") {
        auto pan = single_instance_map(2, 3, {{0, 0}, {0, 1}});
        auto c = pano::instance_centroids(pan);
        REQUIRE(c.size() == 1);
        CHECK(c[0].encoded_id == encode_label(2, 1));
        CHECK(c[0].row == 0.0);
        CHECK(c[0].col == 0.5);
    }
    SECTION("single pixel") {
        auto pan = single_instance_map(5, 9, {{3, 7}});
        auto c = pano::instance_centroids(pan);
        REQUIRE(c.size() == 1);
        CHECK(c[0].row == 3.0);
        CHECK(c[0].col == 7.0);
    }
    SECTION("L-shape") {
        auto pan = single_instance_map(3, 3, {{0, 0}, {1, 0}, {1, 1}});
        auto c = pano::instance_centroids(pan);
        REQUIRE(c.size() == 1);
        CHECK_THAT(c[0].row, WithinAbs((0.0 + 1.0 + 1.0) / 3.0, 1e-12));
        CHECK_THAT(c[0].col, WithinAbs((0.0 + 0.0 + 1.0) / 3.0, 1e-12));
    }
}

TEST_CASE("instance_centroids covers every instance in ascending id order", "[targetgen]") {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        auto pan = oracle::random_panoptic(rng, 18, 15);
        auto cs = pano::instance_centroids(pan);
        std::set<uint32_t> in_map;
        for (int y = 0; y < pan.height(); ++y)
            for (int x = 0; x < pan.width(); ++x)
                if (pan.is_thing(y, x)) in_map.insert(pan.labels.at(y, x));
        REQUIRE(cs.size() == in_map.size());
        for (size_t i = 0; i < cs.size(); ++i) {
            REQUIRE(in_map.count(cs[i].encoded_id) == 1);
            if (i > 0) REQUIRE(cs[i].encoded_id > cs[i - 1].encoded_id);
        }
    }
}

TEST_CASE("make_center_heatmap basics", "[targetgen]") {
    SECTION("no instances give a zero heatmap") {
        Tensor3 h = pano::make_center_heatmap({}, 6, 6);
        for (float v : h.data) CHECK(v == 0.0f);
    }
    SECTION("pixel-centered centroid peaks at 1") {
        Tensor3 h = pano::make_center_heatmap({{encode_label(2, 1), 2.0, 3.0}}, 6, 6);
        CHECK(h.at(0, 2, 3) == 1.0f);
    }
    SECTION("midpoint between centroids 10 px apart at sigma 5") {
        std::vector<Centroid> cs = {{encode_label(2, 1), 5.0, 2.0},
                                    {encode_label(2, 2), 5.0, 12.0}};
        Tensor3 h = pano::make_center_heatmap(cs, 11, 15, 5.0);
        REQUIRE_THAT(h.at(0, 5, 7), WithinAbs(std::exp(-0.5), 1e-6));
    }
}

TEST_CASE("make_offsets points at the instance centroid", "[targetgen]") {
    SECTION("two-pixel instance") {
        auto pan = single_instance_map(2, 3, {{0, 0}, {0, 1}});
        auto off = pano::make_offsets(pan, pano::instance_centroids(pan));
        CHECK(off.at(0, 0, 0) == 0.0f);
        CHECK(off.at(1, 0, 0) == 0.5f);
        CHECK(off.at(0, 0, 1) == 0.0f);
        CHECK(off.at(1, 0, 1) == -0.5f);
    }
    SECTION("pixel at its own centroid") {
        auto pan = single_instance_map(4, 4, {{2, 2}});
        auto off = pano::make_offsets(pan, pano::instance_centroids(pan));
        CHECK(off.at(0, 2, 2) == 0.0f);
        CHECK(off.at(1, 2, 2) == 0.0f);
    }
    SECTION("stuff pixels carry zero") {
        auto pan = single_instance_map(3, 3, {{1, 1}});
        auto off = pano::make_offsets(pan, pano::instance_centroids(pan));
        CHECK(off.at(0, 0, 0) == 0.0f);
        CHECK(off.at(1, 0, 0) == 0.0f);
    }
    SECTION("missing centroid entry is an error") {
        auto pan = single_instance_map(3, 3, {{1, 1}});
        CHECK_THROWS_AS(pano::make_offsets(pan, {}), std::invalid_argument);
    }
}

TEST_CASE("weight ladder validation and variants", "[targetgen]") {
    WeightLadder def;
    CHECK(def.thresholds == std::vector<double>{2.0, 4.0, 8.0});
    CHECK(def.weights == std::vector<double>{8.0, 4.0, 2.0, 1.0});

    CHECK_THROWS_AS(WeightLadder({2.0, 2.0}, {3.0, 2.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(WeightLadder({2.0}, {1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(WeightLadder({2.0}, {2.0, -1.0}), std::invalid_argument);
    CHECK_THROWS_AS(WeightLadder({2.0}, {1.0}), std::invalid_argument);

    // the geometric family reproduces the default at 4 regions and keeps the
    // 8-to-1 span for other counts
    WeightLadder g4 = WeightLadder::geometric(4);
    CHECK(g4.thresholds == def.thresholds);
    CHECK(g4.weights == def.weights);
    for (int n : {3, 8}) {
        WeightLadder g = WeightLadder::geometric(n);
        REQUIRE(g.weights.size() == static_cast<size_t>(n));
        CHECK(g.weights.front() == 8.0);
        CHECK(g.weights.back() == 1.0);
        g.validate();
    }

    CHECK(def.lookup(1.0) == 8.0);
    CHECK(def.lookup(2.0) == 8.0);  // bands are inclusive on the right
    CHECK(def.lookup(2.5) == 4.0);
    CHECK(def.lookup(8.0) == 2.0);
    CHECK(def.lookup(20.0) == 1.0);
}

TEST_CASE("make_boundary_weights bands by boundary distance", "[targetgen]") {
    // 41x41 instance inside a 45x45 grid: plenty of deep interior
    PanopticMap pan;
    pan.class_things = {0, 0, 1};
    pan.labels = pano::LabelGrid(45, 45, encode_label(0, 0));
    for (int y = 2; y <= 42; ++y)
        for (int x = 2; x <= 42; ++x) pan.labels.at(y, x) = encode_label(2, 1);

    Tensor3 w = pano::make_boundary_weights(pan, WeightLadder());
    CHECK(w.at(0, 0, 0) == 0.0f);    // stuff
    CHECK(w.at(0, 2, 22) == 8.0f);   // d = 1, touching the boundary
    CHECK(w.at(0, 5, 22) == 4.0f);   // d = 4
    CHECK(w.at(0, 8, 22) == 2.0f);   // d = 7
    CHECK(w.at(0, 21, 22) == 1.0f);  // d = 20, beyond the last threshold
}

TEST_CASE("boundary weights match the ladder applied to exact distances", "[targetgen]") {
    Rng rng(111);
    WeightLadder ladder;
    for (int trial = 0; trial < 12; ++trial) {
        auto pan = oracle::random_panoptic(rng, 20, 17);
        Tensor3 w = pano::make_boundary_weights(pan, ladder);

        // group pixels by instance, oracle-EDT each full-grid instance mask
        std::set<uint32_t> ids;
        for (size_t i = 0; i < pan.labels.size(); ++i)
            if (pan.is_thing(i / 17, static_cast<int>(i % 17)))
                ids.insert(pan.labels.data[i]);
        std::vector<double> dist(pan.labels.size(), -1.0);
        for (uint32_t id : ids) {
            pano::BinaryMask m(20, 17, false);
            for (int y = 0; y < 20; ++y)
                for (int x = 0; x < 17; ++x) m.set(y, x, pan.labels.at(y, x) == id);
            auto d = oracle::brute_force_edt(m);
            for (size_t i = 0; i < d.size(); ++i)
                if (m.data[i]) dist[i] = d[i];
        }

        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 17; ++x) {
                const size_t i = static_cast<size_t>(y) * 17 + x;
                if (pan.is_thing(y, x)) {
                    REQUIRE(w.data[i] == static_cast<float>(ladder.lookup(dist[i])));
                } else {
                    REQUIRE(w.data[i] == 0.0f);
                }
            }

        // weight never increases as the boundary distance grows
        std::vector<std::pair<double, float>> by_dist;
        for (size_t i = 0; i < dist.size(); ++i)
            if (dist[i] >= 0.0) by_dist.push_back({dist[i], w.data[i]});
        std::sort(by_dist.begin(), by_dist.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (size_t i = 1; i < by_dist.size(); ++i)
            REQUIRE(by_dist[i].second <= by_dist[i - 1].second);
    }
}

TEST_CASE("make_targets on an all-void map", "[targetgen]") {
    PanopticMap pan;
    pan.class_things = {0};
    pan.labels = pano::LabelGrid(5, 7, pano::kVoidLabel);
    auto t = pano::make_targets(pan);
    for (uint32_t v : t.semantic.data) CHECK(v == 255u);
    for (float v : t.offsets.data) CHECK(v == 0.0f);
    for (float v : t.center_heatmap.data) CHECK(v == 0.0f);
    for (float v : t.offset_weights.data) CHECK(v == 0.0f);
}

TEST_CASE("make_targets composes the individual generators", "[targetgen]") {
    Rng rng(121);
    auto pan = oracle::random_panoptic(rng, 16, 19);
    auto t = pano::make_targets(pan);

    REQUIRE(t.semantic.height == 16);
    REQUIRE(t.semantic.width == 19);
    REQUIRE(t.offsets.channels == 2);
    REQUIRE(t.offsets.height == 16);
    REQUIRE(t.center_heatmap.same_shape(pano::Tensor3(1, 16, 19)));
    REQUIRE(t.offset_weights.same_shape(pano::Tensor3(1, 16, 19)));

    auto cs = pano::instance_centroids(pan);
    CHECK(t.offsets.data == pano::make_offsets(pan, cs).data);
    CHECK(t.center_heatmap.data == pano::make_center_heatmap(cs, 16, 19, 5.0).data);
    CHECK(t.offset_weights.data ==
          pano::make_boundary_weights(pan, WeightLadder()).data);

    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 19; ++x) {
            if (pan.is_void(y, x))
                REQUIRE(t.semantic.at(y, x) == 255u);
            else
                REQUIRE(t.semantic.at(y, x) == pano::class_of(pan.labels.at(y, x)));
        }
}

TEST_CASE("target set invariants on random maps", "[targetgen]") {
    Rng rng(131);
    WeightLadder ladder;
    for (int trial = 0; trial < 15; ++trial) {
        const int h = static_cast<int>(rng.uniform_int(6, 20));
        const int w = static_cast<int>(rng.uniform_int(6, 20));
        auto pan = oracle::random_panoptic(rng, h, w);
        auto t = pano::make_targets(pan);

        // instance bounding boxes for the landing check
        struct Box {
            double y0 = 1e9, x0 = 1e9, y1 = -1e9, x1 = -1e9;
        };
        std::map<uint32_t, Box> boxes;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (pan.is_thing(y, x)) {
                    Box& b = boxes[pan.labels.at(y, x)];
                    b.y0 = std::min(b.y0, static_cast<double>(y));
                    b.x0 = std::min(b.x0, static_cast<double>(x));
                    b.y1 = std::max(b.y1, static_cast<double>(y));
                    b.x1 = std::max(b.x1, static_cast<double>(x));
                }

        std::set<double> allowed(ladder.weights.begin(), ladder.weights.end());
        allowed.insert(0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const float wv = t.offset_weights.at(0, y, x);
                REQUIRE(allowed.count(wv) == 1);
                REQUIRE(t.center_heatmap.at(0, y, x) >= 0.0f);
                REQUIRE(t.center_heatmap.at(0, y, x) <= 1.0f);
                if (!pan.is_thing(y, x)) {
                    REQUIRE(wv == 0.0f);
                    REQUIRE(t.offsets.at(0, y, x) == 0.0f);
                    REQUIRE(t.offsets.at(1, y, x) == 0.0f);
                } else {
                    const Box& b = boxes[pan.labels.at(y, x)];
                    const double ly = y + t.offsets.at(0, y, x);
                    const double lx = x + t.offsets.at(1, y, x);
                    REQUIRE(ly >= b.y0 - 1e-4);
                    REQUIRE(ly <= b.y1 + 1e-4);
                    REQUIRE(lx >= b.x0 - 1e-4);
                    REQUIRE(lx <= b.x1 + 1e-4);
                }
            }
    }
}
