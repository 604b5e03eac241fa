#include <catch2/catch.hpp>

#include "ovp/box.hpp"
#include "ovp/rng.hpp"

using ovp::BoxXYXY;
using ovp::iou;
using ovp::ScoredBox;

namespace {

// Independent IoU oracle for integer-coordinate boxes: count unit grid cells
// covered by both boxes and by either box.
double iou_cell_oracle(const BoxXYXY& a, const BoxXYXY& b) {
  int lo_x = static_cast<int>(std::min(a.x1, b.x1));
  int hi_x = static_cast<int>(std::max(a.x2, b.x2));
  int lo_y = static_cast<int>(std::min(a.y1, b.y1));
  int hi_y = static_cast<int>(std::max(a.y2, b.y2));
  long inter = 0, uni = 0;
  for (int x = lo_x; x < hi_x; ++x) {
    for (int y = lo_y; y < hi_y; ++y) {
      bool in_a = x >= a.x1 && x + 1 <= a.x2 && y >= a.y1 && y + 1 <= a.y2;
      bool in_b = x >= b.x1 && x + 1 <= b.x2 && y >= b.y1 && y + 1 <= b.y2;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoxXYXY random_box(ovp::Rng& rng) {
  float x1 = static_cast<float>(rng.uniform(0.0, 100.0));
  float y1 = static_cast<float>(rng.uniform(0.0, 100.0));
  float w = static_cast<float>(rng.uniform(0.0, 50.0));
  float h = static_cast<float>(rng.uniform(0.0, 50.0));
  return BoxXYXY(x1, y1, x1 + w, y1 + h);
}

}  // namespace

TEST_CASE("iou of identical boxes is 1") {
  BoxXYXY a(0, 0, 10, 10);
  CHECK(iou(a, a) == 1.0);
}

TEST_CASE("iou of disjoint boxes is 0") {
  CHECK(iou(BoxXYXY(0, 0, 10, 10), BoxXYXY(20, 20, 30, 30)) == 0.0);
}

TEST_CASE("iou of half-overlapping boxes matches grid-cell oracle") {
  BoxXYXY a(0, 0, 10, 10), b(5, 0, 15, 10);
  CHECK(iou_cell_oracle(a, b) == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(iou(a, b) == Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iou with zero union is 0") {
  BoxXYXY degenerate(5, 5, 5, 5);
  CHECK(iou(degenerate, degenerate) == 0.0);
}

TEST_CASE("iou agrees with grid-cell oracle on random integer boxes") {
  ovp::Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    auto draw = [&] {
      float x1 = static_cast<float>(rng.index(20));
      float y1 = static_cast<float>(rng.index(20));
      float w = static_cast<float>(rng.index(15));
      float h = static_cast<float>(rng.index(15));
      return BoxXYXY(x1, y1, x1 + w, y1 + h);
    };
    BoxXYXY a = draw(), b = draw();
    CHECK(iou(a, b) == Approx(iou_cell_oracle(a, b)).margin(1e-12));
  }
}

TEST_CASE("iou is symmetric and bounded") {
  ovp::Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    BoxXYXY a = random_box(rng), b = random_box(rng);
    double ab = iou(a, b), ba = iou(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (a.area() > 0) CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("box construction rejects invalid inputs") {
  CHECK_THROWS_AS(BoxXYXY(10, 0, 0, 10), ovp::Error);
  CHECK_THROWS_AS(BoxXYXY(0, 0, 10, std::numeric_limits<float>::quiet_NaN()), ovp::Error);
  CHECK_THROWS_AS(BoxXYXY(0, 0, std::numeric_limits<float>::infinity(), 10), ovp::Error);
  CHECK_NOTHROW(BoxXYXY(3, 4, 3, 4));  // degenerate but valid
}

TEST_CASE("nms keeps a singleton") {
  std::vector<ScoredBox> c = {{BoxXYXY(0, 0, 10, 10), 0.9}};
  CHECK(ovp::nms(c, 0.5) == std::vector<size_t>{0});
}

TEST_CASE("nms suppresses an exact duplicate") {
  std::vector<ScoredBox> c = {{BoxXYXY(0, 0, 10, 10), 0.9}, {BoxXYXY(0, 0, 10, 10), 0.8}};
  CHECK(ovp::nms(c, 0.5) == std::vector<size_t>{0});
}

TEST_CASE("nms three-box interaction") {
  std::vector<ScoredBox> c = {{BoxXYXY(0, 0, 10, 10), 0.9},
                              {BoxXYXY(5, 0, 15, 10), 0.8},
                              {BoxXYXY(1, 0, 11, 10), 0.7}};
  // pairwise arithmetic: IoU(A,C) = 90/110 > 0.5 suppresses C, IoU(A,B) = 1/3 keeps B
  CHECK(iou(c[0].box, c[2].box) == Approx(90.0 / 110.0));
  CHECK(iou(c[0].box, c[1].box) == Approx(1.0 / 3.0));
  CHECK(ovp::nms(c, 0.5) == std::vector<size_t>{0, 1});
}

TEST_CASE("nms breaks score ties toward the lower index") {
  std::vector<ScoredBox> c = {{BoxXYXY(0, 0, 10, 10), 0.5}, {BoxXYXY(100, 100, 110, 110), 0.5}};
  CHECK(ovp::nms(c, 0.5) == std::vector<size_t>{0, 1});
  std::vector<ScoredBox> dup = {{BoxXYXY(0, 0, 10, 10), 0.5}, {BoxXYXY(0, 0, 10, 10), 0.5}};
  CHECK(ovp::nms(dup, 0.5) == std::vector<size_t>{0});
}

TEST_CASE("nms empty input gives empty output") { CHECK(ovp::nms({}, 0.5).empty()); }

TEST_CASE("nms is idempotent and kept boxes obey the pairwise bound") {
  ovp::Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredBox> c;
    size_t n = 1 + rng.index(30);
    for (size_t i = 0; i < n; ++i) c.push_back({random_box(rng), rng.uniform()});
    double thr = rng.uniform(0.1, 0.9);

    auto kept = ovp::nms(c, thr);
    for (size_t i = 0; i < kept.size(); ++i)
      for (size_t j = i + 1; j < kept.size(); ++j)
        CHECK(iou(c[kept[i]].box, c[kept[j]].box) <= thr);

    std::vector<ScoredBox> survivors;
    for (size_t k : kept) survivors.push_back(c[k]);
    auto again = ovp::nms(survivors, thr);
    CHECK(again.size() == survivors.size());
  }
}
