#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "taskforge/error.hpp"
#include "taskforge/fixture.hpp"
#include "taskforge/metrics.hpp"

using namespace taskforge;

namespace {

// Brute-force per-pixel oracles.
double oracle_iou(const SegMap& p, const SegMap& g, bool want_f1) {
  std::set<ClassId> classes;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x)
      if (g.at(x, y) != kBackground) classes.insert(g.at(x, y));
  if (classes.empty()) {
    for (int y = 0; y < p.height(); ++y)
      for (int x = 0; x < p.width(); ++x)
        if (p.at(x, y) != kBackground) return 0.0;
    return 1.0;
  }
  double sum = 0;
  for (ClassId c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (int y = 0; y < g.height(); ++y)
      for (int x = 0; x < g.width(); ++x) {
        bool a = p.at(x, y) == c, b = g.at(x, y) == c;
        tp += a && b;
        fp += a && !b;
        fn += !a && b;
      }
    sum += want_f1 ? 2 * tp / (2 * tp + fp + fn) : tp / (tp + fp + fn);
  }
  return sum / classes.size();
}

double oracle_mse(const Image& a, const Image& b) {
  double s = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        double d = (a.channel(x, y, c) - b.channel(x, y, c)) / 255.0;
        s += d * d;
      }
  return s / (a.width() * a.height() * 3.0);
}

double oracle_mae(const Image& a, const Image& b) {
  double s = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x)
      for (int c = 0; c < 3; ++c) s += std::abs(a.channel(x, y, c) - b.channel(x, y, c)) / 255.0;
  return s / (a.width() * a.height() * 3.0);
}

Image render_segmentation(const SegMap& m, const Palette& p) {
  Image out(m.width(), m.height(), p.background());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y) != kBackground) out.set(x, y, p.color(m.at(x, y)));
  return out;
}

Image noisy(const Image& img, double sigma, RngState rng) {
  Image out = img;
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(std::clamp(v + rng.normal(0, sigma), 0.0, 255.0));
  return out;
}

}  // namespace

TEST_SUITE("segmentation metrics") {
  TEST_CASE("worked 2x2 example") {
    SegMap gt(2, 2, std::vector<ClassId>{1, 1, 0, 0});
    SegMap pred(2, 2, std::vector<ClassId>{1, 0, 0, 0});
    CHECK(iou(pred, gt) == doctest::Approx(0.5));
    CHECK(f1(pred, gt) == doctest::Approx(2.0 / 3.0));
  }

  TEST_CASE("random rasters match the brute-force oracle") {
    RngState r(1);
    for (int trial = 0; trial < 500; ++trial) {
      int w = static_cast<int>(r.uniform_int(1, 8)), h = static_cast<int>(r.uniform_int(1, 8));
      int classes = static_cast<int>(r.uniform_int(1, 4));
      SegMap gt = testing::random_segmap(w, h, classes, r);
      SegMap pred = testing::random_segmap(w, h, classes, r);
      CHECK(iou(pred, gt) == doctest::Approx(oracle_iou(pred, gt, false)).epsilon(1e-12));
      CHECK(f1(pred, gt) == doctest::Approx(oracle_iou(pred, gt, true)).epsilon(1e-12));
      CHECK(iou(gt, gt) == 1.0);
      CHECK(f1(gt, gt) == 1.0);
      double v = iou(pred, gt);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }

  TEST_CASE("empty ground truth") {
    SegMap empty(3, 3);
    CHECK(iou(empty, empty) == 1.0);
    SegMap one(3, 3);
    one = SegMap(3, 3, std::vector<ClassId>{0, 0, 0, 0, 2, 0, 0, 0, 0});
    CHECK(iou(one, empty) == 0.0);
    CHECK(f1(one, empty) == 0.0);
  }

  TEST_CASE("size mismatch is a metric error") {
    CHECK_THROWS_AS(iou(SegMap(2, 2), SegMap(2, 3)), MetricError);
    CHECK_THROWS_AS(mae(Image(2, 2), Image(3, 2)), MetricError);
  }

  TEST_CASE("operand types must fit the metric") {
    CHECK_THROWS_AS(compute_metric(Image(2, 2), Image(2, 2), MetricKind::IoU), MetricError);
    CHECK_THROWS_AS(compute_metric(SegMap(2, 2), SegMap(2, 2), MetricKind::MAE), MetricError);
    CHECK(compute_metric(SegMap(2, 2), SegMap(2, 2), MetricKind::F1) == 1.0);
  }
}

TEST_SUITE("snap") {
  TEST_CASE("exact palette colours map back to their class") {
    RngState r(2);
    Palette p = sample_palette({1, 2, 3, 4}, r);
    SegMap m = testing::random_segmap(9, 7, 4, r);
    Image img = render_segmentation(m, p);
    CHECK(snap_to_palette(img, p) == m);
  }

  TEST_CASE("ties: lowest id wins and the background loses") {
    Palette p({{1, Rgb{10, 0, 0}}, {2, Rgb{30, 0, 0}}}, Rgb{50, 0, 0}, 0.0);
    Image img(3, 1);
    img.set(0, 0, Rgb{20, 0, 0});  // 1 vs 2
    img.set(1, 0, Rgb{40, 0, 0});  // 2 vs background
    img.set(2, 0, Rgb{50, 0, 0});
    SegMap s = snap_to_palette(img, p);
    CHECK(s.at(0, 0) == 1);
    CHECK(s.at(1, 0) == 2);
    CHECK(s.at(2, 0) == kBackground);
  }

  TEST_CASE("snapping is idempotent") {
    RngState r(3);
    Palette p = sample_palette({1, 2, 3}, r);
    for (int i = 0; i < 10; ++i) {
      Image img = testing::random_image(8, 8, r);
      SegMap once = snap_to_palette(img, p);
      CHECK(snap_to_palette(render_segmentation(once, p), p) == once);
    }
  }

  TEST_CASE("nearest colour by brute force") {
    RngState r(4);
    Palette p = sample_palette({1, 2, 3, 4, 5}, r);
    Image img = testing::random_image(16, 16, r);
    SegMap s = snap_to_palette(img, p);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        auto d = [&](Rgb c) { return squared_distance(c, img.at(x, y)); };
        ClassId best = kBackground;
        auto best_d = d(p.background());
        for (const auto& [id, c] : p.colors())
          if (d(c) < best_d || (d(c) == best_d && best == kBackground)) best = id, best_d = d(c);
        CHECK(s.at(x, y) == best);
      }
  }
}

TEST_SUITE("image metrics") {
  TEST_CASE("match the oracles") {
    RngState r(5);
    for (int trial = 0; trial < 100; ++trial) {
      int w = static_cast<int>(r.uniform_int(1, 8)), h = static_cast<int>(r.uniform_int(1, 8));
      Image a = testing::random_image(w, h, r), b = testing::random_image(w, h, r);
      CHECK(mae(a, b) == doctest::Approx(oracle_mae(a, b)).epsilon(1e-12));
      CHECK(mse(a, b) == doctest::Approx(oracle_mse(a, b)).epsilon(1e-12));
      CHECK(rmse(a, b) == doctest::Approx(std::sqrt(oracle_mse(a, b))).epsilon(1e-12));
      CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(1.0 / oracle_mse(a, b))).epsilon(1e-9));
      CHECK(mae(a, b) == mae(b, a));
      CHECK(psnr(a, b) == psnr(b, a));
    }
  }

  TEST_CASE("identity gives the perfect values") {
    RngState r(6);
    Image a = testing::random_image(5, 5, r);
    CHECK(mae(a, a) == 0.0);
    CHECK(rmse(a, a) == 0.0);
    CHECK(psnr(a, a) == kPsnrSentinel);
  }

  TEST_CASE("psnr falls as noise grows") {
    RngState r(7);
    Image a = testing::random_image(32, 32, r);
    double last = kPsnrSentinel;
    for (double sigma : {2.0, 8.0, 20.0, 50.0}) {
      double v = psnr(noisy(a, sigma, r.derive(int(sigma))), a);
      CHECK(v < last);
      last = v;
    }
  }

  TEST_CASE("black against white") {
    CHECK(mae(Image(2, 2), Image(2, 2, Rgb{255, 255, 255})) == 1.0);
    CHECK(psnr(Image(2, 2), Image(2, 2, Rgb{255, 255, 255})) == doctest::Approx(0.0));
  }

  TEST_CASE("direction") {
    CHECK(higher_is_better(MetricKind::IoU));
    CHECK(higher_is_better(MetricKind::PSNR));
    CHECK_FALSE(higher_is_better(MetricKind::MAE));
    CHECK_FALSE(higher_is_better(MetricKind::MSE));
  }
}

TEST_SUITE("output sequences") {
  std::vector<RecordPtr> records() { return make_fixture_dataset(16, 3, 32, RngState(8)).records; }

  TEST_CASE("identical chains score perfectly") {
    auto recs = records();
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      CqoBundle b = sample_cqo(recs, RngState(seed));
      auto report = evaluate_output_sequence(b.held_out, b.held_out, b.structure, b.palette);
      CHECK(report.positions.size() >= b.output().size());
      for (const auto& s : report.positions) {
        if (s.metric == MetricKind::IoU || s.metric == MetricKind::F1) CHECK(s.value == 1.0);
        else if (s.metric == MetricKind::PSNR) CHECK(s.value == kPsnrSentinel);
        else CHECK(s.value == 0.0);
      }
    }
  }

  TEST_CASE("one discriminative position blanked to background") {
    auto recs = records();
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 60 && hits < 10; ++seed) {
      CqoBundle b = sample_cqo(recs, RngState(seed));
      if (b.structure.discriminative.empty()) continue;
      ++hits;
      ImageChain pred = b.held_out;
      std::size_t last = pred.images.size() - 1;
      const Image& g = pred.images[last];
      bool has_fg = snap_to_palette(g, b.palette).present() != std::set<ClassId>{kBackground};
      pred.images[last] = Image(g.width(), g.height(), b.palette.background());
      auto report = evaluate_output_sequence(pred, b.held_out, b.structure, b.palette);
      for (const auto& s : report.positions) {
        if (s.position == last) CHECK(s.value == (has_fg ? 0.0 : 1.0));
        else if (s.metric == MetricKind::IoU || s.metric == MetricKind::F1) CHECK(s.value == 1.0);
      }
    }
    CHECK(hits == 10);
  }

  TEST_CASE("length and size mismatches") {
    auto recs = records();
    CqoBundle b = sample_cqo(recs, RngState(1));
    ImageChain shorter = b.held_out;
    shorter.images.pop_back();
    CHECK_THROWS_AS(evaluate_output_sequence(shorter, b.held_out, b.structure, b.palette), EvaluationError);
    ImageChain resized = b.held_out;
    resized.images.back() = Image(3, 3);
    CHECK_THROWS_AS(evaluate_output_sequence(resized, b.held_out, b.structure, b.palette), EvaluationError);
  }

  TEST_CASE("aggregates average per family and metric") {
    TaskReport r;
    r.positions = {{1, "a", "seg", MetricKind::IoU, 0.5}, {2, "b", "seg", MetricKind::IoU, 1.0},
                   {3, "c", "deblur", MetricKind::MAE, 0.25}};
    auto agg = r.aggregates();
    REQUIRE(agg.size() == 2);
    CHECK(agg[0].family == "deblur");
    CHECK(agg[1].mean == doctest::Approx(0.75));
    CHECK(agg[1].count == 2);
    CHECK(r.mean(MetricKind::IoU) == doctest::Approx(0.75));
    CHECK(std::isnan(r.mean(MetricKind::F1)));
    CHECK(r.count(MetricKind::MAE) == 1);
  }
}
