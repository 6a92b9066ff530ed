// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "support.hpp"
#include "taskforge/balance.hpp"
#include "taskforge/cli.hpp"
#include "taskforge/codebook.hpp"
#include "taskforge/dataset.hpp"
#include "taskforge/error.hpp"
#include "taskforge/fixture.hpp"
#include "taskforge/harness.hpp"
#include "taskforge/masking.hpp"
#include "taskforge/metrics.hpp"
#include "taskforge/png_io.hpp"

using namespace taskforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool is_discrete(MetricKind k) { return k == MetricKind::IoU || k == MetricKind::F1; }

// ---------------------------------------------------------------------------
// 1. Identity-codebook pin.

Outcome identity_pin() {
  auto t0 = std::chrono::steady_clock::now();
  testing::TempDir dir("acc_identity");
  const int side = 192;

  // fixture
  auto manifest = write_dataset(make_fixture_dataset(40, 3, side, RngState(1)), dir / "fixture");
  Dataset ds = load_dataset(manifest, side);

  // enrich: every variant of one record renders and survives PNG
  RngState vr(2);
  auto variants = enumerate_task_variants(side, vr);
  Palette fixed = fixed_palette(3);
  fs::create_directories(dir / "enrich");
  for (std::size_t i = 0; i < variants.size(); ++i) {
    RngState r = RngState(3).derive(i);
    Image img = render_variant(variants[i], ds.records[0]->image, ds.records[0]->mask, fixed, r);
    auto path = dir / "enrich" / (std::to_string(i) + ".png");
    write_png_rgb(path, img);
    if (read_png_rgb(path) != img) return {false, "enrich rendering did not survive PNG"};
  }

  // sample -> disk -> tokenize -> decode -> evaluate
  const std::size_t n_bundles = 100;
  auto bundles = sample_bundles(ds.records, RngState(4), n_bundles);
  TaskReport all;
  for (std::size_t b = 0; b < n_bundles; ++b) {
    auto bdir = dir / "bundles" / std::to_string(b);
    write_bundle(bundles[b], bdir);
    CqoBundle bundle = read_bundle(bdir);
    // One identity table per bundle keeps memory flat.
    auto cb = make_identity_codebook(side, {12, 12});
    TokenSequence seq = assemble_tokens(bundle, *cb);
    std::size_t query = seq.images.size() - bundle.chain_length();
    ImageChain pred;
    pred.images.push_back(bundle.query());
    for (std::size_t p = 1; p < bundle.chain_length(); ++p) {
      pred.images.push_back(decode_image(seq, query + p, *cb, side, side));
    }
    auto report = evaluate_output_sequence(pred, bundle.held_out, bundle.structure, bundle.palette);
    all.positions.insert(all.positions.end(), report.positions.begin(), report.positions.end());
  }
  double max_mae = 0, min_iou = 1, min_f1 = 1;
  for (const auto& s : all.positions) {
    if (s.metric == MetricKind::MAE) max_mae = std::max(max_mae, s.value);
    if (s.metric == MetricKind::IoU) min_iou = std::min(min_iou, s.value);
    if (s.metric == MetricKind::F1) min_f1 = std::min(min_f1, s.value);
  }
  double secs = seconds_since(t0);
  bool pass = all.count(MetricKind::IoU) > 0 && all.count(MetricKind::F1) > 0 && all.count(MetricKind::MAE) > 0 &&
              min_iou == 1.0 && min_f1 == 1.0 && max_mae == 0.0 && secs < 120.0;
  return {pass, fmt("100 bundles: min IoU %.6f, min F1 %.6f, max MAE %.6f, %.1fs", min_iou, min_f1, max_mae, secs) +
                    " (" + std::to_string(all.count(MetricKind::IoU)) + " IoU, " +
                    std::to_string(all.count(MetricKind::F1)) + " F1, " + std::to_string(all.count(MetricKind::MAE)) +
                    " MAE positions)"};
}

// ---------------------------------------------------------------------------
// 2-3. Length laws and guardrails over 1,000 bundles.

std::vector<CqoBundle> thousand_bundles() {
  static std::vector<CqoBundle> cache;
  if (cache.empty()) {
    Dataset ds = make_fixture_dataset(60, 3, 48, RngState(20));
    cache = sample_bundles(ds.records, RngState(21), 1000);
  }
  return cache;
}

Outcome length_laws() {
  auto bundles = thousand_bundles();
  std::size_t violations = 0, max_images = 0, max_t = 0;
  for (const auto& b : bundles) {
    max_images = std::max(max_images, b.image_count());
    for (const auto& c : b.context) max_t = std::max(max_t, c.images.size());
    max_t = std::max(max_t, b.chain_length());
    auto cb = make_identity_codebook(48, {12, 12});
    for (std::size_t k : {1, 2, 4}) {
      TokenSequence seq = assemble_tokens(b, *cb, k);
      std::size_t I = b.image_count(), n = b.context.size();
      std::size_t content = 0;
      for (TokenId id : seq.ids) content += id < seq.vocab_size;
      if (content != I * 144 || seq.ids.size() != I * (144 + k) + n * k) ++violations;
    }
  }
  // A full 30-image sequence: 29 context images in 3 chains plus the query.
  std::vector<std::vector<TokenId>> toks(30, std::vector<TokenId>(144, 0));
  std::vector<ImageInfo> infos;
  for (int i = 0; i < 29; ++i) infos.push_back({ImageRole::Context, std::uint32_t(i / 10), false});
  infos.push_back({ImageRole::Query, 0, false});
  TokenSequence full = assemble_sequence(toks, infos, 512, 144, 1);
  std::size_t full_content = 0;
  for (TokenId id : full.ids) full_content += id < 512;
  bool pass = violations == 0 && max_images <= 30 && max_t <= 15 && full_content == 4320;
  return {pass, "1000 bundles x k in {1,2,4}: " + std::to_string(violations) + " violations, max images " +
                    std::to_string(max_images) + ", max t " + std::to_string(max_t) + "; 30-image bundle has " +
                    std::to_string(full_content) + " content tokens"};
}

Outcome guardrails() {
  auto bundles = thousand_bundles();
  std::size_t passed = 0;
  std::string first_failure;
  for (const auto& b : bundles) {
    auto report = check_guardrails(b);
    if (report.all_passed()) {
      ++passed;
    } else if (first_failure.empty()) {
      for (const auto& c : report.checks)
        if (!c.passed) first_failure = c.rule + ": " + c.detail;
    }
  }
  return {passed == bundles.size(),
          std::to_string(passed) + "/" + std::to_string(bundles.size()) + " bundles pass every guardrail" +
              (first_failure.empty() ? "" : " (first failure " + first_failure + ")")};
}

// ---------------------------------------------------------------------------
// 4. Worked chain [inpaint, denoise, image, rot90, seg] against a hand
// composition written with plain loops.

Outcome composition_oracle() {
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngState pick(seed);
    auto recs = make_fixture_dataset(2, 3, 48, RngState(400 + seed)).records;
    const RecordPtr& rec = recs[0];
    Rect rect{int(pick.uniform_int(0, 20)), int(pick.uniform_int(0, 20)), int(pick.uniform_int(1, 20)),
              int(pick.uniform_int(1, 20))};
    double sigma = pick.uniform(1.0, 30.0);
    TaskStructure s;
    s.generative = {Inpaint{{rect}}, Noise{0.0, sigma}};
    s.transforms = {TransformKind::Rot90};
    s.discriminative = {{DiscriminativeTask::Segmentation, 1}};
    Palette p = fixed_palette(3);
    RngState rng(1000 + seed);
    ImageChain chain = realize_chain(rec, s, p, rec->mask.present(), rng);

    const Image& x = rec->image;
    const int n = x.width();
    // Noise draws one normal per byte in raster order from stream 1.
    Image noised = x;
    RngState nr = rng.derive(1);
    for (auto& v : noised.pixels()) {
      double z = v + sigma * nr.normal();
      v = static_cast<std::uint8_t>(std::clamp<long>(std::lround(z), 0, 255));
    }
    Image inpainted = noised;
    for (int yy = rect.y; yy < rect.y + rect.height; ++yy)
      for (int xx = rect.x; xx < rect.x + rect.width; ++xx) inpainted.set(xx, yy, Rgb{0, 0, 0});
    // Clockwise quarter turn: output (c, r) takes input (r, n-1-c).
    Image rotated(n, n);
    SegMap mask = rec->mask;
    std::vector<ClassId> rotated_ids(n * n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        rotated.set(c, r, x.at(r, n - 1 - c));
        rotated_ids[r * n + c] = mask.at(r, n - 1 - c);
      }
    Image seg(n, n, p.background());
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (rotated_ids[r * n + c] != kBackground) seg.set(c, r, p.color(rotated_ids[r * n + c]));

    std::vector<Image> expect{inpainted, noised, x, rotated, seg};
    if (chain.images != expect) ++mismatches;
  }
  return {mismatches == 0, std::to_string(50 - mismatches) + "/50 seeds match the hand composition pixel-exactly"};
}

// ---------------------------------------------------------------------------
// 5. Masking statistics.

TokenSequence random_sequence(RngState& r, std::size_t q, std::size_t N) {
  std::vector<ImageInfo> infos;
  int n = int(r.uniform_int(1, 3));
  for (int e = 0; e < n; ++e) {
    int len = int(r.uniform_int(2, 6));
    for (int j = 0; j < len; ++j) infos.push_back({ImageRole::Context, std::uint32_t(e), false});
  }
  infos.push_back({ImageRole::Query, 0, false});
  int outputs = int(r.uniform_int(1, 5));
  for (int j = 0; j < outputs; ++j) infos.push_back({ImageRole::Output, 0, false});
  std::vector<std::vector<TokenId>> toks(infos.size(), std::vector<TokenId>(q));
  for (auto& t : toks)
    for (auto& id : t) id = TokenId(r.uniform_index(N));
  return assemble_sequence(toks, infos, N, q, r.uniform_int(1, 2));
}

Outcome masking_statistics() {
  // 30 images, 4320 content positions.
  std::vector<ImageInfo> infos;
  for (int i = 0; i < 29; ++i) infos.push_back({ImageRole::Context, std::uint32_t(i / 10), false});
  infos.push_back({ImageRole::Query, 0, false});
  RngState tr(50);
  std::vector<std::vector<TokenId>> toks(30, std::vector<TokenId>(144));
  for (auto& t : toks)
    for (auto& id : t) id = TokenId(tr.uniform_index(512));
  TokenSequence full = assemble_sequence(toks, infos, 512, 144, 1);
  double total = 0;
  for (std::uint64_t s = 0; s < 100; ++s) total += apply_masking(full, MaskingStrategy::token(0.15), RngState(s)).positions.size();
  double mean = total / 100;
  bool token_ok = std::abs(mean - 648) <= 3 * 23.4;

  std::size_t seq_violations = 0, roundtrip_failures = 0;
  RngState r(51);
  for (int trial = 0; trial < 1000; ++trial) {
    TokenSequence seq = random_sequence(r, 16, 64);
    auto m = apply_masking(seq, MaskingStrategy::sequence_token(), r.derive(trial));
    std::size_t outputs = 0;
    for (const auto& im : seq.images) outputs += im.role == ImageRole::Output;
    if (m.positions.size() != outputs * seq.q) ++seq_violations;
    for (std::size_t p : m.positions) {
      if (seq.tags[p].kind != PositionKind::Content || seq.images[seq.tags[p].owner].role != ImageRole::Output) {
        ++seq_violations;
      }
    }
    for (auto strategy : {MaskingStrategy::token(0.15), MaskingStrategy::sequence_token(),
                          MaskingStrategy::mixed(0.15, 1)}) {
      auto pair = split_targets(apply_masking(seq, strategy, r.derive(trial + 5000)));
      if (patch_targets(pair) != seq.ids) ++roundtrip_failures;
    }
  }
  return {token_ok && seq_violations == 0 && roundtrip_failures == 0,
          fmt("token mean masked %.2f (target 648 +- %.1f); ", mean, 3 * 23.4) + "sequence-token violations " +
              std::to_string(seq_violations) + "/1000 trials; patch-back failures " +
              std::to_string(roundtrip_failures)};
}

// ---------------------------------------------------------------------------
// 6. Metric oracles.

bool close_rel(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

Outcome metric_oracles() {
  RngState r(60);
  std::size_t failures = 0, sentinel_cases = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    int w = int(r.uniform_int(1, 8)), h = int(r.uniform_int(1, 8));
    int classes = int(r.uniform_int(1, 4));
    SegMap gt = testing::random_segmap(w, h, classes, r);
    SegMap pred = trial % 7 == 0 ? gt : testing::random_segmap(w, h, classes, r);
    Image a = testing::random_image(w, h, r);
    Image b = trial % 10 == 0 ? a : testing::random_image(w, h, r);

    // Per-pixel reference.
    std::set<ClassId> present;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (gt.at(x, y) != kBackground) present.insert(gt.at(x, y));
    double ref_iou = 0, ref_f1 = 0;
    if (present.empty()) {
      bool any = false;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) any |= pred.at(x, y) != kBackground;
      ref_iou = ref_f1 = any ? 0.0 : 1.0;
    } else {
      for (ClassId c : present) {
        long tp = 0, fp = 0, fn = 0;
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            bool pp = pred.at(x, y) == c, gg = gt.at(x, y) == c;
            tp += pp && gg;
            fp += pp && !gg;
            fn += !pp && gg;
          }
        ref_iou += double(tp) / double(tp + fp + fn);
        ref_f1 += 2.0 * tp / double(2 * tp + fp + fn);
      }
      ref_iou /= present.size();
      ref_f1 /= present.size();
    }
    long double abs_sum = 0, sq_sum = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          long d = long(a.channel(x, y, c)) - long(b.channel(x, y, c));
          abs_sum += std::abs(d);
          sq_sum += d * d;
        }
    double count = 3.0 * w * h;
    double ref_mae = double(abs_sum / 255.0L / count);
    double ref_mse = double(sq_sum / (255.0L * 255.0L) / count);
    double ref_rmse = std::sqrt(ref_mse);
    double ref_psnr = ref_mse == 0 ? kPsnrSentinel : 10 * std::log10(1.0 / ref_mse);
    if (ref_mse == 0) {
      ++sentinel_cases;
      if (psnr(b, a) != kPsnrSentinel) ++failures;
    }
    if (!close_rel(iou(pred, gt), ref_iou) || !close_rel(f1(pred, gt), ref_f1) || !close_rel(mae(b, a), ref_mae) ||
        !close_rel(rmse(b, a), ref_rmse) || !close_rel(psnr(b, a), ref_psnr)) {
      ++failures;
    }
  }
  return {failures == 0, "5000 rasters: " + std::to_string(failures) + " mismatches beyond 1e-9 relative (" +
                             std::to_string(sentinel_cases) + " exact PSNR sentinel cases)"};
}

// ---------------------------------------------------------------------------
// 7. Transform algebra.

Outcome transform_algebra() {
  RngState r(70);
  std::size_t failures = 0;
  Palette p = fixed_palette(4);
  DiscriminativeKind seg{DiscriminativeTask::Segmentation, 1};
  for (int trial = 0; trial < 100; ++trial) {
    int n = int(r.uniform_int(1, 16));
    Image img = testing::random_image(n, n, r);
    SegMap mask = testing::random_segmap(n, n, 4, r);
    for (int k = 0; k < 5; ++k) {
      auto kind = static_cast<TransformKind>(k);
      if (apply_transform(apply_transform(img, kind), inverse(kind)) != img) ++failures;
      if (apply_transform(apply_transform(mask, kind), inverse(kind)) != mask) ++failures;
      if (apply_transform(render_discriminative(mask, seg, p), kind) !=
          render_discriminative(apply_transform(mask, kind), seg, p)) {
        ++failures;
      }
    }
  }
  return {failures == 0, "100 rasters x 5 kinds: " + std::to_string(failures) +
                             " failures of inverse identities or segmentation commutation"};
}

// ---------------------------------------------------------------------------
// 8. Balanced stream.

Outcome balanced_stream() {
  FixtureOptions big_opt, small_opt;
  big_opt.dataset_id = "big";
  small_opt.dataset_id = "small";
  Dataset big = make_fixture_dataset(90, 3, 16, RngState(80), big_opt);
  Dataset small = make_fixture_dataset(10, 3, 16, RngState(81), small_opt);

  RngState vr(82);
  std::vector<TaskVariant> tasks;
  std::set<std::string> wanted{"segmentation", "edges", "noise"};
  for (const auto& v : enumerate_task_variants(16, vr)) {
    if (wanted.erase(v.bucket())) tasks.push_back(v);
  }
  BalancedStream s({big}, tasks, {}, RngState(83));
  std::map<std::string, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[s.variants()[s.draw().variant].bucket()];
  double sigma4 = std::sqrt(draws * 0.25 * 0.75);
  bool buckets_ok = counts.size() == 4;
  std::string detail = "bucket counts";
  for (const auto& [b, c] : counts) {
    buckets_ok &= std::abs(c - 2500) <= 3 * sigma4;
    detail += " " + b + "=" + std::to_string(c);
  }

  BalancedStream d({big, small}, {}, {}, RngState(84));
  int from_big = 0;
  for (int i = 0; i < draws; ++i) from_big += d.draw().dataset == 0;
  double sigma2 = std::sqrt(draws * 0.25);
  bool datasets_ok = std::abs(from_big - 5000) <= 3 * sigma2;
  detail += fmt(" (3 sigma %.1f); datasets 90/10 drawn %.0f/%.0f (3 sigma %.1f)", 3 * sigma4, from_big,
                draws - from_big, 3 * sigma2);
  return {buckets_ok && datasets_ok, detail};
}

// ---------------------------------------------------------------------------
// 9. Colour-protocol ranking shift.

Outcome recolor_direction() {
  const int side = 48;
  Dataset ds = make_fixture_dataset(40, 6, side, RngState(90));
  RngState vr(91);
  auto variants = enumerate_task_variants(side, vr);
  std::vector<TaskVariant> seg;
  for (const auto& v : variants)
    if (v.bucket() == "segmentation") seg.push_back(v);

  double fixed_score[2], random_score[2];
  for (int aug = 0; aug < 2; ++aug) {
    BalanceConfig bc;
    bc.recolor = aug == 1;
    BalancedStream stream({ds}, variants, bc, RngState(92));
    TrainConfig tc;
    tc.vocab_size = 512;
    tc.patch_side = 4;
    tc.grid = {12, 12};
    tc.max_images = 1000;
    tc.iterations = 10;
    tc.seed = 93;
    auto cb = train_codebook(stream, tc).codebook;
    UpperBoundConfig uc;
    uc.samples_per_task = 100;
    auto report = codebook_upper_bound(*cb, ds, seg, RngState(94), uc);
    fixed_score[aug] = report.find(seg[0].label(), ColorProtocol::Fixed, MetricKind::IoU)->value;
    random_score[aug] = report.find(seg[0].label(), ColorProtocol::Random, MetricKind::IoU)->value;
  }
  double gap = fixed_score[0] - random_score[0];
  double closed = random_score[1] - random_score[0];
  bool pass = gap > 0 && closed >= 0.5 * gap;
  return {pass, fmt("segmentation IoU unaugmented fixed %.4f random %.4f; augmented random %.4f; ", fixed_score[0],
                    random_score[0], random_score[1]) +
                    fmt("closes %.1f%% of the gap", gap > 0 ? 100 * closed / gap : 0.0)};
}

// ---------------------------------------------------------------------------
// 10. Copy baseline sanity.

Outcome copy_baseline() {
  Dataset ds = make_fixture_dataset(60, 3, 48, RngState(100));
  SamplerConfig cfg;
  cfg.limits.min_discriminative = 1;
  auto bundles = sample_bundles(ds.records, RngState(101), 200, cfg);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto& b = bundles[i];
    auto disc_mean = [&](const ImageChain& pred) {
      auto report = evaluate_output_sequence(pred, b.held_out, b.structure, b.palette);
      double sum = 0;
      int n = 0;
      for (const auto& s : report.positions)
        if (is_discrete(s.metric)) sum += s.value, ++n;
      return n ? sum / n : std::nan("");
    };
    ImageChain blank = b.held_out;
    auto layout = chain_layout(b.structure, b.held_out.keep);
    for (std::size_t p = 0; p < layout.size(); ++p) {
      if (layout[p].role == ChainElement::Role::Discriminative) {
        blank.images[p] = Image(blank.images[p].width(), blank.images[p].height(), b.palette.background());
      }
    }
    double copy = disc_mean(copy_baseline_predict(b, RngState(102).derive(i)));
    double background = disc_mean(blank);
    double truth = disc_mean(b.held_out);
    ok += copy > background && copy < truth;
  }
  return {ok >= 190, std::to_string(ok) + "/200 bundles have background < copy baseline < ground truth"};
}

// ---------------------------------------------------------------------------
// 11. CLI determinism.

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

Outcome cli_determinism() {
  testing::TempDir dir("acc_cli");
  const fs::path root = dir.path();
  std::string fx = (root / "fx").string(), b = (root / "bundles").string(), cb = (root / "cb" / "codebook.tfcb").string();
  std::vector<std::vector<std::string>> cmds{
      {"fixtures", "--seed", "5", "--side", "48", "--records", "16", "--out", fx},
      {"enrich", "--seed", "5", "--dataset", fx, "--side", "48", "--record", "r3", "--out", (root / "enrich").string()},
      {"sample", "--seed", "5", "--dataset", fx, "--side", "48", "--count", "20", "--out", b},
      {"train-codebook", "--seed", "5", "--dataset", fx, "--side", "48", "--vocab", "32", "--patch", "4",
       "--max-images", "40", "--iterations", "4", "--recolor", "--out", (root / "cb").string()},
      {"tokenize", "--bundles", b, "--codebook", cb, "--patch", "4", "--k", "2", "--out", (root / "tok").string()},
      {"mask", "--seed", "5", "--tokens", (root / "tok" / "tokens.tfts").string(), "--strategy", "mixed",
       "--n-images", "2", "--out", (root / "mask").string()},
      {"eval-codebook", "--seed", "5", "--dataset", fx, "--side", "48", "--codebook", cb, "--samples", "3", "--out",
       (root / "ub").string()},
      {"eval-preds", "--seed", "5", "--bundles", b, "--out", (root / "eval").string()},
      {"eval-preds", "--bundles", b, "--predictor", "tokens", "--predictions",
       (root / "tok" / "tokens.tfts").string(), "--codebook", cb, "--out", (root / "eval_tokens").string()},
      {"preview", "--bundles", b + "/bundle_0000", "--out", (root / "preview").string()},
  };
  auto run_all = [&]() -> std::string {
    for (const auto& c : cmds) {
      std::ostringstream out, err;
      if (dispatch(c, out, err) != 0) return c[0] + " failed: " + err.str();
    }
    return "";
  };
  if (auto e = run_all(); !e.empty()) return {false, e};
  auto first = tree(root);
  for (const auto& e : fs::directory_iterator(root)) fs::remove_all(e.path());
  if (auto e = run_all(); !e.empty()) return {false, e};
  auto second = tree(root);
  std::size_t differing = 0;
  for (const auto& [path, bytes] : first) {
    auto it = second.find(path);
    if (it == second.end() || it->second != bytes) ++differing;
  }
  differing += second.size() > first.size() ? second.size() - first.size() : 0;
  return {differing == 0 && !first.empty(), std::to_string(cmds.size()) + " subcommand runs, " +
                                                std::to_string(first.size()) + " files, " +
                                                std::to_string(differing) + " differ on rerun"};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"identity codebook pin", identity_pin},
      {"length laws", length_laws},
      {"guardrails", guardrails},
      {"composition oracle", composition_oracle},
      {"masking statistics", masking_statistics},
      {"metric oracles", metric_oracles},
      {"transform algebra", transform_algebra},
      {"balanced stream", balanced_stream},
      {"recolour augmentation direction", recolor_direction},
      {"copy baseline sanity", copy_baseline},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
