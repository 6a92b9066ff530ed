#include "taskforge/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "taskforge/balance.hpp"
#include "taskforge/codebook.hpp"
#include "taskforge/dataset.hpp"
#include "taskforge/error.hpp"
#include "taskforge/fixture.hpp"
#include "taskforge/harness.hpp"
#include "taskforge/masking.hpp"
#include "taskforge/png_io.hpp"

namespace taskforge {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.generic_string());
  return out;
}

// Reads the keys of one config section. Unknown keys and type mismatches
// are ConfigErrors naming the offending key.
class Section {
 public:
  Section(const Json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = &root.at(name);
    if (!obj_->is_object()) throw ConfigError(name + ": expected an object");
  }

  template <class T>
  Section& get(const std::string& key, T& dst) {
    known_.insert(key);
    if (!obj_ || !obj_->contains(key)) return *this;
    try {
      dst = obj_->at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type " + obj_->at(key).dump());
    }
    return *this;
  }

  Section& get(const std::string& key, fs::path& dst) {
    std::string s = dst.generic_string();
    get(key, s);
    dst = s;
    return *this;
  }

  Section& get(const std::string& key, std::vector<fs::path>& dst) {
    std::vector<std::string> s = path_strings(dst);
    get(key, s);
    dst.assign(s.begin(), s.end());
    return *this;
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!known_.contains(key)) throw ConfigError(name_ + "." + key + ": unknown key");
    }
  }

 private:
  std::string name_;
  const Json* obj_ = nullptr;
  std::set<std::string> known_;
};

template <class T>
void require_range(const std::string& field, T value, T lo, T hi) {
  if (value < lo || value > hi) {
    std::ostringstream os;
    os << field << ": " << value << " outside [" << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
}

void require_path(const std::string& field, const fs::path& p) {
  if (p.empty()) throw ConfigError(field + ": required");
}

// Runs fn(0..n-1) over a few worker threads; the first exception is
// rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string safe_name(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::vector<Dataset> load_datasets(const RunConfig& cfg) {
  if (cfg.paths.datasets.empty()) throw ConfigError("paths.datasets: at least one dataset is required");
  std::vector<Dataset> out;
  for (const auto& p : cfg.paths.datasets) {
    out.push_back(load_dataset(fs::is_directory(p) ? p / "manifest.json" : p, cfg.data.side));
  }
  return out;
}

std::vector<fs::path> bundle_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("bundle directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "descriptor.json")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw EvaluationError("no bundles under " + root.string());
  return dirs;
}

GridShape grid_of(const RunConfig& cfg) {
  return {cfg.codec.grid_rows, cfg.codec.grid_cols};
}

std::shared_ptr<Codebook> open_codebook(const RunConfig& cfg) {
  if (cfg.codec.kind == "identity") return make_identity_codebook(cfg.codec.patch_side * cfg.codec.grid_rows, grid_of(cfg));
  require_path("paths.codebook", cfg.paths.codebook);
  return load_codebook(cfg.paths.codebook);
}

ClassId max_class_id(const Dataset& ds) {
  auto ids = ds.class_ids();
  return ids.empty() ? 1 : std::max<ClassId>(1, *ids.rbegin());
}

// --- subcommands ----------------------------------------------------------

void cmd_fixtures(const RunConfig& cfg, std::ostream& out) {
  RngState rng = RngState(cfg.seed).derive("fixtures");
  Dataset ds = make_fixture_dataset(cfg.data.fixture_records, cfg.data.fixture_classes, cfg.data.side, rng);
  auto manifest = write_dataset(ds, cfg.paths.output);
  out << "wrote " << ds.records.size() << " records to " << manifest.generic_string() << '\n';
}

void cmd_enrich(const RunConfig& cfg, std::ostream& out) {
  auto datasets = load_datasets(cfg);
  if (cfg.data.record.empty()) throw ConfigError("data.record: required");
  for (const auto& ds : datasets) {
    const DatasetRecord* rec = ds.find(cfg.data.record);
    if (!rec) continue;
    RngState rng = RngState(cfg.seed).derive("enrich");
    RngState vr = rng.derive("variants");
    auto variants = enumerate_task_variants(cfg.data.side, vr);
    Palette palette = fixed_palette(max_class_id(ds));
    for (std::size_t i = 0; i < variants.size(); ++i) {
      RngState r = rng.derive("render").derive(i);
      Image img = render_variant(variants[i], rec->image, rec->mask, palette, r);
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%02zu_", i);
      write_png_rgb(cfg.paths.output / (prefix + safe_name(variants[i].label()) + ".png"), img);
    }
    out << "wrote " << variants.size() << " task renderings of " << rec->id << '\n';
    return;
  }
  throw ConfigError("data.record: no record '" + cfg.data.record + "' in the datasets");
}

void cmd_sample(const RunConfig& cfg, std::ostream& out) {
  auto datasets = load_datasets(cfg);
  std::vector<RecordPtr> records;
  for (const auto& ds : datasets) records.insert(records.end(), ds.records.begin(), ds.records.end());
  SamplerConfig sc;
  sc.image_budget = cfg.sampler.image_budget;
  sc.limits.t_max = cfg.sampler.t_max;
  sc.n_context_min = cfg.sampler.n_context_min;
  sc.n_context_max = cfg.sampler.n_context_max;
  RngState master = RngState(cfg.seed).derive("sample");
  // Bundle i comes from master.derive(i), as in sample_bundles.
  parallel_for(cfg.sampler.bundles, [&](std::size_t i) {
    CqoBundle b = sample_cqo(records, master.derive(i), sc);
    char name[32];
    std::snprintf(name, sizeof name, "bundle_%04zu", i);
    write_bundle(b, cfg.paths.output / name);
  });
  out << "wrote " << cfg.sampler.bundles << " bundles\n";
}

void cmd_train_codebook(const RunConfig& cfg, std::ostream& out) {
  if (cfg.codec.kind != "kmeans") throw ConfigError("codec.kind: train-codebook needs kmeans");
  auto datasets = load_datasets(cfg);
  RngState rng = RngState(cfg.seed).derive("train-codebook");
  RngState vr = rng.derive("variants");
  auto variants = enumerate_task_variants(cfg.data.side, vr);
  BalanceConfig bc;
  bc.task_balancing = cfg.balance.task_balancing;
  bc.dataset_balancing = cfg.balance.dataset_balancing;
  bc.recolor = cfg.balance.recolor;
  BalancedStream stream(datasets, variants, bc, rng.derive("stream"));
  TrainConfig tc;
  tc.vocab_size = static_cast<std::size_t>(cfg.codec.vocab_size);
  tc.patch_side = cfg.codec.patch_side;
  tc.grid = grid_of(cfg);
  tc.iterations = cfg.codec.iterations;
  tc.max_images = static_cast<std::size_t>(cfg.codec.max_images);
  tc.seed = rng.derive("kmeans").seed();
  auto result = train_codebook(stream, tc);
  save_codebook(*result.codebook, cfg.paths.output / "codebook.tfcb");
  Json log = {{"codebook", result.codebook->descriptor()},
              {"patch_count", result.patch_count},
              {"objective", result.objective}};
  write_text(cfg.paths.output / "train_log.json", log.dump(2) + '\n');
  out << "trained " << result.codebook->descriptor() << " on " << result.patch_count << " patches\n";
}

void cmd_tokenize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  require_path("paths.bundles", cfg.paths.bundles);
  auto dirs = bundle_dirs(cfg.paths.bundles);
  auto codebook = open_codebook(cfg);
  const auto k = static_cast<std::size_t>(cfg.masking.k);
  TokenFile file{codebook->vocab_size(), codebook->tokens_per_image(), k, {}};
  file.records.resize(dirs.size());
  auto encode = [&](std::size_t i) {
    file.records[i].name = dirs[i].filename().string();
    file.records[i].sequence = assemble_tokens(read_bundle(dirs[i]), *codebook, k);
  };
  // Identity ids are issued in encounter order, so that codec runs serially.
  if (cfg.codec.kind == "identity") {
    for (std::size_t i = 0; i < dirs.size(); ++i) encode(i);
  } else {
    parallel_for(dirs.size(), encode);
  }
  for (const auto& r : file.records) {
    for (const auto& w : r.sequence.warnings) err << "warning: " << r.name << ": " << w << '\n';
  }
  write_token_file(cfg.paths.output / "tokens.tfts", file);
  if (auto* identity = dynamic_cast<IdentityCodebook*>(codebook.get())) {
    save_codebook(*identity->snapshot(), cfg.paths.output / "codebook.tfcb");
  }
  out << "tokenized " << dirs.size() << " bundles with " << codebook->descriptor() << '\n';
}

void cmd_mask(const RunConfig& cfg, std::ostream& out) {
  require_path("paths.tokens", cfg.paths.tokens);
  TokenFile file = read_token_file(cfg.paths.tokens);
  MaskingStrategy strategy{parse_masking_kind(cfg.masking.strategy), cfg.masking.p,
                           static_cast<std::size_t>(cfg.masking.n_images)};
  RngState rng = RngState(cfg.seed).derive("mask");
  std::size_t masked = 0;
  for (std::size_t i = 0; i < file.records.size(); ++i) {
    auto& rec = file.records[i];
    auto pair = split_targets(apply_masking(rec.sequence, strategy, rng.derive(i)));
    rec.sequence.ids = pair.input;
    rec.targets = pair.targets;
    masked += pair.targets.size();
  }
  write_token_file(cfg.paths.output / "masked.tfts", file);
  out << "masked " << masked << " positions over " << file.records.size() << " sequences ("
      << strategy.descriptor() << ")\n";
}

void cmd_eval_codebook(const RunConfig& cfg, std::ostream& out) {
  auto codebook = open_codebook(cfg);
  auto datasets = load_datasets(cfg);
  RngState rng = RngState(cfg.seed).derive("eval-codebook");
  RngState vr = rng.derive("variants");
  auto variants = enumerate_task_variants(cfg.data.side, vr);
  UpperBoundConfig uc;
  uc.samples_per_task = static_cast<std::size_t>(cfg.eval.samples_per_task);
  UpperBoundReport report;
  report.codebook = codebook->descriptor();
  for (const auto& ds : datasets) {
    auto r = codebook_upper_bound(*codebook, ds, variants, rng.derive(ds.id), uc);
    report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
  }
  write_text(cfg.paths.output / "upper_bound.tsv", report.to_tsv());
  write_text(cfg.paths.output / "upper_bound.json", report.to_json().dump(2) + '\n');
  out << "scored " << report.rows.size() << " task rows for " << report.codebook << '\n';
}

void cmd_eval_preds(const RunConfig& cfg, std::ostream& out) {
  require_path("paths.bundles", cfg.paths.bundles);
  EvalConfig ec;
  ec.bundles = cfg.paths.bundles;
  ec.output = cfg.paths.output;
  ec.predictor = parse_predictor(cfg.eval.predictor);
  ec.seed = RngState(cfg.seed).derive("eval-preds").seed();
  if (ec.predictor == Predictor::Tokens) {
    require_path("paths.predictions", cfg.paths.predictions);
    require_path("paths.codebook", cfg.paths.codebook);
    ec.predictions = cfg.paths.predictions;
    ec.codebook = cfg.paths.codebook;
  }
  auto result = run_eval(ec);
  out << "evaluated " << result.rows.size() << " bundles\n";
}

// One row per chain (context chains first, then the held-out chain), images
// left to right, on a grey canvas.
Image preview_strip(const CqoBundle& b) {
  std::vector<const ImageChain*> rows;
  for (const auto& c : b.context) rows.push_back(&c);
  rows.push_back(&b.held_out);
  const int gap = 4;
  int cell_w = 0, cell_h = 0;
  std::size_t cols = 0;
  for (const auto* r : rows) {
    cols = std::max(cols, r->images.size());
    for (const auto& img : r->images) {
      cell_w = std::max(cell_w, img.width());
      cell_h = std::max(cell_h, img.height());
    }
  }
  int w = static_cast<int>(cols) * (cell_w + gap) + gap;
  int h = static_cast<int>(rows.size()) * (cell_h + gap) + gap;
  // The held-out row sits below a wider gap.
  h += gap;
  Image canvas(w, h, Rgb{64, 64, 64});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    int y0 = gap + static_cast<int>(r) * (cell_h + gap) + (r + 1 == rows.size() ? gap : 0);
    for (std::size_t c = 0; c < rows[r]->images.size(); ++c) {
      const Image& img = rows[r]->images[c];
      int x0 = gap + static_cast<int>(c) * (cell_w + gap);
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) canvas.set(x0 + x, y0 + y, img.at(x, y));
    }
  }
  return canvas;
}

void cmd_preview(const RunConfig& cfg, std::ostream& out) {
  require_path("paths.bundles", cfg.paths.bundles);
  CqoBundle b = read_bundle(cfg.paths.bundles);
  write_png_rgb(cfg.paths.output / "preview.png", preview_strip(b));
  out << "wrote preview of " << b.context.size() + 1 << " chains\n";
}

// Flag values that override the config file.
struct Overrides {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, bundles, codebook, tokens, predictions, record, codec, strategy, predictor;
  std::vector<std::string> datasets;
  std::optional<int> side, records, classes, budget, t_max, n_context_min, n_context_max, count;
  std::optional<int> vocab, patch, grid, iterations, max_images, n_images, k, samples;
  std::optional<double> p;
  bool recolor = false, no_task_balancing = false, no_dataset_balancing = false;

  void apply(RunConfig& c) const {
    if (seed) c.seed = *seed;
    if (out) c.paths.output = *out;
    if (!datasets.empty()) c.paths.datasets.assign(datasets.begin(), datasets.end());
    if (bundles) c.paths.bundles = *bundles;
    if (codebook) c.paths.codebook = *codebook;
    if (tokens) c.paths.tokens = *tokens;
    if (predictions) c.paths.predictions = *predictions;
    if (record) c.data.record = *record;
    if (side) c.data.side = *side;
    if (records) c.data.fixture_records = *records;
    if (classes) c.data.fixture_classes = *classes;
    if (budget) c.sampler.image_budget = *budget;
    if (t_max) c.sampler.t_max = *t_max;
    if (n_context_min) c.sampler.n_context_min = *n_context_min;
    if (n_context_max) c.sampler.n_context_max = *n_context_max;
    if (count) c.sampler.bundles = *count;
    if (codec) c.codec.kind = *codec;
    if (vocab) c.codec.vocab_size = *vocab;
    if (patch) c.codec.patch_side = *patch;
    if (grid) c.codec.grid_rows = c.codec.grid_cols = *grid;
    if (iterations) c.codec.iterations = *iterations;
    if (max_images) c.codec.max_images = *max_images;
    if (strategy) c.masking.strategy = *strategy;
    if (p) c.masking.p = *p;
    if (n_images) c.masking.n_images = *n_images;
    if (k) c.masking.k = *k;
    if (recolor) c.balance.recolor = true;
    if (no_task_balancing) c.balance.task_balancing = false;
    if (no_dataset_balancing) c.balance.dataset_balancing = false;
    if (predictor) c.eval.predictor = *predictor;
    if (samples) c.eval.samples_per_task = *samples;
  }
};

enum Group : unsigned {
  kDatasets = 1, kData = 2, kFixture = 4, kSampler = 8, kCodec = 16, kMasking = 32, kBalance = 64, kEval = 128,
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Overrides& o,
                      unsigned groups) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->add_option("--config", o.config, "config file (default: $TASKFORGE_CONFIG)");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--out", o.out, "output directory");
  if (groups & kDatasets) sub->add_option("--dataset", o.datasets, "dataset manifest or directory (repeatable)");
  if (groups & kData) sub->add_option("--side", o.side, "canonical side");
  if (groups & kFixture) {
    sub->add_option("--records", o.records, "fixture records");
    sub->add_option("--classes", o.classes, "fixture classes");
  }
  if (groups & kSampler) {
    sub->add_option("--budget", o.budget, "image budget per bundle");
    sub->add_option("--t-max", o.t_max, "maximum chain length");
    sub->add_option("--n-context-min", o.n_context_min);
    sub->add_option("--n-context-max", o.n_context_max);
    sub->add_option("--count", o.count, "bundles to sample");
  }
  if (groups & kCodec) {
    sub->add_option("--codec", o.codec, "kmeans or identity");
    sub->add_option("--vocab", o.vocab, "codebook size N");
    sub->add_option("--patch", o.patch, "patch side in pixels");
    sub->add_option("--grid", o.grid, "patches per row and column");
    sub->add_option("--iterations", o.iterations, "Lloyd iterations");
    sub->add_option("--max-images", o.max_images, "training images drawn from the stream");
    sub->add_option("--codebook", o.codebook, "codebook file");
  }
  if (groups & kMasking) {
    sub->add_option("--strategy", o.strategy, "token, image_token, sequence_token or mixed");
    sub->add_option("--p", o.p, "token masking probability");
    sub->add_option("--n-images", o.n_images, "images masked whole");
    sub->add_option("--k", o.k, "special-token repeat");
  }
  if (groups & kBalance) {
    sub->add_flag("--recolor", o.recolor, "re-render annotations with fresh palettes");
    sub->add_flag("--no-task-balancing", o.no_task_balancing);
    sub->add_flag("--no-dataset-balancing", o.no_dataset_balancing);
  }
  if (groups & kEval) sub->add_option("--samples", o.samples, "samples per task");
  return sub;
}

}  // namespace

Json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"paths",
       {{"datasets", path_strings(c.paths.datasets)},
        {"output", c.paths.output.generic_string()},
        {"bundles", c.paths.bundles.generic_string()},
        {"codebook", c.paths.codebook.generic_string()},
        {"tokens", c.paths.tokens.generic_string()},
        {"predictions", c.paths.predictions.generic_string()}}},
      {"data",
       {{"side", c.data.side},
        {"fixture_records", c.data.fixture_records},
        {"fixture_classes", c.data.fixture_classes},
        {"record", c.data.record}}},
      {"sampler",
       {{"image_budget", c.sampler.image_budget},
        {"t_max", c.sampler.t_max},
        {"n_context_min", c.sampler.n_context_min},
        {"n_context_max", c.sampler.n_context_max},
        {"bundles", c.sampler.bundles}}},
      {"codec",
       {{"kind", c.codec.kind},
        {"vocab_size", c.codec.vocab_size},
        {"patch_side", c.codec.patch_side},
        {"grid_rows", c.codec.grid_rows},
        {"grid_cols", c.codec.grid_cols},
        {"iterations", c.codec.iterations},
        {"max_images", c.codec.max_images}}},
      {"masking",
       {{"strategy", c.masking.strategy}, {"p", c.masking.p}, {"n_images", c.masking.n_images}, {"k", c.masking.k}}},
      {"balance",
       {{"task_balancing", c.balance.task_balancing},
        {"dataset_balancing", c.balance.dataset_balancing},
        {"recolor", c.balance.recolor}}},
      {"eval", {{"predictor", c.eval.predictor}, {"samples_per_task", c.eval.samples_per_task}}},
  };
}

RunConfig run_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected an object");
  static const std::set<std::string> sections{"seed", "paths", "data", "sampler", "codec", "masking", "balance", "eval"};
  for (const auto& [key, value] : j.items()) {
    if (!sections.contains(key)) throw ConfigError(key + ": unknown key");
  }
  RunConfig c;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  Section(j, "paths")
      .get("datasets", c.paths.datasets)
      .get("output", c.paths.output)
      .get("bundles", c.paths.bundles)
      .get("codebook", c.paths.codebook)
      .get("tokens", c.paths.tokens)
      .get("predictions", c.paths.predictions)
      .finish();
  Section(j, "data")
      .get("side", c.data.side)
      .get("fixture_records", c.data.fixture_records)
      .get("fixture_classes", c.data.fixture_classes)
      .get("record", c.data.record)
      .finish();
  Section(j, "sampler")
      .get("image_budget", c.sampler.image_budget)
      .get("t_max", c.sampler.t_max)
      .get("n_context_min", c.sampler.n_context_min)
      .get("n_context_max", c.sampler.n_context_max)
      .get("bundles", c.sampler.bundles)
      .finish();
  Section(j, "codec")
      .get("kind", c.codec.kind)
      .get("vocab_size", c.codec.vocab_size)
      .get("patch_side", c.codec.patch_side)
      .get("grid_rows", c.codec.grid_rows)
      .get("grid_cols", c.codec.grid_cols)
      .get("iterations", c.codec.iterations)
      .get("max_images", c.codec.max_images)
      .finish();
  Section(j, "masking")
      .get("strategy", c.masking.strategy)
      .get("p", c.masking.p)
      .get("n_images", c.masking.n_images)
      .get("k", c.masking.k)
      .finish();
  Section(j, "balance")
      .get("task_balancing", c.balance.task_balancing)
      .get("dataset_balancing", c.balance.dataset_balancing)
      .get("recolor", c.balance.recolor)
      .finish();
  Section(j, "eval").get("predictor", c.eval.predictor).get("samples_per_task", c.eval.samples_per_task).finish();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const fs::path& path) {
  write_text(path, to_json(config).dump(2) + '\n');
}

void validate(const RunConfig& c) {
  require_range("data.side", c.data.side, 16, 4096);
  require_range("data.fixture_records", c.data.fixture_records, 1, 100000);
  require_range("data.fixture_classes", c.data.fixture_classes, 1, 64);
  require_range("sampler.image_budget", c.sampler.image_budget, 2, kDefaultImageBudget);
  require_range("sampler.t_max", c.sampler.t_max, 2, kDefaultTMax);
  require_range("sampler.n_context_min", c.sampler.n_context_min, 1, 64);
  require_range("sampler.n_context_max", c.sampler.n_context_max, c.sampler.n_context_min, 64);
  require_range("sampler.bundles", c.sampler.bundles, 1, 10000000);
  if (c.codec.kind != "kmeans" && c.codec.kind != "identity") {
    throw ConfigError("codec.kind: '" + c.codec.kind + "' is not kmeans or identity");
  }
  require_range("codec.vocab_size", c.codec.vocab_size, 1, 1 << 24);
  require_range("codec.patch_side", c.codec.patch_side, 1, 1024);
  require_range("codec.grid_rows", c.codec.grid_rows, 1, 256);
  require_range("codec.grid_cols", c.codec.grid_cols, 1, 256);
  require_range("codec.iterations", c.codec.iterations, 1, 10000);
  require_range("codec.max_images", c.codec.max_images, 1, 10000000);
  try {
    parse_masking_kind(c.masking.strategy);
  } catch (const Error&) {
    throw ConfigError("masking.strategy: unknown strategy '" + c.masking.strategy + "'");
  }
  if (!(c.masking.p > 0.0 && c.masking.p < 1.0)) {
    throw ConfigError("masking.p: " + std::to_string(c.masking.p) + " outside (0, 1)");
  }
  require_range("masking.n_images", c.masking.n_images, 1, kDefaultImageBudget);
  require_range("masking.k", c.masking.k, 1, 8);
  // A full bundle must fit the context window.
  long q = long(c.codec.grid_rows) * c.codec.grid_cols;
  long worst = long(c.sampler.image_budget) * (q + c.masking.k) + long(c.sampler.n_context_max) * c.masking.k;
  if (worst > long(kContextWindow)) {
    throw ConfigError("sampler.image_budget: " + std::to_string(c.sampler.image_budget) + " images give up to " +
                      std::to_string(worst) + " tokens, over the context window of " +
                      std::to_string(kContextWindow));
  }
  try {
    parse_predictor(c.eval.predictor);
  } catch (const Error&) {
    throw ConfigError("eval.predictor: unknown predictor '" + c.eval.predictor + "'");
  }
  require_range("eval.samples_per_task", c.eval.samples_per_task, 1, 1000000);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compositional task bundles: fixtures, sampling, codebooks, tokens and evaluation", "taskforge"};
  app.require_subcommand(1, 1);
  Overrides o;
  struct Command {
    CLI::App* app;
    std::function<void(const RunConfig&)> run;
  };
  std::vector<Command> commands{
      {add_command(app, "fixtures", "write a synthetic segmentation dataset", o, kData | kFixture),
       [&](const RunConfig& c) { cmd_fixtures(c, out); }},
      {add_command(app, "enrich", "render every task variant of one record", o, kDatasets | kData),
       [&](const RunConfig& c) { cmd_enrich(c, out); }},
      {add_command(app, "sample", "sample bundles", o, kDatasets | kData | kSampler),
       [&](const RunConfig& c) { cmd_sample(c, out); }},
      {add_command(app, "train-codebook", "train a k-means codebook on the balanced stream", o,
                   kDatasets | kData | kCodec | kBalance),
       [&](const RunConfig& c) { cmd_train_codebook(c, out); }},
      {add_command(app, "tokenize", "turn bundles into token sequences", o, kCodec | kMasking),
       [&](const RunConfig& c) { cmd_tokenize(c, out, err); }},
      {add_command(app, "mask", "mask a token file into training pairs", o, kMasking),
       [&](const RunConfig& c) { cmd_mask(c, out); }},
      {add_command(app, "eval-codebook", "codebook upper bound under both colour protocols", o,
                   kDatasets | kData | kCodec | kEval),
       [&](const RunConfig& c) { cmd_eval_codebook(c, out); }},
      {add_command(app, "eval-preds", "score predictions against held-out chains", o, kCodec),
       [&](const RunConfig& c) { cmd_eval_preds(c, out); }},
      {add_command(app, "preview", "render one bundle as an image strip", o, 0),
       [&](const RunConfig& c) { cmd_preview(c, out); }},
  };
  for (auto& cmd : commands) {
    if (cmd.app->get_name() == "enrich") cmd.app->add_option("--record", o.record, "record id");
    if (cmd.app->get_name() == "tokenize" || cmd.app->get_name() == "eval-preds" || cmd.app->get_name() == "preview") {
      cmd.app->add_option("--bundles", o.bundles, cmd.app->get_name() == "preview" ? "bundle directory"
                                                                                   : "directory of bundles");
    }
    if (cmd.app->get_name() == "mask") cmd.app->add_option("--tokens", o.tokens, "token file");
    if (cmd.app->get_name() == "eval-preds") {
      cmd.app->add_option("--predictor", o.predictor, "ground_truth, copy_baseline or tokens");
      cmd.app->add_option("--predictions", o.predictions, "predicted token file");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help;
    app.exit(e, help, err);
    return 2;
  }

  try {
    RunConfig config;
    std::optional<std::string> config_path = o.config;
    if (!config_path) {
      if (const char* env = std::getenv(kConfigEnv); env && *env) config_path = env;
    }
    if (config_path) config = load_run_config(*config_path);
    o.apply(config);
    validate(config);
    require_path("paths.output", config.paths.output);
    fs::create_directories(config.paths.output);
    for (auto& cmd : commands) {
      if (!cmd.app->parsed()) continue;
      cmd.run(config);
      save_run_config(config, config.paths.output / "effective_config.json");
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace taskforge
