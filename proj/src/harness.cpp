#include "taskforge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "taskforge/error.hpp"
#include "taskforge/masking.hpp"

namespace taskforge {

namespace fs = std::filesystem;

std::string to_string(ColorProtocol protocol) { return protocol == ColorProtocol::Fixed ? "fixed" : "random"; }

namespace {

std::string format_value(double v) {
  if (std::isnan(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

ClassId max_class(const Dataset& dataset) {
  ClassId m = 0;
  for (ClassId c : dataset.class_ids()) m = std::max(m, c);
  for (const auto& r : dataset.records) {
    if (!r->mask.present().empty()) m = std::max(m, *r->mask.present().rbegin());
  }
  return m;
}

}  // namespace

const UpperBoundRow* UpperBoundReport::find(const std::string& task, ColorProtocol protocol,
                                            MetricKind metric) const {
  for (const auto& r : rows) {
    if (r.task == task && r.protocol == protocol && r.metric == metric) return &r;
  }
  return nullptr;
}

std::string UpperBoundReport::to_tsv() const {
  std::string out = "dataset\ttask\tfamily\tprotocol\tmetric\tvalue\tsamples\n";
  for (const auto& r : rows) {
    out += r.dataset + '\t' + r.task + '\t' + r.family + '\t' + to_string(r.protocol) + '\t' + to_string(r.metric) +
           '\t' + format_value(r.value) + '\t' + std::to_string(r.samples) + '\n';
  }
  return out;
}

Json UpperBoundReport::to_json() const {
  Json rows_json = Json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"dataset", r.dataset},
                         {"task", r.task},
                         {"family", r.family},
                         {"protocol", to_string(r.protocol)},
                         {"metric", to_string(r.metric)},
                         {"value", r.value},
                         {"samples", r.samples}});
  }
  return {{"codebook", codebook}, {"rows", rows_json}};
}

UpperBoundReport codebook_upper_bound(const Codebook& codebook, const Dataset& dataset,
                                      const std::vector<TaskVariant>& tasks, ColorProtocol protocol, RngState rng,
                                      const UpperBoundConfig& config) {
  if (dataset.records.empty()) throw ConfigError("upper bound: dataset '" + dataset.id + "' is empty");
  if (config.samples_per_task < 1) throw ConfigError("upper bound: samples_per_task must be positive");
  UpperBoundReport report;
  report.codebook = codebook.descriptor();
  const Palette fixed = fixed_palette(max_class(dataset), config.palette_floor);
  const RngState record_rng = rng.derive("records");

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const bool annotation = task.family == TaskVariant::Family::Discriminative;
    MetricKind metric = MetricKind::MAE;
    if (annotation) {
      metric = task.discriminative.task == DiscriminativeTask::Segmentation ? MetricKind::IoU : MetricKind::F1;
    }
    double sum = 0;
    for (std::size_t s = 0; s < config.samples_per_task; ++s) {
      RngState pick = record_rng.derive(s);
      const auto& rec = *dataset.records[pick.uniform_index(dataset.records.size())];
      Palette palette = fixed;
      if (protocol == ColorProtocol::Random) {
        RngState prng = rng.derive("palette").derive(t).derive(s);
        palette = sample_palette(rec.mask.present(), prng, config.palette_floor);
      }
      RngState render_rng = rng.derive("render").derive(t).derive(s);
      Image gt = render_variant(task, rec.image, rec.mask, palette, render_rng);
      Image rec_img;
      try {
        rec_img = roundtrip(codebook, gt, annotation);
      } catch (const CodecError& e) {
        throw CodecError("record " + rec.id + ": " + e.what());
      }
      if (annotation) {
        sum += compute_metric(snap_to_palette(rec_img, palette), snap_to_palette(gt, palette), metric);
      } else {
        sum += compute_metric(rec_img, gt, metric);
      }
    }
    report.rows.push_back({dataset.id, task.label(), task.bucket(), protocol, metric,
                           sum / double(config.samples_per_task), config.samples_per_task});
  }
  return report;
}

UpperBoundReport codebook_upper_bound(const Codebook& codebook, const Dataset& dataset,
                                      const std::vector<TaskVariant>& tasks, RngState rng,
                                      const UpperBoundConfig& config) {
  auto report = codebook_upper_bound(codebook, dataset, tasks, ColorProtocol::Fixed, rng, config);
  auto random = codebook_upper_bound(codebook, dataset, tasks, ColorProtocol::Random, rng, config);
  report.rows.insert(report.rows.end(), random.rows.begin(), random.rows.end());
  return report;
}

ImageChain copy_baseline_predict(const CqoBundle& bundle, RngState rng) {
  if (bundle.context.empty()) throw SamplerError("copy baseline: bundle has no context chains");
  ImageChain pred = bundle.context[rng.uniform_index(bundle.context.size())];
  pred.images.at(0) = bundle.query();
  return pred;
}

std::string to_string(Predictor predictor) {
  switch (predictor) {
    case Predictor::GroundTruth: return "ground_truth";
    case Predictor::CopyBaseline: return "copy_baseline";
    case Predictor::Tokens: return "tokens";
  }
  return "?";
}

Predictor parse_predictor(const std::string& name) {
  for (auto p : {Predictor::GroundTruth, Predictor::CopyBaseline, Predictor::Tokens}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown predictor '" + name + "'");
}

EvalResult evaluate_bundles(const EvalConfig& config) {
  if (!fs::is_directory(config.bundles)) throw IoError("bundle directory not found: " + config.bundles.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(config.bundles)) {
    if (entry.is_directory() && fs::exists(entry.path() / "descriptor.json")) dirs.push_back(entry.path());
  }
  if (dirs.empty()) throw EvaluationError("no bundles under " + config.bundles.string());
  std::sort(dirs.begin(), dirs.end());

  std::map<std::string, const TokenRecord*> predicted;
  TokenFile tokens;
  std::shared_ptr<KMeansCodebook> codebook;
  if (config.predictor == Predictor::Tokens) {
    tokens = read_token_file(config.predictions);
    codebook = load_codebook(config.codebook);
    for (const auto& r : tokens.records) predicted[r.name] = &r;
  }

  EvalResult result;
  for (const auto& dir : dirs) {
    std::string name = dir.filename().string();
    CqoBundle bundle = read_bundle(dir);
    ImageChain pred;
    switch (config.predictor) {
      case Predictor::GroundTruth: pred = bundle.held_out; break;
      case Predictor::CopyBaseline: pred = copy_baseline_predict(bundle, RngState(config.seed).derive(name)); break;
      case Predictor::Tokens: {
        auto it = predicted.find(name);
        if (it == predicted.end()) throw EvaluationError("no predicted tokens for bundle " + name);
        const auto& seq = it->second->sequence;
        std::size_t query = seq.images.size();
        for (std::size_t i = 0; i < seq.images.size(); ++i) {
          if (seq.images[i].role == ImageRole::Query) query = i;
        }
        if (query == seq.images.size() || seq.images.size() - query != bundle.chain_length()) {
          throw EvaluationError("predicted tokens for " + name + " do not match the held-out chain");
        }
        pred.images.push_back(bundle.query());
        for (std::size_t p = 1; p < bundle.chain_length(); ++p) {
          const Image& gt = bundle.held_out.images[p];
          pred.images.push_back(decode_image(seq, query + p, *codebook, gt.width(), gt.height()));
        }
        break;
      }
    }
    EvalRow row{name, bundle.chain_length(), evaluate_output_sequence(pred, bundle.held_out, bundle.structure,
                                                                      bundle.palette)};
    result.combined.positions.insert(result.combined.positions.end(), row.report.positions.begin(),
                                     row.report.positions.end());
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

constexpr MetricKind kColumns[] = {MetricKind::IoU, MetricKind::F1, MetricKind::PSNR,
                                   MetricKind::MAE, MetricKind::RMSE, MetricKind::MSE};

}  // namespace

std::string eval_report_tsv(const EvalResult& result) {
  std::string out = "row\tname\tchain_length";
  for (auto k : kColumns) out += '\t' + to_string(k);
  out += '\n';
  for (const auto& row : result.rows) {
    out += "bundle\t" + row.bundle + '\t' + std::to_string(row.chain_length);
    for (auto k : kColumns) out += '\t' + format_value(row.report.mean(k));
    out += '\n';
  }
  std::map<std::string, std::map<MetricKind, double>> families;
  for (const auto& a : result.combined.aggregates()) families[a.family][a.metric] = a.mean;
  for (const auto& [family, values] : families) {
    out += "family\t" + family + "\t-";
    for (auto k : kColumns) {
      auto it = values.find(k);
      out += '\t' + format_value(it == values.end() ? std::nan("") : it->second);
    }
    out += '\n';
  }
  out += "all\tall\t-";
  for (auto k : kColumns) out += '\t' + format_value(result.combined.mean(k));
  out += '\n';
  return out;
}

Json eval_report_json(const EvalResult& result, const EvalConfig& config) {
  Json bundles = Json::array();
  for (const auto& row : result.rows) {
    Json positions = Json::array();
    for (const auto& p : row.report.positions) {
      positions.push_back({{"position", p.position},
                           {"task", p.task},
                           {"family", p.family},
                           {"metric", to_string(p.metric)},
                           {"value", p.value}});
    }
    bundles.push_back({{"name", row.bundle}, {"chain_length", row.chain_length}, {"positions", positions}});
  }
  Json aggregates = Json::array();
  for (const auto& a : result.combined.aggregates()) {
    aggregates.push_back({{"family", a.family}, {"metric", to_string(a.metric)}, {"mean", a.mean}, {"count", a.count}});
  }
  return {{"predictor", to_string(config.predictor)},
          {"seed", config.seed},
          {"bundles", bundles},
          {"aggregates", aggregates}};
}

EvalResult run_eval(const EvalConfig& config) {
  EvalResult result = evaluate_bundles(config);
  std::string tsv = eval_report_tsv(result);
  std::string json = eval_report_json(result, config).dump(2) + '\n';
  fs::create_directories(config.output);
  for (const auto& [file, text] : {std::pair{"eval_report.tsv", &tsv}, std::pair{"eval_report.json", &json}}) {
    std::ofstream out(config.output / file, std::ios::binary);
    if (!out) throw IoError("cannot write " + (config.output / file).string());
    out << *text;
  }
  return result;
}

}  // namespace taskforge
