#include "taskforge/bundle_io.hpp"

#include <fstream>
#include <map>

#include "taskforge/error.hpp"
#include "taskforge/png_io.hpp"

namespace taskforge {

namespace fs = std::filesystem;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
  return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("field '") + key + "': " + e.what());
  }
}

Json rgb_json(Rgb c) { return Json::array({c.r, c.g, c.b}); }

Rgb rgb_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("colour must be [r, g, b]");
  Rgb c;
  std::uint8_t* ch[3] = {&c.r, &c.g, &c.b};
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number_integer() || j[i].get<int>() < 0 || j[i].get<int>() > 255) {
      throw ValidationError("colour channel out of range");
    }
    *ch[i] = static_cast<std::uint8_t>(j[i].get<int>());
  }
  return c;
}

const std::map<std::string, TransformKind>& transform_names() {
  static const std::map<std::string, TransformKind> names = {
      {"flip_h", TransformKind::FlipH}, {"flip_v", TransformKind::FlipV}, {"rot90", TransformKind::Rot90},
      {"rot180", TransformKind::Rot180}, {"rot270", TransformKind::Rot270}};
  return names;
}

const std::map<std::string, DiscriminativeTask>& task_names() {
  static const std::map<std::string, DiscriminativeTask> names = {
      {"segmentation", DiscriminativeTask::Segmentation}, {"edges", DiscriminativeTask::Edges},
      {"boxes", DiscriminativeTask::Boxes}, {"skeleton", DiscriminativeTask::Skeleton},
      {"points", DiscriminativeTask::Points}};
  return names;
}

}  // namespace

Json to_json(const GenerativeKind& kind) {
  Json j = {{"kind", family_name(kind)}};
  std::visit(Overloaded{[&](const SuperRes& k) { j["target_side"] = k.target_side; },
                        [&](const Inpaint& k) {
                          Json rects = Json::array();
                          for (const auto& r : k.rects) rects.push_back({r.x, r.y, r.width, r.height});
                          j["rects"] = rects;
                        },
                        [&](const Noise& k) {
                          j["mean"] = k.mean;
                          j["sigma"] = k.sigma;
                        },
                        [&](const ColorJitter& k) {
                          j["hue"] = k.hue;
                          j["saturation"] = k.saturation;
                          j["brightness"] = k.brightness;
                        },
                        [](const Invert&) {}, [](const Equalize&) {},
                        [&](const Brightness& k) { j["factor"] = k.factor; }},
             kind);
  return j;
}

GenerativeKind generative_from_json(const Json& j) {
  auto kind = get<std::string>(j, "kind");
  if (kind == "super_res") return SuperRes{get<int>(j, "target_side")};
  if (kind == "inpaint") {
    Inpaint k;
    const auto& rects = field(j, "rects");
    if (!rects.is_array()) throw ValidationError("inpaint rects must be an array");
    for (const auto& r : rects) {
      if (!r.is_array() || r.size() != 4) throw ValidationError("inpaint rect must be [x, y, w, h]");
      k.rects.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(), r[3].get<int>()});
    }
    return k;
  }
  if (kind == "noise") return Noise{get<double>(j, "mean"), get<double>(j, "sigma")};
  if (kind == "color_jitter") {
    return ColorJitter{get<double>(j, "hue"), get<double>(j, "saturation"), get<double>(j, "brightness")};
  }
  if (kind == "invert") return Invert{};
  if (kind == "equalize") return Equalize{};
  if (kind == "brightness") return Brightness{get<double>(j, "factor")};
  throw ValidationError("unknown generative kind '" + kind + "'");
}

Json to_json(TransformKind kind) { return label(kind); }

TransformKind transform_from_json(const Json& j) {
  if (!j.is_string()) throw ValidationError("transform must be a string");
  auto it = transform_names().find(j.get<std::string>());
  if (it == transform_names().end()) throw ValidationError("unknown transform '" + j.get<std::string>() + "'");
  return it->second;
}

Json to_json(const DiscriminativeKind& kind) {
  return {{"task", family_name(kind.task)}, {"width", kind.width}};
}

DiscriminativeKind discriminative_from_json(const Json& j) {
  auto name = get<std::string>(j, "task");
  auto it = task_names().find(name);
  if (it == task_names().end()) throw ValidationError("unknown discriminative task '" + name + "'");
  DiscriminativeKind k{it->second, get<int>(j, "width")};
  try {
    validate(k);
  } catch (const ParameterError& e) {
    throw ValidationError(e.what());
  }
  return k;
}

std::string to_string(OrderingMode mode) {
  return mode == OrderingMode::TaskBasis ? "task_basis" : "class_basis";
}

Json to_json(const TaskStructure& s) {
  Json j;
  j["generative"] = Json::array();
  for (const auto& g : s.generative) j["generative"].push_back(to_json(g));
  j["transforms"] = Json::array();
  for (auto t : s.transforms) j["transforms"].push_back(to_json(t));
  j["discriminative"] = Json::array();
  for (const auto& d : s.discriminative) j["discriminative"].push_back(to_json(d));
  j["ordering"] = to_string(s.ordering);
  j["classwise"] = s.classwise;
  return j;
}

TaskStructure structure_from_json(const Json& j) {
  TaskStructure s;
  for (const auto& g : field(j, "generative")) s.generative.push_back(generative_from_json(g));
  for (const auto& t : field(j, "transforms")) s.transforms.push_back(transform_from_json(t));
  for (const auto& d : field(j, "discriminative")) s.discriminative.push_back(discriminative_from_json(d));
  auto ordering = get<std::string>(j, "ordering");
  if (ordering == "task_basis") {
    s.ordering = OrderingMode::TaskBasis;
  } else if (ordering == "class_basis") {
    s.ordering = OrderingMode::ClassBasis;
  } else {
    throw ValidationError("unknown ordering '" + ordering + "'");
  }
  s.classwise = get<bool>(j, "classwise");
  return s;
}

Json to_json(const Palette& palette) {
  Json colors = Json::object();
  for (const auto& [id, c] : palette.colors()) colors[std::to_string(id)] = rgb_json(c);
  return {{"background", rgb_json(palette.background())}, {"floor", palette.floor()}, {"colors", colors}};
}

Palette palette_from_json(const Json& j) {
  std::map<ClassId, Rgb> colors;
  const auto& c = field(j, "colors");
  if (!c.is_object()) throw ValidationError("palette colors must be an object");
  for (auto it = c.begin(); it != c.end(); ++it) {
    ClassId id = 0;
    try {
      id = static_cast<ClassId>(std::stoul(it.key()));
    } catch (const std::exception&) {
      throw ValidationError("palette key '" + it.key() + "' is not a class id");
    }
    colors[id] = rgb_from(it.value());
  }
  try {
    return Palette(std::move(colors), rgb_from(field(j, "background")), get<double>(j, "floor"));
  } catch (const PaletteError& e) {
    throw ValidationError(std::string("palette: ") + e.what());
  }
}

Json to_json(const RngState& rng) { return {{"seed", rng.seed()}, {"position", rng.position()}}; }

RngState rng_from_json(const Json& j) {
  return RngState(get<std::uint64_t>(j, "seed"), get<std::uint64_t>(j, "position"));
}

// ---- bundles ----------------------------------------------------------------

namespace {

fs::path chain_image_path(std::size_t chain, std::size_t index) {
  return fs::path("chain_" + std::to_string(chain)) / (std::to_string(index) + ".png");
}

Json chain_json(const ImageChain& chain, std::size_t index, const TaskStructure& structure) {
  Json j;
  j["record"] = chain.record_id();
  j["dataset"] = chain.source ? chain.source->dataset_id : std::string();
  j["keep"] = chain.keep;
  j["rng"] = to_json(chain.rng);
  Json images = Json::array();
  auto layout = chain_layout(structure, chain.keep);
  for (std::size_t i = 0; i < chain.images.size(); ++i) {
    images.push_back({{"file", chain_image_path(index, i).generic_string()},
                      {"label", i < layout.size() ? layout[i].label : std::string()}});
  }
  j["images"] = images;
  return j;
}

}  // namespace

void write_bundle(const CqoBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<const ImageChain*> chains;
  for (const auto& c : bundle.context) chains.push_back(&c);
  chains.push_back(&bundle.held_out);

  Json d;
  d["seed"] = bundle.seed;
  d["structure"] = to_json(bundle.structure);
  d["palette"] = to_json(bundle.palette);
  d["query_chain"] = bundle.context.size();
  d["chains"] = Json::array();
  std::map<std::string, RecordPtr> sources;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const auto& chain = *chains[i];
    fs::create_directories(dir / ("chain_" + std::to_string(i)));
    for (std::size_t k = 0; k < chain.images.size(); ++k) {
      write_png_rgb(dir / chain_image_path(i, k), chain.images[k]);
    }
    d["chains"].push_back(chain_json(chain, i, bundle.structure));
    if (chain.source) sources.emplace(chain.source->id, chain.source);
  }
  for (const auto& [id, rec] : sources) {
    fs::path sdir = dir / "sources" / id;
    fs::create_directories(sdir);
    write_png_rgb(sdir / "image.png", rec->image);
    write_png_mask(sdir / "mask.png", rec->mask);
  }
  std::ofstream out(dir / "descriptor.json");
  if (!out) throw IoError("cannot write " + (dir / "descriptor.json").string());
  out << d.dump(2) << '\n';
}

CqoBundle read_bundle(const fs::path& dir) {
  std::ifstream in(dir / "descriptor.json");
  if (!in) throw IoError("cannot open " + (dir / "descriptor.json").string());
  Json d;
  try {
    d = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("descriptor.json: ") + e.what());
  }
  CqoBundle b;
  b.seed = get<std::uint64_t>(d, "seed");
  b.structure = structure_from_json(field(d, "structure"));
  b.palette = palette_from_json(field(d, "palette"));
  auto query_chain = get<std::size_t>(d, "query_chain");
  const auto& chains = field(d, "chains");
  if (!chains.is_array() || chains.size() != query_chain + 1) {
    throw ValidationError("descriptor: chain count does not match query_chain");
  }
  std::map<std::string, RecordPtr> sources;
  for (std::size_t i = 0; i < chains.size(); ++i) {
    const auto& cj = chains[i];
    ImageChain chain;
    chain.keep = get<std::set<ClassId>>(cj, "keep");
    chain.rng = rng_from_json(field(cj, "rng"));
    chain.palette = b.palette;
    auto record = get<std::string>(cj, "record");
    if (!record.empty()) {
      auto it = sources.find(record);
      if (it == sources.end()) {
        fs::path sdir = dir / "sources" / record;
        auto rec = std::make_shared<const DatasetRecord>(record, read_png_rgb(sdir / "image.png"),
                                                         read_png_mask(sdir / "mask.png"),
                                                         get<std::string>(cj, "dataset"));
        it = sources.emplace(record, rec).first;
      }
      chain.source = it->second;
    }
    for (const auto& img : field(cj, "images")) {
      chain.images.push_back(read_png_rgb(dir / get<std::string>(img, "file")));
    }
    if (i == query_chain) {
      b.held_out = std::move(chain);
    } else {
      b.context.push_back(std::move(chain));
    }
  }
  return b;
}

}  // namespace taskforge
