#include "taskforge/dataset.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "taskforge/error.hpp"
#include "taskforge/palette.hpp"
#include "taskforge/png_io.hpp"

namespace taskforge {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetRecord::DatasetRecord(std::string record_id, Image img, SegMap seg, std::string dataset)
    : id(std::move(record_id)), image(std::move(img)), mask(std::move(seg)), dataset_id(std::move(dataset)) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw ValidationError("record '" + id + "': image is " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()) + " but mask is " +
                          std::to_string(mask.width()) + "x" + std::to_string(mask.height()));
  }
}

std::set<ClassId> Dataset::class_ids() const {
  std::set<ClassId> ids;
  for (const auto& [id, name] : class_names) ids.insert(id);
  return ids;
}

const DatasetRecord* Dataset::find(const std::string& record_id) const {
  for (const auto& r : records) {
    if (r->id == record_id) return r.get();
  }
  return nullptr;
}

Dataset load_dataset(const fs::path& manifest_path, int canonical_side) {
  if (canonical_side <= 0) throw ParameterError("canonical_side must be positive");
  std::ifstream in(manifest_path);
  if (!in) throw IngestError("manifest not found: " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw IngestError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  const fs::path base = manifest_path.parent_path();
  try {
    ds.id = doc.at("dataset_id").get<std::string>();
    for (const auto& c : doc.at("classes")) {
      auto id = c.at("id").get<ClassId>();
      if (id == kBackground) throw ValidationError("manifest declares background id 0 as a class");
      if (!ds.class_names.emplace(id, c.at("name").get<std::string>()).second) {
        throw ValidationError("manifest declares class " + std::to_string(id) + " twice");
      }
    }
    if (ds.class_names.size() > max_palette_classes()) {
      throw ValidationError("manifest declares " + std::to_string(ds.class_names.size()) +
                            " classes, more than a palette can separate");
    }
    std::set<std::string> seen;
    for (const auto& entry : doc.at("records")) {
      auto rid = entry.at("id").get<std::string>();
      if (!seen.insert(rid).second) throw ValidationError("duplicate record id '" + rid + "'");
      Image image = read_png_rgb(base / entry.at("image").get<std::string>());
      SegMap mask = read_png_mask(base / entry.at("mask").get<std::string>());
      if (image.width() != mask.width() || image.height() != mask.height()) {
        throw ValidationError("record '" + rid + "': image and mask dimensions differ");
      }
      for (ClassId c : mask.present()) {
        if (!ds.class_names.contains(c)) {
          throw ValidationError("record '" + rid + "': mask contains class id " + std::to_string(c) +
                                " not declared in the manifest");
        }
      }
      image = resize_bilinear(image, canonical_side, canonical_side);
      mask = resize_nearest(mask, canonical_side, canonical_side);
      ds.records.push_back(std::make_shared<const DatasetRecord>(rid, std::move(image),
                                                                 std::move(mask), ds.id));
    }
  } catch (const json::exception& e) {
    throw IngestError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  return ds;
}

fs::path write_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  json doc;
  doc["dataset_id"] = dataset.id;
  doc["classes"] = json::array();
  for (const auto& [id, name] : dataset.class_names) {
    doc["classes"].push_back({{"id", id}, {"name", name}});
  }
  doc["records"] = json::array();
  for (const auto& r : dataset.records) {
    const std::string image_rel = "images/" + r->id + ".png";
    const std::string mask_rel = "masks/" + r->id + ".png";
    write_png_rgb(dir / image_rel, r->image);
    write_png_mask(dir / mask_rel, r->mask);
    doc["records"].push_back({{"id", r->id}, {"image", image_rel}, {"mask", mask_rel}});
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
  return manifest;
}

}  // namespace taskforge
