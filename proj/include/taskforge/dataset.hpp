#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "taskforge/image.hpp"

namespace taskforge {

inline constexpr int kDefaultCanonicalSide = 200;

struct DatasetRecord {
  std::string id;
  Image image;
  SegMap mask;
  std::string dataset_id;

  DatasetRecord() = default;
  // Throws ValidationError when image and mask dimensions differ.
  DatasetRecord(std::string record_id, Image img, SegMap seg, std::string dataset);

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

using RecordPtr = std::shared_ptr<const DatasetRecord>;

struct Dataset {
  std::string id;
  std::map<ClassId, std::string> class_names;
  std::vector<RecordPtr> records;

  std::set<ClassId> class_ids() const;
  const DatasetRecord* find(const std::string& record_id) const;
};

// Manifest layout (JSON):
//   { "dataset_id": "...",
//     "classes": [ {"id": 1, "name": "..."}, ... ],
//     "records": [ {"id": "...", "image": "rel/path.png", "mask": "rel/path.png"} ] }
// Paths are relative to the manifest's directory.
//
// Every record is resized to canonical_side (bilinear image, nearest mask).
// Errors: IngestError (missing/unreadable files, malformed manifest),
// ValidationError (dimension mismatch, undeclared class ids).
Dataset load_dataset(const std::filesystem::path& manifest_path,
                     int canonical_side = kDefaultCanonicalSide);

// Writes images/<id>.png, masks/<id>.png and manifest.json under `dir`.
// Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace taskforge
