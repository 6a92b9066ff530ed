#pragma once

#include <string>
#include <vector>

#include "taskforge/dataset.hpp"
#include "taskforge/rng.hpp"

namespace taskforge {

struct FixtureOptions {
  std::string dataset_id = "fixture";
  // Probability that a class beyond the first guaranteed one appears in a
  // record. Every record contains at least one class.
  double class_presence = 0.7;
  // Per-record jitter of a class's anchor, as a fraction of the anchor cell.
  double jitter = 0.12;
  int max_placement_attempts = 64;
};

// Synthetic segmentation records: one filled ellipse or rectangle per
// present class, shapes never overlap or touch, and every class keeps a
// stable anchor across records so different records of one dataset look
// alike (the way anatomy does in medical scans). The image is a smooth
// gradient with per-class shading inside each shape.
//
// Preconditions: n_classes >= 1, side >= 16. Throws ParameterError on those,
// FixtureError when shapes cannot be placed without overlap.
std::vector<DatasetRecord> generate_fixture(int n_records, int n_classes, int side,
                                            RngState rng, const FixtureOptions& options = {});

// Wraps generate_fixture into a Dataset with class names "class_<id>".
Dataset make_fixture_dataset(int n_records, int n_classes, int side, RngState rng,
                             const FixtureOptions& options = {});

}  // namespace taskforge
