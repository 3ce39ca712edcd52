#pragma once

#include <string>
#include <vector>

#include "plateflow/metrics.hpp"

namespace plateflow {

/// One annotated image: size, labeled boxes, optional split/stratum tags.
struct AnnotatedImage {
  std::string image_id;
  std::string path;  // image file, as recorded in the annotation
  int width = 0;
  int height = 0;
  std::vector<LabeledBox> objects;
  std::string split;    // train/test/validation, empty if unassigned
  std::string stratum;  // stratification key for splitting, may be empty
};

struct VocLoadResult {
  std::vector<AnnotatedImage> images;
  std::vector<std::string> warnings;  // unknown labels, clamped boxes
};

/// Loads every .xml in the directory (sorted by name). Malformed XML raises
/// DataError naming the file; unknown labels and out-of-bounds boxes are
/// recorded as warnings, the objects kept (boxes clamped).
VocLoadResult load_voc(const std::string& dirpath);

/// Single Pascal-VOC style file.
AnnotatedImage load_voc_file(const std::string& path, std::vector<std::string>& warnings);

void save_voc(const AnnotatedImage& image, const std::string& path);

// JSON mirror carrying what VOC cannot (split/stratum tags, float precision).
AnnotatedImage load_annotation_json(const std::string& path);
void save_annotation_json(const AnnotatedImage& image, const std::string& path);

}  // namespace plateflow
