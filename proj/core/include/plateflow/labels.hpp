#pragma once

#include <array>
#include <string>
#include <vector>

namespace plateflow {

/// The fixed 19-class character set: ten digits plus the nine letter classes
/// used on Moroccan plates (Latin stand-in labels).
inline constexpr int kNumCharClasses = 19;

const std::array<std::string, kNumCharClasses>& char_class_labels();

/// Index in [0, 19); throws DataError for unknown labels.
int char_class_index(const std::string& label);

bool is_char_class(const std::string& label);
bool is_digit_class(const std::string& label);
bool is_letter_class(const std::string& label);

/// Plain-text label map, one "index,label" line per class.
void save_label_map(const std::string& path);

/// Loads and validates against the canonical table; throws DataError on any
/// deviation.
std::vector<std::string> load_label_map(const std::string& path);

}  // namespace plateflow
