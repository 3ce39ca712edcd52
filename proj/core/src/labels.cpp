#include "plateflow/labels.hpp"

#include <fstream>

#include "plateflow/errors.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

const std::array<std::string, kNumCharClasses>& char_class_labels() {
  static const std::array<std::string, kNumCharClasses> labels = {
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      "a", "b", "d", "h", "j", "m", "p", "waw", "ww"};
  return labels;
}

int char_class_index(const std::string& label) {
  const auto& labels = char_class_labels();
  for (int i = 0; i < kNumCharClasses; ++i)
    if (labels[static_cast<std::size_t>(i)] == label) return i;
  throw DataError("unknown character class: '" + label + "'");
}

bool is_char_class(const std::string& label) {
  const auto& labels = char_class_labels();
  for (const auto& l : labels)
    if (l == label) return true;
  return false;
}

bool is_digit_class(const std::string& label) {
  return label.size() == 1 && label[0] >= '0' && label[0] <= '9';
}

bool is_letter_class(const std::string& label) {
  return is_char_class(label) && !is_digit_class(label);
}

void save_label_map(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write label map: " + path);
  const auto& labels = char_class_labels();
  for (int i = 0; i < kNumCharClasses; ++i)
    out << i << ',' << labels[static_cast<std::size_t>(i)] << '\n';
}

std::vector<std::string> load_label_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open label map: " + path);
  std::vector<std::string> labels;
  std::string line;
  int expected = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    if (parts.size() != 2) throw DataError("label map line needs 'index,label': '" + line + "'");
    if (parse_int(parts[0], "label index") != expected)
      throw DataError("label map indices must run 0..18 in order: '" + line + "'");
    labels.push_back(parts[1]);
    ++expected;
  }
  const auto& canonical = char_class_labels();
  if (labels.size() != canonical.size())
    throw DataError("label map must list exactly 19 classes: " + path);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != canonical[i])
      throw DataError("label map deviates from the fixed class table at index " +
                      std::to_string(i) + ": '" + labels[i] + "'");
  }
  return labels;
}

}  // namespace plateflow
