#include "plateflow/voc.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "plateflow/errors.hpp"
#include "plateflow/labels.hpp"
#include "plateflow/text.hpp"

namespace plateflow {

namespace {

bool is_known_label(const std::string& label) {
  return label == "plate" || label == "vehicle" || label == "motorcycle" || is_char_class(label);
}

double clamp_warn(double v, double lo, double hi, bool& clamped) {
  if (v < lo || v > hi) {
    clamped = true;
    return std::clamp(v, lo, hi);
  }
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

AnnotatedImage load_voc_file(const std::string& path, std::vector<std::string>& warnings) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_xml(path, tree);
  } catch (const boost::property_tree::xml_parser_error& e) {
    throw DataError("malformed VOC XML " + path + ": " + e.what());
  }

  AnnotatedImage img;
  try {
    const auto& ann = tree.get_child("annotation");
    img.path = ann.get<std::string>("filename", "");
    img.image_id = std::filesystem::path(img.path.empty() ? path : img.path).stem().string();
    img.width = static_cast<int>(parse_int(ann.get<std::string>("size.width"), "size.width"));
    img.height = static_cast<int>(parse_int(ann.get<std::string>("size.height"), "size.height"));
    if (img.width <= 0 || img.height <= 0)
      throw DataError("non-positive image size in " + path);

    for (const auto& [key, node] : ann) {
      if (key != "object") continue;
      LabeledBox obj;
      obj.label = node.get<std::string>("name");
      if (!is_known_label(obj.label))
        warnings.push_back(path + ": unknown label '" + obj.label + "'");
      bool clamped = false;
      obj.box.x_min = clamp_warn(parse_double(node.get<std::string>("bndbox.xmin"), "xmin"), 0,
                                 img.width, clamped);
      obj.box.y_min = clamp_warn(parse_double(node.get<std::string>("bndbox.ymin"), "ymin"), 0,
                                 img.height, clamped);
      obj.box.x_max = clamp_warn(parse_double(node.get<std::string>("bndbox.xmax"), "xmax"), 0,
                                 img.width, clamped);
      obj.box.y_max = clamp_warn(parse_double(node.get<std::string>("bndbox.ymax"), "ymax"), 0,
                                 img.height, clamped);
      if (clamped) warnings.push_back(path + ": box clamped to image bounds");
      if (!obj.box.valid()) throw DataError("degenerate box in " + path);
      img.objects.push_back(std::move(obj));
    }
  } catch (const boost::property_tree::ptree_error& e) {
    throw DataError("bad VOC structure in " + path + ": " + e.what());
  }
  return img;
}

VocLoadResult load_voc(const std::string& dirpath) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dirpath)) throw DataError("not a directory: " + dirpath);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dirpath)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xml")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  VocLoadResult result;
  for (const auto& f : files) result.images.push_back(load_voc_file(f, result.warnings));
  return result;
}

void save_voc(const AnnotatedImage& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write VOC file: " + path);
  out << "<annotation>\n";
  out << "  <filename>" << xml_escape(image.path) << "</filename>\n";
  out << "  <size>\n    <width>" << image.width << "</width>\n    <height>" << image.height
      << "</height>\n    <depth>1</depth>\n  </size>\n";
  for (const auto& obj : image.objects) {
    out << "  <object>\n    <name>" << xml_escape(obj.label) << "</name>\n    <bndbox>\n";
    out << "      <xmin>" << format_double(obj.box.x_min) << "</xmin>\n";
    out << "      <ymin>" << format_double(obj.box.y_min) << "</ymin>\n";
    out << "      <xmax>" << format_double(obj.box.x_max) << "</xmax>\n";
    out << "      <ymax>" << format_double(obj.box.y_max) << "</ymax>\n";
    out << "    </bndbox>\n  </object>\n";
  }
  out << "</annotation>\n";
}

AnnotatedImage load_annotation_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open annotation: " + path);
  nlohmann::json j;
  try {
    in >> j;
    AnnotatedImage img;
    img.image_id = j.at("image_id").get<std::string>();
    img.path = j.value("path", "");
    img.width = j.at("width").get<int>();
    img.height = j.at("height").get<int>();
    img.split = j.value("split", "");
    img.stratum = j.value("stratum", "");
    for (const auto& o : j.at("objects")) {
      LabeledBox obj;
      obj.label = o.at("label").get<std::string>();
      obj.box = {o.at("x_min").get<double>(), o.at("y_min").get<double>(),
                 o.at("x_max").get<double>(), o.at("y_max").get<double>()};
      if (!obj.box.valid()) throw DataError("degenerate box in " + path);
      img.objects.push_back(std::move(obj));
    }
    return img;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed annotation JSON " + path + ": " + e.what());
  }
}

void save_annotation_json(const AnnotatedImage& image, const std::string& path) {
  nlohmann::ordered_json j;
  j["image_id"] = image.image_id;
  j["path"] = image.path;
  j["width"] = image.width;
  j["height"] = image.height;
  if (!image.split.empty()) j["split"] = image.split;
  if (!image.stratum.empty()) j["stratum"] = image.stratum;
  j["objects"] = nlohmann::ordered_json::array();
  for (const auto& obj : image.objects) {
    nlohmann::ordered_json e;
    e["label"] = obj.label;
    e["x_min"] = obj.box.x_min;
    e["y_min"] = obj.box.y_min;
    e["x_max"] = obj.box.x_max;
    e["y_max"] = obj.box.y_max;
    j["objects"].push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write annotation: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace plateflow
