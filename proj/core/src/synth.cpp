#include "plateflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "plateflow/errors.hpp"
#include "plateflow/labels.hpp"
#include "plateflow/rng.hpp"

namespace plateflow {

namespace {

constexpr int kGlyphCols = 5;
constexpr int kGlyphRows = 7;
constexpr int kScale = 4;                     // pixels per glyph cell
constexpr int kCharW = kGlyphCols * kScale;   // 20
constexpr int kCharH = kGlyphRows * kScale;   // 28
constexpr int kCharGap = 4;                   // inside a digit group
constexpr int kSectionGap = 18;               // between groups, separator drawn
constexpr int kPad = 10;                      // plate border padding
constexpr float kInk = 0.08f;
constexpr float kPlateBg = 0.92f;

const std::map<std::string, std::vector<std::string>>& glyph_table() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"0", {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
      {"1", {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
      {"2", {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
      {"3", {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
      {"4", {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
      {"5", {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
      {"6", {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
      {"7", {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
      {"8", {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
      {"9", {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
      {"a", {".....", ".....", ".###.", "....#", ".####", "#...#", ".####"}},
      {"b", {"#....", "#....", "####.", "#...#", "#...#", "#...#", "####."}},
      {"d", {"....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"}},
      {"h", {"#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#"}},
      {"j", {"...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."}},
      {"m", {".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"}},
      {"p", {".....", ".....", "####.", "#...#", "####.", "#....", "#...."}},
      {"waw", {".....", ".##..", "#..#.", ".##..", "...#.", "..#..", "##..."}},
      {"ww", {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"}},
  };
  return table;
}

struct GlyphPlacement {
  std::string label;
  int x = 0;  // slot origin in plate coordinates
  int y = 0;
};

// Tight ink bounds of the mask, in cell units.
void ink_bounds(const std::vector<std::string>& mask, int& c0, int& r0, int& c1, int& r1) {
  c0 = kGlyphCols;
  r0 = kGlyphRows;
  c1 = -1;
  r1 = -1;
  for (int r = 0; r < kGlyphRows; ++r) {
    for (int c = 0; c < kGlyphCols; ++c) {
      if (mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] == '#') {
        c0 = std::min(c0, c);
        r0 = std::min(r0, r);
        c1 = std::max(c1, c);
        r1 = std::max(r1, r);
      }
    }
  }
}

void draw_glyph(Image& canvas, const std::vector<std::string>& mask, int x, int y) {
  for (int r = 0; r < kGlyphRows; ++r) {
    for (int c = 0; c < kGlyphCols; ++c) {
      if (mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] != '#') continue;
      for (int dy = 0; dy < kScale; ++dy)
        for (int dx = 0; dx < kScale; ++dx)
          canvas.at(y + r * kScale + dy, x + c * kScale + dx) = kInk;
    }
  }
}

void draw_separator(Image& canvas, int x) {
  for (int r = kPad / 2; r < canvas.height() - kPad / 2; ++r) {
    canvas.at(r, x) = kInk;
    canvas.at(r, x + 1) = kInk;
  }
}

void draw_frame(Image& canvas) {
  for (int c = 0; c < canvas.width(); ++c) {
    canvas.at(0, c) = kInk;
    canvas.at(1, c) = kInk;
    canvas.at(canvas.height() - 1, c) = kInk;
    canvas.at(canvas.height() - 2, c) = kInk;
  }
  for (int r = 0; r < canvas.height(); ++r) {
    canvas.at(r, 0) = kInk;
    canvas.at(r, 1) = kInk;
    canvas.at(r, canvas.width() - 1) = kInk;
    canvas.at(r, canvas.width() - 2) = kInk;
  }
}

std::vector<std::string> digit_labels(int value) {
  std::vector<std::string> out;
  for (char c : std::to_string(value)) out.emplace_back(1, c);
  return out;
}

}  // namespace

const std::vector<std::string>& glyph_mask(const std::string& label) {
  const auto it = glyph_table().find(label);
  if (it == glyph_table().end()) throw DataError("no glyph for label '" + label + "'");
  return it->second;
}

SyntheticPlate synth_plate(const SyntheticPlateSpec& spec, std::uint64_t seed) {
  if (spec.vehicle_number < 0 || spec.vehicle_number > 99999)
    throw ConfigError("vehicle_number out of range 0..99999");
  if (spec.province < 0 || spec.province > 99) throw ConfigError("province out of range 0..99");
  if (spec.layout != PlateLayout::kNumericOnly && !is_letter_class(spec.series_char))
    throw ConfigError("series_char must be a letter class, got '" + spec.series_char + "'");
  if (spec.noise_level < 0.0) throw ConfigError("noise_level must be >= 0");
  if (std::abs(spec.rotation_deg) > 30.0) throw ConfigError("rotation bounded by +-30 degrees");

  const auto vehicle = digit_labels(spec.vehicle_number);
  const auto province = digit_labels(spec.province);

  // Slot geometry: groups of glyphs separated by section gaps, one or two rows.
  std::vector<std::vector<std::string>> row_groups_top;
  std::vector<std::vector<std::string>> row_groups_bottom;  // numeric two-row only
  PlateString truth;
  truth.layout = spec.layout;

  switch (spec.layout) {
    case PlateLayout::kNew:
      row_groups_top = {vehicle, {spec.series_char}, province};
      truth.vehicle_labels = vehicle;
      truth.series_char = spec.series_char;
      truth.province_labels = province;
      break;
    case PlateLayout::kOld:
      row_groups_top = {{spec.series_char}, province, vehicle};
      truth.vehicle_labels = vehicle;
      truth.series_char = spec.series_char;
      truth.province_labels = province;
      break;
    case PlateLayout::kNumericOnly: {
      truth.vehicle_labels = vehicle;
      if (vehicle.size() >= 4) {
        const std::size_t top_n = (vehicle.size() + 1) / 2;
        row_groups_top = {{vehicle.begin(), vehicle.begin() + static_cast<std::ptrdiff_t>(top_n)}};
        row_groups_bottom = {{vehicle.begin() + static_cast<std::ptrdiff_t>(top_n), vehicle.end()}};
      } else {
        row_groups_top = {vehicle};
      }
      break;
    }
  }

  auto row_width = [](const std::vector<std::vector<std::string>>& groups) {
    int w = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g > 0) w += kSectionGap;
      w += static_cast<int>(groups[g].size()) * kCharW +
           (static_cast<int>(groups[g].size()) - 1) * kCharGap;
    }
    return w;
  };

  const bool two_rows = !row_groups_bottom.empty();
  const int content_w = std::max(row_width(row_groups_top),
                                 two_rows ? row_width(row_groups_bottom) : 0);
  const int row_gap_px = 10;
  const int content_h = two_rows ? 2 * kCharH + row_gap_px : kCharH;
  const int plate_w = content_w + 2 * kPad;
  const int plate_h = content_h + 2 * kPad;

  Image plate(plate_w, plate_h, kPlateBg);
  draw_frame(plate);

  std::vector<GlyphPlacement> placements;
  auto layout_row = [&](const std::vector<std::vector<std::string>>& groups, int y) {
    int x = kPad + (content_w - row_width(groups)) / 2;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (g > 0) {
        draw_separator(plate, x - kSectionGap / 2 - 1);
      }
      for (const auto& label : groups[g]) {
        draw_glyph(plate, glyph_mask(label), x, y);
        placements.push_back({label, x, y});
        x += kCharW + kCharGap;
      }
      x += kSectionGap - kCharGap;
    }
  };
  layout_row(row_groups_top, kPad);
  if (two_rows) layout_row(row_groups_bottom, kPad + kCharH + row_gap_px);

  // Scene: gradient background with a few light distractor rectangles.
  Rng rng(seed);
  const int scene_w = plate_w * 2 + 80;
  const int scene_h = plate_h * 3 + 60;
  Image scene(scene_w, scene_h);
  const float g0 = static_cast<float>(rng.uniform(0.35, 0.55));
  const float g1 = static_cast<float>(rng.uniform(0.55, 0.75));
  for (int r = 0; r < scene_h; ++r) {
    const float t = static_cast<float>(r) / static_cast<float>(scene_h - 1);
    const float v = g0 + (g1 - g0) * t;
    for (int c = 0; c < scene_w; ++c) scene.at(r, c) = v;
  }
  const int n_rects = static_cast<int>(rng.uniform_int(2, 4));
  for (int i = 0; i < n_rects; ++i) {
    const int rw = static_cast<int>(rng.uniform_int(20, 60));
    const int rh = static_cast<int>(rng.uniform_int(10, 30));
    const int rx = static_cast<int>(rng.uniform_int(0, scene_w - rw - 1));
    const int ry = static_cast<int>(rng.uniform_int(0, scene_h - rh - 1));
    const float shade = static_cast<float>(rng.uniform(0.25, 0.8));
    for (int r = ry; r < ry + rh; ++r)
      for (int c = rx; c < rx + rw; ++c) scene.at(r, c) = shade;
  }

  const int px = static_cast<int>(rng.uniform_int(20, scene_w - plate_w - 20));
  const int py = static_cast<int>(rng.uniform_int(20, scene_h - plate_h - 20));

  Image stamped = plate;
  if (spec.rotation_deg != 0.0) stamped = rotate_about_center(plate, spec.rotation_deg);
  for (int r = 0; r < plate_h; ++r)
    for (int c = 0; c < plate_w; ++c) scene.at(py + r, px + c) = stamped.at(r, c);

  if (spec.noise_level > 0.0) {
    for (auto& p : scene.pixels())
      p = std::clamp(p + static_cast<float>(rng.normal() * spec.noise_level), 0.0f, 1.0f);
  }

  // Ground truth: tight ink bounds per glyph, mapped into scene coordinates
  // (axis-aligned bounds of the rotated rectangle when rotation is on).
  SyntheticPlate out;
  out.plate_box = {static_cast<double>(px), static_cast<double>(py),
                   static_cast<double>(px + plate_w), static_cast<double>(py + plate_h)};
  out.annotation.image_id = "synthetic";
  out.annotation.width = scene_w;
  out.annotation.height = scene_h;
  out.annotation.objects.push_back({"plate", out.plate_box});

  const double ccx = (plate_w - 1) / 2.0;
  const double ccy = (plate_h - 1) / 2.0;
  const double rad = -spec.rotation_deg * M_PI / 180.0;
  const double ca = std::cos(rad);
  const double sa = std::sin(rad);
  for (const auto& g : placements) {
    int c0, r0, c1, r1;
    ink_bounds(glyph_mask(g.label), c0, r0, c1, r1);
    const double bx0 = g.x + c0 * kScale;
    const double by0 = g.y + r0 * kScale;
    const double bx1 = g.x + (c1 + 1) * kScale;
    const double by1 = g.y + (r1 + 1) * kScale;
    BoundingBox box;
    if (spec.rotation_deg == 0.0) {
      box = {px + bx0, py + by0, px + bx1, py + by1};
    } else {
      double min_x = 1e30, min_y = 1e30, max_x = -1e30, max_y = -1e30;
      for (const auto& [cx, cy] : {std::pair{bx0, by0}, {bx1, by0}, {bx0, by1}, {bx1, by1}}) {
        const double dx = cx - ccx;
        const double dy = cy - ccy;
        const double rx = ccx + ca * dx - sa * dy;
        const double ry = ccy + sa * dx + ca * dy;
        min_x = std::min(min_x, rx);
        min_y = std::min(min_y, ry);
        max_x = std::max(max_x, rx);
        max_y = std::max(max_y, ry);
      }
      box = {px + min_x, py + min_y, px + max_x, py + max_y};
    }
    out.annotation.objects.push_back({g.label, box});
  }

  out.scene = std::move(scene);
  out.truth = std::move(truth);
  return out;
}

}  // namespace plateflow
