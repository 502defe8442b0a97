#pragma once

// Hard-edged software rasterizer for the synthetic stimuli: filled shapes on
// a black canvas. Pixel membership is decided at pixel centers so the output
// is a pure function of the scene description.

#include <apvqa/error.hpp>
#include <apvqa/geometry.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace apvqa {

struct ObjectSpec {
  Shape shape = Shape::Square;
  ColorName color = ColorName::Red;
  SizeKind size = SizeKind::Regular;
  Cell cell{};
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct StimulusSpec {
  ObjectSpec target;
  std::vector<ObjectSpec> distractors;
  ImageGeometry geom = ImageGeometry::synthetic();
  friend bool operator==(const StimulusSpec&, const StimulusSpec&) = default;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  Rgb at(int x, int y) const {
    const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[o] = c.r;
    rgb[o + 1] = c.g;
    rgb[o + 2] = c.b;
  }
  friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

struct Vec2 {
  double x, y;
};

// Even-odd rule.
inline bool inside_polygon(std::span<const Vec2> poly, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double x_cross = (b.x - a.x) * (py - a.y) / (b.y - a.y) + a.x;
      if (px < x_cross) inside = !inside;
    }
  }
  return inside;
}

inline std::array<Vec2, 10> star_polygon(double outer_radius) {
  constexpr double kInnerRatio = 0.5;
  std::array<Vec2, 10> pts{};
  for (int k = 0; k < 10; ++k) {
    const double r = (k % 2 == 0) ? outer_radius : outer_radius * kInnerRatio;
    // Image y grows downwards; angle -90 degrees points up.
    const double a = -std::numbers::pi / 2 + k * std::numbers::pi / 5;
    pts[k] = {r * std::cos(a), r * std::sin(a)};
  }
  return pts;
}

// Membership of a pixel center at offset (dx, dy) from the object center.
inline bool shape_contains(Shape kind, double side, double dx, double dy,
                           std::span<const Vec2> star) {
  const double h = side / 2.0;
  if (std::abs(dx) > h || std::abs(dy) > h) return false;
  switch (kind) {
    case Shape::Square:
      return true;
    case Shape::Circle:
      return dx * dx + dy * dy <= h * h;
    case Shape::Triangle:
      // Apex at top-center, base on the bottom edge of the bounding square.
      return std::abs(dx) <= h * (dy + h) / side;
    case Shape::Star:
      return inside_polygon(star, dx, dy);
    case Shape::Plus: {
      const double bar = side / 3.0 / 2.0;
      return std::abs(dx) <= bar || std::abs(dy) <= bar;
    }
  }
  return false;
}

}  // namespace detail

// Draws `kind` filled with `color` inside a side x side pixel block centered at
// `center`. For odd sides the block extends one pixel further left/up.
inline void rasterize_shape(Shape kind, int side, PixelPoint center, ColorName color,
                            Image& target) {
  if (side <= 0) throw InputError("shape side must be positive");
  const int left = center.x - side / 2;
  const int top = center.y - side / 2;
  if (left < 0 || top < 0 || left + side > target.width || top + side > target.height) {
    throw InputError("shape of side " + std::to_string(side) + " at (" +
                     std::to_string(center.x) + "," + std::to_string(center.y) +
                     ") exceeds image bounds");
  }
  const double cx = left + side / 2.0;
  const double cy = top + side / 2.0;
  const auto star = detail::star_polygon(side / 2.0);
  const Rgb rgb = rgb_of(color);
  for (int y = top; y < top + side; ++y) {
    for (int x = left; x < left + side; ++x) {
      if (detail::shape_contains(kind, side, x + 0.5 - cx, y + 0.5 - cy, star)) {
        target.set(x, y, rgb);
      }
    }
  }
}

inline Image render_scene(const StimulusSpec& spec) {
  std::vector<const ObjectSpec*> objects{&spec.target};
  for (const auto& d : spec.distractors) objects.push_back(&d);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (!is_valid(objects[i]->cell)) throw InputError("object cell out of range");
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (objects[i]->cell == objects[j]->cell) {
        throw InputError("two objects share cell (" + std::to_string(objects[i]->cell.row) +
                         "," + std::to_string(objects[i]->cell.col) + ")");
      }
    }
  }
  Image img(spec.geom.width, spec.geom.height);
  for (const ObjectSpec* o : objects) {
    rasterize_shape(o->shape, side_px(o->size), cell_center(o->cell, spec.geom), o->color, img);
  }
  return img;
}

}  // namespace apvqa
