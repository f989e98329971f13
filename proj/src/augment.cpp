#include "glyphnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "glyphnet/error.hpp"

namespace glyphnet {

void AugmentConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v < 1.0)) throw ConfigError(std::string("augment.") + name + " must lie in [0, 1)");
  };
  auto probability = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("augment.") + name + " must lie in [0, 1]");
  };
  fraction(width_shift_frac, "width_shift_frac");
  fraction(height_shift_frac, "height_shift_frac");
  probability(hflip_prob, "hflip_prob");
  probability(charflip_prob, "charflip_prob");
  if (!(max_rotation_deg >= 0.0 && max_rotation_deg < 90.0)) {
    throw ConfigError("augment.max_rotation_deg must lie in [0, 90)");
  }
  for (const auto& cls : charflip_classes) {
    if (decode_utf8(cls).size() < 2) {
      throw ConfigError("augment.charflip_classes: class '" + cls + "' needs at least two members");
    }
  }
}

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig c;
  c.width_shift_frac = 0.0;
  c.height_shift_frac = 0.0;
  c.max_rotation_deg = 0.0;
  c.hflip_prob = 0.0;
  c.charflip_prob = 0.0;
  return c;
}

PageImage shift_image(const PageImage& image, long dx, long dy) {
  const auto w = static_cast<long>(image.width), h = static_cast<long>(image.height);
  if (std::labs(dx) > w || std::labs(dy) > h) throw ConfigError("shift exceeds image extent");
  PageImage out(image.width, image.height, image.background);
  for (long y = 0; y < h; ++y) {
    const long ty = y + dy;
    if (ty < 0 || ty >= h) continue;
    for (long x = 0; x < w; ++x) {
      const long tx = x + dx;
      if (tx < 0 || tx >= w) continue;
      out.at(static_cast<std::size_t>(tx), static_cast<std::size_t>(ty)) =
          image.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
    }
  }
  return out;
}

PageImage rotate_image(const PageImage& image, double angle_deg) {
  if (!(std::abs(angle_deg) <= 90.0)) throw ConfigError("rotation angle must lie in [-90, 90]");
  if (angle_deg == 0.0) return image;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  PageImage out(image.width, image.height, image.background);
  // Inverse map each destination pixel back into the source. With y pointing
  // down, (x, y) -> (c*x + s*y, -s*x + c*y) turns content counter-clockwise.
  for (std::size_t y = 0; y < image.height; ++y) {
    const double ry = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < image.width; ++x) {
      const double rx = static_cast<double>(x) - cx;
      const long sx = std::lround(c * rx + s * ry + cx);
      const long sy = std::lround(-s * rx + c * ry + cy);
      if (sx < 0 || sy < 0 || sx >= static_cast<long>(image.width) || sy >= static_cast<long>(image.height)) continue;
      out.at(x, y) = image.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
    }
  }
  return out;
}

PageImage hflip_image(const PageImage& image) {
  PageImage out = image;
  for (std::size_t y = 0; y < image.height; ++y) {
    auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(y * image.width);
    std::reverse(row, row + static_cast<std::ptrdiff_t>(image.width));
  }
  return out;
}

std::string char_flip(std::string_view text, const AugmentConfig& config, Rng& rng) {
  std::vector<std::u32string> classes;
  for (const auto& cls : config.charflip_classes) {
    classes.push_back(decode_utf8(cls));
    if (classes.back().size() < 2) throw ConfigError("char flip class '" + cls + "' needs at least two members");
  }
  if (config.charflip_prob <= 0.0 || classes.empty()) return std::string(text);
  std::u32string chars = decode_utf8(text);
  std::bernoulli_distribution flip(config.charflip_prob);
  for (auto& ch : chars) {
    const auto cls = std::find_if(classes.begin(), classes.end(),
                                  [ch](const std::u32string& c) { return c.find(ch) != std::u32string::npos; });
    if (cls == classes.end() || !flip(rng)) continue;
    const std::size_t self = cls->find(ch);
    std::uniform_int_distribution<std::size_t> pick(0, cls->size() - 2);
    std::size_t k = pick(rng);
    if (k >= self) ++k;
    ch = (*cls)[k];
  }
  return encode_utf8(chars);
}

long max_shift(double frac, std::size_t extent) {
  return static_cast<long>(std::floor(frac * static_cast<double>(extent)));
}

PageImage augment_page(const PageImage& page, const LayoutConfig& layout, const AugmentConfig& config, Rng& rng,
                       AugmentDraw* draw) {
  config.validate();
  const long mx = max_shift(config.width_shift_frac, page.width);
  const long my = max_shift(config.height_shift_frac, page.height);
  const long dx = std::uniform_int_distribution<long>(-mx, mx)(rng);
  const long dy = std::uniform_int_distribution<long>(-my, my)(rng);
  const double angle = config.max_rotation_deg > 0.0
                           ? std::uniform_real_distribution<double>(-config.max_rotation_deg, config.max_rotation_deg)(rng)
                           : 0.0;
  const bool flipped = config.hflip_prob > 0.0 && std::bernoulli_distribution(config.hflip_prob)(rng);

  PageImage out = shift_image(page, dx, dy);
  out = rotate_image(out, angle);
  if (flipped) out = hflip_image(out);
  out = binarize(out, layout.binarize_threshold);
  if (draw) {
    draw->dx = dx;
    draw->dy = dy;
    draw->angle_deg = angle;
    draw->flipped = flipped;
  }
  return out;
}

PageImage augment_sample(std::string_view text, const GlyphFont& font, const LayoutConfig& layout,
                         const AugmentConfig& config, Rng& rng, AugmentDraw* draw) {
  config.validate();
  std::string flipped_text = char_flip(text, config, rng);
  const PageImage page = render_text(flipped_text, font, layout);
  PageImage out = augment_page(page, layout, config, rng, draw);
  if (draw) draw->text = std::move(flipped_text);
  return out;
}

}  // namespace glyphnet
