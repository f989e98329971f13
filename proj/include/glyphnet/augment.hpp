#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "glyphnet/font.hpp"
#include "glyphnet/raster.hpp"
#include "glyphnet/rng.hpp"

namespace glyphnet {

struct AugmentConfig {
  double width_shift_frac = 0.2;
  double height_shift_frac = 0.2;
  double max_rotation_deg = 15.0;
  double hflip_prob = 0.5;
  double charflip_prob = 0.0;
  /// Each string is a set of mutually substitutable characters (UTF-8).
  std::vector<std::string> charflip_classes{"0123456789"};
  std::uint64_t rng_seed = 1;

  /// Throws ConfigError for out-of-range knobs or a class with < 2 members.
  void validate() const;
  /// Every knob off: augment_sample reduces to render_text.
  static AugmentConfig disabled();
};

/// Translates content by (dx, dy); vacated pixels take the background value.
/// Throws ConfigError when |dx| > width or |dy| > height.
PageImage shift_image(const PageImage& image, long dx, long dy);

/// Rotates about the image center with nearest-neighbour sampling; pixels
/// that map outside the source take the background value. Positive angles
/// turn content counter-clockwise as displayed. Throws ConfigError for |angle| > 90.
PageImage rotate_image(const PageImage& image, double angle_deg);

PageImage hflip_image(const PageImage& image);

/// Replaces each character that belongs to a flip class, with probability
/// charflip_prob, by a uniformly chosen different member of its class.
std::string char_flip(std::string_view text, const AugmentConfig& config, Rng& rng);

/// The random draws made by one augment_sample call.
struct AugmentDraw {
  std::string text;
  long dx = 0;
  long dy = 0;
  double angle_deg = 0.0;
  bool flipped = false;
};

/// Largest shift magnitude allowed for a dimension: floor(frac * extent).
long max_shift(double frac, std::size_t extent);

/// char_flip -> render_text -> shift -> rotate -> hflip -> binarize.
PageImage augment_sample(std::string_view text, const GlyphFont& font, const LayoutConfig& layout,
                         const AugmentConfig& config, Rng& rng, AugmentDraw* draw = nullptr);

/// The geometric half of augment_sample, for pages that are already rendered.
PageImage augment_page(const PageImage& page, const LayoutConfig& layout, const AugmentConfig& config, Rng& rng,
                       AugmentDraw* draw = nullptr);

}  // namespace glyphnet
