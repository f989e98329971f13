#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "glyphnet/font.hpp"
#include "glyphnet/tensor.hpp"

namespace glyphnet {

enum class WrapMode { word, character };
enum class OverflowMode { truncate, error };
/// dark_on_light: ink is 1.0 and background 0.0 in tensor space.
/// light_on_dark: ink is 0.0 and background 1.0.
enum class Polarity { dark_on_light, light_on_dark };

struct LayoutConfig {
  std::size_t width = 128;
  std::size_t height = 128;
  std::size_t margin = 4;
  std::size_t line_spacing = 0;
  WrapMode wrap = WrapMode::word;
  OverflowMode overflow = OverflowMode::truncate;
  Polarity polarity = Polarity::dark_on_light;
  double binarize_threshold = 0.5;

  float ink() const noexcept { return polarity == Polarity::dark_on_light ? 1.0f : 0.0f; }
  float background() const noexcept { return polarity == Polarity::dark_on_light ? 0.0f : 1.0f; }
  /// Glyph cells per text row.
  std::size_t columns(const GlyphFont& font) const;
  /// Text rows per page.
  std::size_t rows(const GlyphFont& font) const;
  /// Throws ConfigError for a degenerate layout.
  void validate(const GlyphFont& font) const;
};

/// Single-channel page, row-major. After binarization every pixel is 0 or 1.
struct PageImage {
  std::size_t width = 0;
  std::size_t height = 0;
  float background = 0.0f;
  std::vector<float> pixels;

  PageImage() = default;
  PageImage(std::size_t w, std::size_t h, float fill)
      : width(w), height(h), background(fill), pixels(w * h, fill) {}

  float& at(std::size_t x, std::size_t y) noexcept { return pixels[y * width + x]; }
  float at(std::size_t x, std::size_t y) const noexcept { return pixels[y * width + x]; }
  bool is_binary() const;
  std::size_t count(float value) const;
  bool operator==(const PageImage&) const = default;
};

/// Maps text to glyph rows: '\n' forces a break, '\t' becomes four spaces,
/// other control characters are kept and later drawn with the fallback glyph.
/// Rows are not limited in number; callers decide what to keep.
std::vector<std::u32string> layout_lines(std::u32string_view text, std::size_t columns, WrapMode wrap);

/// Draws one row of glyphs with its top-left cell corner at (x0, y0),
/// clipping at the image border.
void blit_line(PageImage& image, std::u32string_view line, std::size_t x0, std::size_t y0, const GlyphFont& font,
               float ink);

/// Renders UTF-8 text onto a blank page. Pure and deterministic.
/// Throws OverflowError when the text needs more rows than the page has and
/// the layout asks for an error; otherwise extra rows are dropped.
PageImage render_text(std::string_view text, const GlyphFont& font, const LayoutConfig& layout);

/// pixel >= threshold -> 1, else 0. Throws ConfigError unless 0 < threshold < 1.
PageImage binarize(const PageImage& image, double threshold);

/// (1, 1, H, W) tensor with the pixel values copied verbatim.
Tensor image_to_tensor(const PageImage& image);
/// Stacks equally sized pages into an (N, 1, H, W) batch.
Tensor images_to_tensor(const std::vector<PageImage>& images);
/// Inverse of image_to_tensor for batch entry `n`.
PageImage tensor_to_image(const Tensor& tensor, std::size_t n = 0, float background = 0.0f);

/// Binary 8-bit PGM (P5). Value v is written as gray round(255 * (1 - v)),
/// so dark_on_light pages show dark text on white.
void write_pgm(const PageImage& image, const std::filesystem::path& path);
std::string encode_pgm(const PageImage& image);
PageImage read_pgm(const std::filesystem::path& path);
PageImage decode_pgm(std::string_view bytes);

/// Tiles pages left-to-right, top-to-bottom with a one-pixel ink gutter.
PageImage make_grid(const std::vector<PageImage>& pages, std::size_t columns);

}  // namespace glyphnet
