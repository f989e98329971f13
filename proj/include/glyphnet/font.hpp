#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace glyphnet {

/// Monospace bitmap font. Every glyph is a cell_width x cell_height mask
/// stored row-major, one byte (0/1) per pixel. Immutable once built and
/// safe to share across threads.
class GlyphFont {
 public:
  /// Empty font whose fallback is a hollow box filling the cell.
  GlyphFont(std::size_t cell_width, std::size_t cell_height);

  std::size_t cell_width() const noexcept { return cell_width_; }
  std::size_t cell_height() const noexcept { return cell_height_; }

  /// Throws ConfigError when bits.size() != cell_width * cell_height.
  void set_glyph(char32_t code_point, std::vector<std::uint8_t> bits);

  bool contains(char32_t code_point) const { return glyphs_.count(code_point) != 0; }
  /// The mask for `code_point`, or the fallback mask when unmapped.
  const std::vector<std::uint8_t>& glyph(char32_t code_point) const;
  const std::vector<std::uint8_t>& fallback() const noexcept { return fallback_; }
  std::size_t glyph_count() const noexcept { return glyphs_.size(); }
  const std::map<char32_t, std::vector<std::uint8_t>>& glyphs() const noexcept { return glyphs_; }

  /// Built-in 8x16 font covering printable ASCII 0x20..0x7E.
  static const GlyphFont& embedded();

 private:
  std::size_t cell_width_;
  std::size_t cell_height_;
  std::map<char32_t, std::vector<std::uint8_t>> glyphs_;
  std::vector<std::uint8_t> fallback_;
};

// Plain-text font format:
//
//   font <cell_width> <cell_height>
//   glyph U+XXXX
//   <cell_height rows of cell_width '.'/'#' characters>
//   glyph U+YYYY
//   ...
//
// Blank lines between glyph blocks are ignored.

/// Throws ParseError carrying the offending line number.
GlyphFont parse_font(std::istream& in);
GlyphFont load_font(const std::filesystem::path& path);
/// The embedded font when `path` is empty.
GlyphFont load_font_or_embedded(const std::filesystem::path& path);
std::string serialize_font(const GlyphFont& font);

/// Decodes UTF-8; malformed sequences become U+FFFD.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

}  // namespace glyphnet
