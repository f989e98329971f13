#include "glyphnet/font.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "glyphnet/error.hpp"

namespace glyphnet {

GlyphFont::GlyphFont(std::size_t cell_width, std::size_t cell_height)
    : cell_width_(cell_width), cell_height_(cell_height), fallback_(cell_width * cell_height, 0) {
  if (cell_width == 0 || cell_height == 0) throw ConfigError("font cell must be non-empty");
  for (std::size_t y = 0; y < cell_height; ++y) {
    for (std::size_t x = 0; x < cell_width; ++x) {
      const bool edge = y == 1 || y + 2 == cell_height || x == 0 || x + 2 == cell_width;
      const bool inside = y >= 1 && y + 2 <= cell_height && x + 2 <= cell_width;
      fallback_[y * cell_width + x] = (edge && inside) ? 1 : 0;
    }
  }
}

void GlyphFont::set_glyph(char32_t code_point, std::vector<std::uint8_t> bits) {
  if (bits.size() != cell_width_ * cell_height_) {
    throw ConfigError("glyph U+" + std::to_string(static_cast<std::uint32_t>(code_point)) + " has " +
                      std::to_string(bits.size()) + " bits, cell needs " +
                      std::to_string(cell_width_ * cell_height_));
  }
  for (auto& b : bits) b = b ? 1 : 0;
  glyphs_[code_point] = std::move(bits);
}

const std::vector<std::uint8_t>& GlyphFont::glyph(char32_t code_point) const {
  const auto it = glyphs_.find(code_point);
  return it == glyphs_.end() ? fallback_ : it->second;
}

namespace {

std::string trim_right(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

}  // namespace

GlyphFont parse_font(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0, height = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_right(line);
    if (line.empty()) continue;
    std::istringstream hdr(line);
    std::string keyword;
    hdr >> keyword;
    if (keyword != "font" || !(hdr >> width >> height) || width == 0 || height == 0) {
      throw ParseError("expected header 'font <cell_width> <cell_height>'", line_no);
    }
    std::string extra;
    if (hdr >> extra) throw ParseError("trailing text after font header", line_no);
    have_header = true;
    break;
  }
  if (!have_header) throw ParseError("missing font header", line_no);

  GlyphFont font(width, height);
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_right(line);
    if (line.empty()) continue;
    unsigned code = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "glyph U+%x%c", &code, &tail) != 1) {
      throw ParseError("expected 'glyph U+XXXX', got '" + line + "'", line_no);
    }
    if (code > 0x10FFFF) throw ParseError("code point out of Unicode range", line_no);
    std::vector<std::uint8_t> bits;
    bits.reserve(width * height);
    for (std::size_t row = 0; row < height; ++row) {
      if (!std::getline(in, line)) throw ParseError("glyph ends early: expected " + std::to_string(height) + " rows", line_no);
      ++line_no;
      line = trim_right(line);
      if (line.size() != width) {
        throw ParseError("glyph row has " + std::to_string(line.size()) + " pixels, cell width is " +
                             std::to_string(width),
                         line_no);
      }
      for (const char ch : line) {
        if (ch != '.' && ch != '#') throw ParseError("glyph rows may contain only '.' and '#'", line_no);
        bits.push_back(ch == '#' ? 1 : 0);
      }
    }
    font.set_glyph(static_cast<char32_t>(code), std::move(bits));
  }
  return font;
}

GlyphFont load_font(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open font file '" + path.string() + "'", 0);
  return parse_font(in);
}

GlyphFont load_font_or_embedded(const std::filesystem::path& path) {
  return path.empty() ? GlyphFont::embedded() : load_font(path);
}

std::string serialize_font(const GlyphFont& font) {
  std::ostringstream out;
  out << "font " << font.cell_width() << ' ' << font.cell_height() << '\n';
  char code[16];
  for (const auto& [cp, bits] : font.glyphs()) {
    std::snprintf(code, sizeof code, "%04X", static_cast<unsigned>(cp));
    out << "glyph U+" << code << '\n';
    for (std::size_t y = 0; y < font.cell_height(); ++y) {
      for (std::size_t x = 0; x < font.cell_width(); ++x) out << (bits[y * font.cell_width() + x] ? '#' : '.');
      out << '\n';
    }
  }
  return out.str();
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len != 0 && i + len <= text.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(U'�');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  for (const char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

}  // namespace glyphnet
