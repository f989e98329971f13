#include "glyphnet/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "glyphnet/error.hpp"

namespace glyphnet {

std::size_t LayoutConfig::columns(const GlyphFont& font) const {
  if (width < 2 * margin) return 0;
  return (width - 2 * margin) / font.cell_width();
}

std::size_t LayoutConfig::rows(const GlyphFont& font) const {
  if (height < 2 * margin) return 0;
  return (height - 2 * margin + line_spacing) / (font.cell_height() + line_spacing);
}

void LayoutConfig::validate(const GlyphFont& font) const {
  if (width == 0 || height == 0) throw ConfigError("layout: page dimensions must be positive");
  if (2 * margin + font.cell_height() > height) {
    throw ConfigError("layout: margins leave no room for a text row (height " + std::to_string(height) + ")");
  }
  if (2 * margin + font.cell_width() > width) {
    throw ConfigError("layout: margins leave no room for a glyph column (width " + std::to_string(width) + ")");
  }
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
    throw ConfigError("layout: binarize threshold must lie in (0, 1)");
  }
}

bool PageImage::is_binary() const {
  return std::all_of(pixels.begin(), pixels.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

std::size_t PageImage::count(float value) const {
  return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), value));
}

namespace {

void append_paragraph(std::vector<std::u32string>& lines, std::u32string_view para, std::size_t columns,
                      WrapMode wrap) {
  if (columns == 0) throw ConfigError("layout has zero columns");
  if (wrap == WrapMode::character || para.empty()) {
    if (para.empty()) lines.emplace_back();
    for (std::size_t i = 0; i < para.size(); i += columns) lines.emplace_back(para.substr(i, columns));
    return;
  }
  std::u32string current;
  bool started = false;
  std::size_t pos = 0;
  while (pos <= para.size()) {
    const std::size_t end = std::min(para.find(U' ', pos), para.size());
    std::u32string_view token = para.substr(pos, end - pos);
    pos = end + 1;
    const std::size_t need = started ? current.size() + 1 + token.size() : token.size();
    if (need <= columns) {
      if (started) current.push_back(U' ');
      current.append(token);
      started = true;
      continue;
    }
    if (started) {
      lines.push_back(std::move(current));
      current.clear();
    }
    while (token.size() > columns) {
      lines.emplace_back(token.substr(0, columns));
      token.remove_prefix(columns);
    }
    current.assign(token);
    started = true;
  }
  lines.push_back(std::move(current));
}

}  // namespace

std::vector<std::u32string> layout_lines(std::u32string_view text, std::size_t columns, WrapMode wrap) {
  std::u32string expanded;
  expanded.reserve(text.size());
  for (const char32_t ch : text) {
    if (ch == U'\t') {
      expanded.append(4, U' ');
    } else {
      expanded.push_back(ch);
    }
  }
  std::vector<std::u32string> lines;
  std::u32string_view rest = expanded;
  while (true) {
    const std::size_t nl = rest.find(U'\n');
    append_paragraph(lines, rest.substr(0, nl), columns, wrap);
    if (nl == std::u32string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  return lines;
}

void blit_line(PageImage& image, std::u32string_view line, std::size_t x0, std::size_t y0, const GlyphFont& font,
               float ink) {
  const std::size_t cw = font.cell_width(), ch = font.cell_height();
  for (std::size_t i = 0; i < line.size(); ++i) {
    const auto& bits = font.glyph(line[i]);
    const std::size_t gx = x0 + i * cw;
    if (gx >= image.width) break;
    for (std::size_t y = 0; y < ch && y0 + y < image.height; ++y) {
      for (std::size_t x = 0; x < cw && gx + x < image.width; ++x) {
        if (bits[y * cw + x]) image.at(gx + x, y0 + y) = ink;
      }
    }
  }
}

PageImage render_text(std::string_view text, const GlyphFont& font, const LayoutConfig& layout) {
  layout.validate(font);
  PageImage page(layout.width, layout.height, layout.background());
  const auto lines = layout_lines(decode_utf8(text), layout.columns(font), layout.wrap);
  const std::size_t rows = layout.rows(font);
  if (lines.size() > rows && layout.overflow == OverflowMode::error) {
    throw OverflowError("text needs " + std::to_string(lines.size()) + " rows, page holds " + std::to_string(rows));
  }
  const std::size_t pitch = font.cell_height() + layout.line_spacing;
  for (std::size_t r = 0; r < std::min(rows, lines.size()); ++r) {
    blit_line(page, lines[r], layout.margin, layout.margin + r * pitch, font, layout.ink());
  }
  return page;
}

PageImage binarize(const PageImage& image, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("binarize threshold must lie in (0, 1)");
  PageImage out = image;
  for (auto& v : out.pixels) v = v >= threshold ? 1.0f : 0.0f;
  out.background = image.background >= threshold ? 1.0f : 0.0f;
  return out;
}

Tensor image_to_tensor(const PageImage& image) {
  return Tensor(Shape{1, 1, image.height, image.width}, image.pixels);
}

Tensor images_to_tensor(const std::vector<PageImage>& images) {
  if (images.empty()) return Tensor(Shape{0, 1, 0, 0});
  const std::size_t w = images.front().width, h = images.front().height;
  Tensor batch(Shape{images.size(), 1, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].width != w || images[n].height != h) throw ShapeError("batch pages differ in size");
    std::copy(images[n].pixels.begin(), images[n].pixels.end(), batch.sample(n).begin());
  }
  return batch;
}

PageImage tensor_to_image(const Tensor& tensor, std::size_t n, float background) {
  const Shape& s = tensor.shape();
  if (s.c != 1 || n >= s.n) throw ShapeError("tensor_to_image needs a single-channel tensor " + s.str());
  PageImage image(s.w, s.h, background);
  const auto src = tensor.sample(n);
  std::copy(src.begin(), src.end(), image.pixels.begin());
  return image;
}

std::string encode_pgm(const PageImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (const float v : image.pixels) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - clamped)))));
  }
  return out;
}

void write_pgm(const PageImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write image '" + path.string() + "'");
  const std::string bytes = encode_pgm(image);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing image '" + path.string() + "'");
}

PageImage decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (next_token() != "P5") throw FormatError("not a binary PGM (P5) image");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token());
    h = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::exception&) {
    throw FormatError("malformed PGM header");
  }
  if (maxval == 0 || maxval > 255) throw FormatError("only 8-bit PGM images are supported");
  ++pos;  // single whitespace byte after maxval
  if (bytes.size() < pos + w * h) throw FormatError("PGM pixel data truncated");
  PageImage image(w, h, 0.0f);
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto g = static_cast<unsigned char>(bytes[pos + i]);
    image.pixels[i] = static_cast<float>(1.0 - static_cast<double>(g) / static_cast<double>(maxval));
  }
  return image;
}

PageImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

PageImage make_grid(const std::vector<PageImage>& pages, std::size_t columns) {
  if (pages.empty() || columns == 0) return {};
  const std::size_t w = pages.front().width, h = pages.front().height;
  const float bg = pages.front().background;
  const float ink = 1.0f - bg;
  const std::size_t cols = std::min(columns, pages.size());
  const std::size_t rows = (pages.size() + cols - 1) / cols;
  PageImage grid(cols * (w + 1) - 1, rows * (h + 1) - 1, ink);
  grid.background = bg;
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (pages[i].width != w || pages[i].height != h) throw ShapeError("grid pages differ in size");
    const std::size_t ox = (i % cols) * (w + 1), oy = (i / cols) * (h + 1);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) grid.at(ox + x, oy + y) = pages[i].at(x, y);
    }
  }
  return grid;
}

}  // namespace glyphnet
