// SPDX-License-Identifier: Apache-2.0
#include "doadef/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

namespace doadef::harness {

namespace {

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  buf.push_back(static_cast<unsigned char>(v >> 24));
  buf.push_back(static_cast<unsigned char>(v >> 16));
  buf.push_back(static_cast<unsigned char>(v >> 8));
  buf.push_back(static_cast<unsigned char>(v));
}

void write_chunk(std::ofstream& out, const char type[4],
                 const std::vector<unsigned char>& data) {
  std::vector<unsigned char> head;
  put_u32(head, static_cast<std::uint32_t>(data.size()));
  out.write(reinterpret_cast<const char*>(head.data()), 4);
  out.write(type, 4);
  if (!data.empty())
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
  std::uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<unsigned char> tail;
  put_u32(tail, crc);
  out.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<unsigned char>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw std::invalid_argument("rgb buffer size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  static const unsigned char magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  out.write(reinterpret_cast<const char*>(magic), 8);

  std::vector<unsigned char> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(width));
  put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);

  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter none
    raw.insert(raw.end(), rgb.begin() + static_cast<std::size_t>(y) * width * 3,
               rgb.begin() + static_cast<std::size_t>(y + 1) * width * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<unsigned char> idat(bound);
  if (compress2(idat.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw std::runtime_error("png deflate failed");
  idat.resize(bound);
  write_chunk(out, "IDAT", idat);
  write_chunk(out, "IEND", {});
}

namespace {

struct Canvas {
  int w, h;
  std::vector<unsigned char> px;
  Canvas(int width, int height) : w(width), h(height), px(static_cast<std::size_t>(w) * h * 3, 255) {}
  void set(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
    px[i] = r;
    px[i + 1] = g;
    px[i + 2] = b;
  }
  void line(int x0, int y0, int x1, int y1, unsigned char r, unsigned char g,
            unsigned char b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }
  void thick_point(int x, int y, unsigned char r, unsigned char g, unsigned char b) {
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) set(x + dx, y + dy, r, g, b);
  }
};

// 5x7 glyphs, bit 4 is the leftmost column.
const unsigned char* glyph(char c) {
  static const unsigned char digits[10][7] = {
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}};
  static const unsigned char letters[26][7] = {
      {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
      {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},
      {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
      {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
      {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
      {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11},
      {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
      {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
      {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
      {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
      {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}};
  static const unsigned char minus[7] = {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00};
  static const unsigned char dot[7] = {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C};
  static const unsigned char pct[7] = {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03};
  static const unsigned char blank[7] = {0, 0, 0, 0, 0, 0, 0};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c >= 'A' && c <= 'Z') return letters[c - 'A'];
  if (c >= 'a' && c <= 'z') return letters[c - 'a'];
  if (c == '-') return minus;
  if (c == '.') return dot;
  if (c == '%') return pct;
  return blank;
}

void draw_text(Canvas& canvas, int x, int y, const std::string& text, int scale,
               unsigned char r, unsigned char g, unsigned char b) {
  int cx = x;
  for (char c : text) {
    const unsigned char* rows = glyph(c);
    for (int ry = 0; ry < 7; ++ry)
      for (int rx = 0; rx < 5; ++rx)
        if (rows[ry] & (0x10 >> rx))
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx)
              canvas.set(cx + rx * scale + sx, y + ry * scale + sy, r, g, b);
    cx += 6 * scale;
  }
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Rgb {
  unsigned char r, g, b;
};
const Rgb kPalette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44},
                        {255, 127, 14}, {148, 103, 189}, {140, 86, 75}};

}  // namespace

void line_plot_png(const std::string& path, const std::string& title,
                   const std::vector<std::string>& condition_labels,
                   const std::vector<PlotSeries>& series) {
  const int width = 760, height = 480;
  const int left = 78, right = 160, top = 40, bottom = 56;
  Canvas canvas(width, height);

  double lo = 1e300, hi = -1e300;
  for (const auto& s : series)
    for (double v : s.values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const int x0 = left, x1 = width - right, y0 = height - bottom, y1 = top;
  const int n = static_cast<int>(condition_labels.size());
  auto xpos = [&](int i) {
    if (n <= 1) return (x0 + x1) / 2;
    return x0 + static_cast<int>(std::lround(static_cast<double>(i) * (x1 - x0) / (n - 1)));
  };
  auto ypos = [&](double v) {
    return y0 - static_cast<int>(std::lround((v - lo) / (hi - lo) * (y0 - y1)));
  };

  // Frame, horizontal gridlines and tick labels.
  canvas.line(x0, y0, x1, y0, 0, 0, 0);
  canvas.line(x0, y0, x0, y1, 0, 0, 0);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    const int y = ypos(v);
    for (int x = x0 + 1; x < x1; x += 2) canvas.set(x, y, 210, 210, 210);
    draw_text(canvas, 6, y - 3, format_tick(v), 1, 0, 0, 0);
  }
  const int max_xticks = 12;
  const int stride = std::max(1, (n + max_xticks - 1) / max_xticks);
  for (int i = 0; i < n; i += stride) {
    const int x = xpos(i);
    canvas.line(x, y0, x, y0 + 4, 0, 0, 0);
    draw_text(canvas, x - 3 * static_cast<int>(condition_labels[i].size()), y0 + 8,
              condition_labels[i], 1, 0, 0, 0);
  }

  draw_text(canvas, left, 10, title, 2, 0, 0, 0);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Rgb c = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    int prev_x = 0, prev_y = 0;
    bool has_prev = false;
    for (int i = 0; i < n && i < static_cast<int>(series[s].values.size()); ++i) {
      const double v = series[s].values[i];
      if (!std::isfinite(v)) {
        has_prev = false;
        continue;
      }
      const int x = xpos(i), y = ypos(v);
      if (has_prev) canvas.line(prev_x, prev_y, x, y, c.r, c.g, c.b);
      canvas.thick_point(x, y, c.r, c.g, c.b);
      prev_x = x;
      prev_y = y;
      has_prev = true;
    }
    const int ly = top + static_cast<int>(s) * 14;
    for (int dx = 0; dx < 10; ++dx)
      for (int dy = 0; dy < 10; ++dy)
        canvas.set(x1 + 12 + dx, ly + dy, c.r, c.g, c.b);
    draw_text(canvas, x1 + 26, ly + 1, series[s].label, 1, 0, 0, 0);
  }

  write_png_rgb(path, width, height, canvas.px);
}

}  // namespace doadef::harness
