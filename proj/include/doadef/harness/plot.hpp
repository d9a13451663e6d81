// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace doadef::harness {

// Minimal RGB8 PNG writer (zlib-deflated, filter 0).
void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<unsigned char>& rgb);

struct PlotSeries {
  std::string label;
  std::vector<double> values;  // one point per condition; NaN skips the point
};

// One metric panel: condition labels on x, one polyline per series, legend in
// the top-right corner. Output is deterministic for identical inputs.
void line_plot_png(const std::string& path, const std::string& title,
                   const std::vector<std::string>& condition_labels,
                   const std::vector<PlotSeries>& series);

}  // namespace doadef::harness
