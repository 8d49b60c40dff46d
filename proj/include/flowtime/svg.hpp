// Copyright 2020 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOWTIME_SVG_HPP_
#define FLOWTIME_SVG_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "flowtime/geom.hpp"

namespace flowtime {

// Time runs left to right, rows top to bottom. One <rect> element per
// rectangle; rays and cell guides are lines.
inline std::string render_svg(const Geometry& g, const std::optional<Selection>& sel) {
  constexpr int64_t kUnit = 24;
  constexpr int64_t kMargin = 12;
  int64_t xmin = 0, xmax = std::max<int64_t>(g.instance.empty() ? 1 : g.T(), 1);
  for (const Rect& r : g.rects) {
    xmin = std::min(xmin, r.beg);
    xmax = std::max(xmax, r.end);
  }
  const int64_t rows = g.instance.n();
  const int64_t width = (xmax - xmin) * kUnit + 2 * kMargin;
  const int64_t height = (rows + 1) * kUnit + 2 * kMargin;
  auto X = [&](int64_t t) { return kMargin + (t - xmin) * kUnit; };
  auto Y = [&](int64_t row) { return kMargin + row * kUnit; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
    << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  o << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\""
       " patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\""
       " stroke=\"#333333\" stroke-width=\"2\"/></pattern></defs>\n";

  std::set<int64_t> bounds;
  for (const Chain& ch : g.chains) {
    const Cell c = g.grid.cell(ch.cell);
    bounds.insert(c.beg);
    bounds.insert(c.end);
  }
  o << "<g id=\"cells\" stroke=\"#2e8b57\" stroke-width=\"1\" stroke-dasharray=\"4 3\">\n";
  for (int64_t b : bounds) {
    o << "<line x1=\"" << X(b) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(b) << "\" y2=\""
      << Y(rows + 1) << "\"/>\n";
  }
  o << "</g>\n";

  o << "<g id=\"rects\" stroke=\"#000000\" stroke-width=\"1\">\n";
  for (size_t id = 0; id < g.rects.size(); ++id) {
    const Rect& r = g.rects[id];
    const bool on = sel && sel->contains(static_cast<int>(id));
    o << "<rect x=\"" << X(r.beg) << "\" y=\"" << Y(r.row) << "\" width=\""
      << (r.end - r.beg) * kUnit << "\" height=\"" << kUnit << "\" fill=\""
      << (on ? "url(#hatch)" : "#dde6f0") << "\"/>\n";
  }
  o << "</g>\n";

  o << "<g id=\"rays\" stroke=\"#d00000\" stroke-width=\"2\">\n";
  for (const Ray& ray : g.rays) {
    const int64_t x = X(ray.t) + kUnit / 2;
    o << "<line x1=\"" << x << "\" y1=\"" << Y(ray.jbase) + kUnit / 2 << "\" x2=\"" << x
      << "\" y2=\"" << Y(rows + 1) << "\"/>\n";
  }
  o << "</g>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace flowtime

#endif  // FLOWTIME_SVG_HPP_
