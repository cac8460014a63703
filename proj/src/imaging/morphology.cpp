#include "retscreen/imaging/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "retscreen/error.hpp"

namespace retscreen::imaging {

StructuringElement::StructuringElement(int radius) : radius_(radius) {
  half_widths_.resize(static_cast<std::size_t>(2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy) {
    int hw = 0;
    while ((hw + 1) * (hw + 1) + dy * dy <= radius * radius) ++hw;
    half_widths_[static_cast<std::size_t>(dy + radius)] = hw;
  }
}

StructuringElement StructuringElement::disc(int radius) {
  if (radius < 1) throw Error(Errc::kInvalidArgument, "structuring element radius must be >= 1");
  return StructuringElement(radius);
}

namespace {

// Per-row prefix counts: prefix[y*(w+1) + x] = set pixels in row y before x.
std::vector<int> row_prefix(const BinaryMask& mask) {
  const int w = mask.width();
  std::vector<int> prefix(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(mask.height()), 0);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = prefix.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w + 1);
    for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (mask.at(x, y) ? 1 : 0);
  }
  return prefix;
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
  const int w = mask.width();
  const int h = mask.height();
  const int r = se.radius();
  const auto prefix = row_prefix(mask);
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(x, y)) continue;
      bool keep = true;
      for (int dy = -r; dy <= r && keep; ++dy) {
        const int yy = y + dy;
        const int hw = se.half_width(dy);
        if (yy < 0 || yy >= h || x - hw < 0 || x + hw >= w) {
          keep = false;
          break;
        }
        const auto* row = prefix.data() + static_cast<std::size_t>(yy) * static_cast<std::size_t>(w + 1);
        keep = row[x + hw + 1] - row[x - hw] == 2 * hw + 1;
      }
      if (keep) out.set(x, y);
    }
  }
  return out;
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
  const int w = mask.width();
  const int h = mask.height();
  const int r = se.radius();
  const auto prefix = row_prefix(mask);
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        const int hw = se.half_width(dy);
        const int x0 = std::max(0, x - hw);
        const int x1 = std::min(w - 1, x + hw);
        const auto* row = prefix.data() + static_cast<std::size_t>(yy) * static_cast<std::size_t>(w + 1);
        if (row[x1 + 1] - row[x0] > 0) {
          out.set(x, y);
          break;
        }
      }
    }
  }
  return out;
}

BinaryMask open(const BinaryMask& mask, const StructuringElement& se) {
  return dilate(erode(mask, se), se);
}

BinaryMask close(const BinaryMask& mask, const StructuringElement& se) {
  const int r = se.radius();
  BinaryMask padded(mask.width() + 2 * r, mask.height() + 2 * r);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) padded.set(x + r, y + r, mask.at(x, y));
  }
  const BinaryMask closed = erode(dilate(padded, se), se);
  BinaryMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, closed.at(x + r, y + r));
  }
  return out;
}

namespace {

struct Run {
  int y;
  int x0;
  int x1;  // inclusive
};

int find_root(std::vector<int>& parent, int i) {
  while (parent[static_cast<std::size_t>(i)] != i) {
    parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
    i = parent[static_cast<std::size_t>(i)];
  }
  return i;
}

}  // namespace

Labeling label_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  const int reach = connectivity == Connectivity::kEight ? 1 : 0;

  // Union-find over horizontal runs; two runs on adjacent rows touch when
  // their spans overlap (widened by one pixel for 8-connectivity).
  std::vector<Run> runs;
  std::vector<int> parent;
  std::size_t prev_begin = 0;
  std::size_t prev_end = 0;
  for (int y = 0; y < h; ++y) {
    const std::size_t row_begin = runs.size();
    const auto* bits = mask.bits().data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(w);
    for (int x = 0; x < w;) {
      if (!bits[x]) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < w && bits[x]) ++x;
      const int id = static_cast<int>(runs.size());
      runs.push_back({y, start, x - 1});
      parent.push_back(id);
      for (std::size_t p = prev_begin; p < prev_end; ++p) {
        const Run& above = runs[p];
        if (above.x1 + reach < start) continue;
        if (above.x0 - reach > x - 1) break;
        const int a = find_root(parent, id);
        const int b = find_root(parent, static_cast<int>(p));
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      }
    }
    prev_begin = row_begin;
    prev_end = runs.size();
  }

  Labeling result;
  result.labels.assign(mask.size(), 0);
  std::vector<int> label_of_root(runs.size(), 0);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const int root = find_root(parent, static_cast<int>(i));
    int& label = label_of_root[static_cast<std::size_t>(root)];
    const Run& run = runs[i];
    if (label == 0) {
      // Roots are the lowest run index, so labels follow raster order of first pixels.
      label = static_cast<int>(result.components.size()) + 1;
      result.components.push_back({label, 0, {run.x0, run.y, run.x1, run.y}});
    }
    Component& comp = result.components[static_cast<std::size_t>(label - 1)];
    comp.area += static_cast<std::size_t>(run.x1 - run.x0 + 1);
    comp.bbox.x0 = std::min(comp.bbox.x0, run.x0);
    comp.bbox.x1 = std::max(comp.bbox.x1, run.x1);
    comp.bbox.y0 = std::min(comp.bbox.y0, run.y);
    comp.bbox.y1 = std::max(comp.bbox.y1, run.y);
    auto* row = result.labels.data() + static_cast<std::size_t>(run.y) * static_cast<std::size_t>(w);
    std::fill(row + run.x0, row + run.x1 + 1, label);
  }
  return result;
}

std::vector<Component> connected_components(const BinaryMask& mask) {
  return label_components(mask, Connectivity::kEight).components;
}

BinaryMask remove_small_components(const BinaryMask& mask, std::size_t min_area) {
  const auto labeling = label_components(mask, Connectivity::kEight);
  BinaryMask out(mask.width(), mask.height());
  auto bits = out.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const auto label = labeling.labels[i];
    if (label != 0 && labeling.components[static_cast<std::size_t>(label - 1)].area >= min_area) bits[i] = 1;
  }
  return out;
}

BinaryMask largest_component(const BinaryMask& mask, Connectivity connectivity) {
  const auto labeling = label_components(mask, connectivity);
  BinaryMask out(mask.width(), mask.height());
  if (labeling.components.empty()) return out;
  const auto best = std::max_element(labeling.components.begin(), labeling.components.end(),
                                     [](const Component& a, const Component& b) { return a.area < b.area; });
  auto bits = out.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = labeling.labels[i] == best->id ? 1 : 0;
  return out;
}

BinaryMask fill_holes(const BinaryMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  // Background reachable from the border stays background.
  BinaryMask outside(w, h);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (!mask.at(x, y) && !outside.at(x, y)) {
      outside.set(x, y);
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  return ~outside;
}

}  // namespace retscreen::imaging
