#pragma once
// Slow, obviously-correct reference implementations used to check the
// library. Nothing here shares code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "retscreen/core/grid.hpp"
#include "retscreen/core/metrics.hpp"

namespace oracle {

/// (2 * concordant + ties) / (2 * P * N) over every positive/negative pair.
inline double concordance_auc(const std::vector<retscreen::LabeledScore>& s) {
  std::int64_t conc = 0, ties = 0, p = 0, n = 0;
  for (const auto& a : s) (a.label ? p : n) += 1;
  for (const auto& a : s) {
    if (!a.label) continue;
    for (const auto& b : s) {
      if (b.label) continue;
      if (a.score > b.score) ++conc;
      if (a.score == b.score) ++ties;
    }
  }
  return static_cast<double>(2 * conc + ties) / static_cast<double>(2 * p * n);
}

struct SweepPoint {
  double threshold = 0.0;
  std::int64_t tp = 0, tn = 0, pos = 0, neg = 0;
  double sens() const { return static_cast<double>(tp) / static_cast<double>(pos); }
  double spec() const { return static_cast<double>(tn) / static_cast<double>(neg); }
};

/// Every candidate threshold (distinct scores plus one above 1.0), with
/// confusion counts by direct counting.
inline std::vector<SweepPoint> sweep(const std::vector<retscreen::LabeledScore>& s) {
  std::set<double> cands;
  for (const auto& x : s) cands.insert(x.score);
  cands.insert(std::nextafter(1.0, 2.0));
  std::vector<SweepPoint> out;
  for (double t : cands) {
    SweepPoint pt;
    pt.threshold = t;
    for (const auto& x : s) {
      const bool called = x.score >= t;
      if (x.label) {
        ++pt.pos;
        if (called) ++pt.tp;
      } else {
        ++pt.neg;
        if (!called) ++pt.tn;
      }
    }
    out.push_back(pt);
  }
  return out;
}

struct Choice {
  SweepPoint point;
  bool unattained = false;
};

/// policy: 0 target-sensitivity, 1 target-specificity, 2 youden.
/// Best value first, then the higher threshold.
inline Choice exhaustive_choice(const std::vector<retscreen::LabeledScore>& s, int policy, double target) {
  const auto pts = sweep(s);
  auto better = [](long double a, double ta, long double b, double tb) { return a > b || (a == b && ta > tb); };
  Choice c;
  bool found = false;
  for (const auto& p : pts) {
    long double value;
    bool feasible = true;
    if (policy == 0) {
      feasible = p.sens() >= target;
      value = p.tn;
    } else if (policy == 1) {
      feasible = p.spec() >= target;
      value = p.tp;
    } else {
      // sens + spec scaled by pos * neg, so ties compare exactly.
      value = static_cast<long double>(p.tp * p.neg + p.tn * p.pos);
    }
    if (!feasible) continue;
    long double cur = 0;
    if (found) {
      cur = policy == 0   ? c.point.tn
            : policy == 1 ? c.point.tp
                          : static_cast<long double>(c.point.tp * c.point.neg + c.point.tn * c.point.pos);
    }
    if (!found || better(value, p.threshold, cur, c.point.threshold)) {
      c.point = p;
      found = true;
    }
  }
  if (!found) {
    c.unattained = true;
    for (const auto& p : pts) {
      const auto v = policy == 0 ? p.tp : p.tn;
      const auto cv = policy == 0 ? c.point.tp : c.point.tn;
      if (!found || v > cv || (v == cv && p.threshold > c.point.threshold)) {
        c.point = p;
        found = true;
      }
    }
  }
  return c;
}

/// Brute-force disc erosion/dilation: out-of-frame pixels are background.
inline retscreen::BinaryMask naive_erode(const retscreen::BinaryMask& m, int r) {
  retscreen::BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool all = true;
      for (int dy = -r; dy <= r && all; ++dy) {
        for (int dx = -r; dx <= r && all; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx, yy = y + dy;
          all = xx >= 0 && yy >= 0 && xx < m.width() && yy < m.height() && m.at(xx, yy);
        }
      }
      out.set(x, y, all);
    }
  }
  return out;
}

inline retscreen::BinaryMask naive_dilate(const retscreen::BinaryMask& m, int r) {
  retscreen::BinaryMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool any = false;
      for (int dy = -r; dy <= r && !any; ++dy) {
        for (int dx = -r; dx <= r && !any; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx, yy = y + dy;
          any = xx >= 0 && yy >= 0 && xx < m.width() && yy < m.height() && m.at(xx, yy);
        }
      }
      out.set(x, y, any);
    }
  }
  return out;
}

inline double naive_dice(const retscreen::BinaryMask& a, const retscreen::BinaryMask& b) {
  std::int64_t inter = 0, na = 0, nb = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      na += a.at(x, y);
      nb += b.at(x, y);
      inter += a.at(x, y) && b.at(x, y);
    }
  }
  return na + nb == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

/// Number of 8-connected components by flood fill.
inline int naive_component_count(const retscreen::BinaryMask& m) {
  std::vector<int> seen(static_cast<std::size_t>(m.width() * m.height()), 0);
  int count = 0;
  for (int y0 = 0; y0 < m.height(); ++y0) {
    for (int x0 = 0; x0 < m.width(); ++x0) {
      if (!m.at(x0, y0) || seen[static_cast<std::size_t>(y0 * m.width() + x0)]) continue;
      ++count;
      std::vector<std::pair<int, int>> stack{{x0, y0}};
      seen[static_cast<std::size_t>(y0 * m.width() + x0)] = 1;
      while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= m.width() || yy >= m.height() || !m.at(xx, yy)) continue;
            auto& s = seen[static_cast<std::size_t>(yy * m.width() + xx)];
            if (!s) {
              s = 1;
              stack.push_back({xx, yy});
            }
          }
        }
      }
    }
  }
  return count;
}

// ---- random instance generators ----

/// Scores drawn from a small grid so ties are common; both classes present.
inline std::vector<retscreen::LabeledScore> random_samples(std::mt19937_64& rng, std::size_t max_n) {
  std::uniform_int_distribution<std::size_t> nd(2, max_n);
  const auto n = nd(rng);
  std::uniform_int_distribution<int> levels(2, 60);
  const int L = levels(rng);
  std::uniform_int_distribution<int> pick(0, L);
  std::bernoulli_distribution coin(0.5);
  std::vector<retscreen::LabeledScore> s(n);
  for (auto& x : s) x = {static_cast<double>(pick(rng)) / L, coin(rng)};
  s[0].label = true;
  s[1].label = false;
  std::shuffle(s.begin(), s.end(), rng);
  return s;
}

/// Blobby random mask: random rectangles and discs plus speckle.
inline retscreen::BinaryMask random_mask(std::mt19937_64& rng, int max_side) {
  std::uniform_int_distribution<int> side(1, max_side);
  const int w = side(rng), h = side(rng);
  retscreen::BinaryMask m(w, h);
  std::uniform_int_distribution<int> shapes(0, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = shapes(rng);
  for (int i = 0; i < k; ++i) {
    const double cx = u(rng) * w, cy = u(rng) * h, r = 1.0 + u(rng) * max_side / 4.0;
    const bool disc = u(rng) < 0.5;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dx = x - cx, dy = y - cy;
        if (disc ? dx * dx + dy * dy <= r * r : std::abs(dx) <= r && std::abs(dy) <= r * 0.6) m.set(x, y, true);
      }
    }
  }
  const double speckle = u(rng) * 0.1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (u(rng) < speckle) m.set(x, y, !m.at(x, y));
    }
  }
  return m;
}

}  // namespace oracle
