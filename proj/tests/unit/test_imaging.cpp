#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles/oracles.hpp"
#include "retscreen/error.hpp"
#include "retscreen/imaging/codec.hpp"
#include "retscreen/imaging/fov.hpp"
#include "retscreen/imaging/morphology.hpp"
#include "retscreen/imaging/overlay.hpp"
#include "retscreen/imaging/transform.hpp"

using namespace retscreen;
using namespace retscreen::imaging;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::kInvalidArgument;
}

// 1x1 8-bit grayscale PNG holding 255, assembled by hand.
const Bytes kWhitePixelPng = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00,
    0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00,
    0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xf8, 0x0f, 0x00, 0x01, 0x01, 0x01, 0x00,
    0xb1, 0x38, 0xf6, 0x14, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

PixelGrid disc_image(int size, double cx, double cy, double r, float inside = 0.8f) {
  PixelGrid g(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool in = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
      for (int c = 0; c < 3; ++c) g.at(x, y, c) = in ? inside : 0.0f;
    }
  }
  return g;
}

PixelGrid random_grid(std::mt19937_64& rng, int w, int h, int c) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  PixelGrid g(w, h, c);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

}  // namespace

TEST_CASE("decode: hand-built png, gray jpeg, truncation") {
  const auto white = decode(kWhitePixelPng, ImageFormat::kPng);
  CHECK(white.width() == 1);
  CHECK(white.channels() == 1);
  CHECK(white.at(0, 0) == 1.0f);
  CHECK(decode(kWhitePixelPng).at(0, 0) == 1.0f);

  const auto jpeg = encode_jpeg(PixelGrid(2, 2, 1), 90);
  const auto black = decode(jpeg, ImageFormat::kJpeg);
  CHECK(black.channels() == 1);
  for (float v : black.values()) CHECK(v == 0.0f);

  Bytes cut(jpeg.begin(), jpeg.begin() + static_cast<long>(jpeg.size() / 2));
  CHECK(code_of([&] { decode(cut, ImageFormat::kJpeg); }) == Errc::kDecodeError);
  Bytes cut_png(kWhitePixelPng.begin(), kWhitePixelPng.begin() + 40);
  CHECK(code_of([&] { decode(cut_png, ImageFormat::kPng); }) == Errc::kDecodeError);
  CHECK(code_of([] { decode(Bytes{1, 2, 3}); }) == Errc::kDecodeError);
  CHECK(sniff_format(kWhitePixelPng) == ImageFormat::kPng);
  CHECK(sniff_format(jpeg) == ImageFormat::kJpeg);
}

TEST_CASE("png round trip is lossless at 8 bits") {
  std::mt19937_64 rng(3);
  for (int c : {1, 3}) {
    auto g = random_grid(rng, 17, 9, c);
    for (auto& v : g.values()) v = std::round(v * 255.0f) / 255.0f;
    const auto back = decode(encode_png(g));
    REQUIRE(back.same_geometry(g));
    for (std::size_t i = 0; i < g.values().size(); ++i) CHECK(back.values()[i] == g.values()[i]);
  }
  BinaryMask m(5, 4);
  m.set(1, 2);
  CHECK(mask_from_grid(decode(encode_png(m))) == m);
}

TEST_CASE("resize") {
  const PixelGrid flat(7, 5, 3, std::vector<float>(7 * 5 * 3, 0.3f));
  for (auto [w, h] : {std::pair{3, 2}, std::pair{20, 11}}) {
    const auto r = resize(flat, w, h);
    for (float v : r.values()) CHECK(v == doctest::Approx(0.3f).epsilon(1e-6));
  }
  std::mt19937_64 rng(1);
  const auto g = random_grid(rng, 9, 6, 3);
  const auto same = resize(g, 9, 6);
  for (std::size_t i = 0; i < g.values().size(); ++i) CHECK(std::abs(same.values()[i] - g.values()[i]) <= 1e-6);

  // Pixel-center alignment: output x maps to source (x + 0.5) / 2 - 0.5.
  const auto up = resize(PixelGrid(2, 1, 1, {0.0f, 1.0f}), 4, 1);
  CHECK(up.at(0, 0) == doctest::Approx(0.0));
  CHECK(up.at(1, 0) == doctest::Approx(0.25));
  CHECK(up.at(2, 0) == doctest::Approx(0.75));
  CHECK(up.at(3, 0) == doctest::Approx(1.0));
}

TEST_CASE("gamma") {
  const PixelGrid g(3, 1, 1, {0.0f, 0.25f, 1.0f});
  CHECK(gamma_correct(g, 1.0) == g);
  const auto h = gamma_correct(g, 0.5);
  CHECK(h.at(1, 0) == doctest::Approx(0.5));
  for (double gamma : {0.1, 0.7, 2.2, 9.0}) {
    const auto k = gamma_correct(g, gamma);
    CHECK(k.at(0, 0) == 0.0f);
    CHECK(k.at(2, 0) == 1.0f);
  }
  std::mt19937_64 rng(8);
  const auto r = random_grid(rng, 30, 1, 1);
  const auto rg = gamma_correct(r, 1.7);
  for (int i = 0; i < 30; ++i) {
    for (int j = 0; j < 30; ++j) {
      if (r.at(i, 0) < r.at(j, 0)) CHECK(rg.at(i, 0) <= rg.at(j, 0));
    }
  }
  CHECK(code_of([&] { gamma_correct(g, 0.0); }) == Errc::kBadGamma);
  CHECK(code_of([&] { gamma_correct(g, -1.0); }) == Errc::kBadGamma);
  CHECK(code_of([&] { gamma_correct(g, NAN); }) == Errc::kBadGamma);
}

TEST_CASE("flip, rotate, scale") {
  std::mt19937_64 rng(4);
  const auto g = random_grid(rng, 11, 7, 3);
  CHECK(flip_h(flip_h(g)) == g);
  CHECK(flip_h(g).at(0, 3, 1) == g.at(10, 3, 1));
  const auto r0 = rotate(g, 0.0);
  for (std::size_t i = 0; i < g.values().size(); ++i) CHECK(std::abs(r0.values()[i] - g.values()[i]) <= 1e-6);

  // [[a b] [c d]] turned a quarter counter-clockwise is [[b d] [a c]].
  const PixelGrid q(2, 2, 1, {0.1f, 0.2f, 0.3f, 0.4f});
  const auto rq = rotate(q, 90.0);
  CHECK(rq.at(0, 0) == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(rq.at(1, 0) == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(rq.at(0, 1) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(rq.at(1, 1) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(rotate(g, 37.0).same_geometry(g));

  const auto s1 = scale_about_center(g, 1.0);
  for (std::size_t i = 0; i < g.values().size(); ++i) CHECK(std::abs(s1.values()[i] - g.values()[i]) <= 1e-6);
  const auto s2 = scale_about_center(g, 2.0);
  CHECK(s2.same_geometry(g));
}

TEST_CASE("fov extraction") {
  const auto info = extract_fov(disc_image(512, 256.0, 250.0, 200.0));
  CHECK(std::abs(info.coverage - M_PI * 200.0 * 200.0 / (512.0 * 512.0)) <= 0.02);
  CHECK(std::abs(info.center_x - 256.0) <= 2.0);
  CHECK(std::abs(info.center_y - 250.0) <= 2.0);
  CHECK(connected_components(info.mask).size() == 1);
  CHECK(fill_holes(info.mask) == info.mask);

  CHECK(code_of([] { extract_fov(PixelGrid(64, 64, 3)); }) == Errc::kNoFov);
  const PixelGrid bright(128, 128, 3, std::vector<float>(128 * 128 * 3, 0.9f));
  CHECK(extract_fov(bright).coverage >= 0.9);

  // A dark hole inside the disc is filled.
  auto holed = disc_image(200, 100.0, 100.0, 80.0);
  for (int y = 95; y < 105; ++y) {
    for (int x = 95; x < 105; ++x) {
      for (int c = 0; c < 3; ++c) holed.at(x, y, c) = 0.0f;
    }
  }
  CHECK(extract_fov(holed).mask.at(100, 100));

  FovParams thicker;
  thicker.erosion_margin = 6;
  CHECK(extract_fov(disc_image(256, 128, 128, 100), thicker).coverage <
        extract_fov(disc_image(256, 128, 128, 100)).coverage);
}

TEST_CASE("disc structuring element") {
  BinaryMask dot(5, 5);
  dot.set(2, 2);
  const auto plus = dilate(dot, StructuringElement::disc(1));
  CHECK(plus.count() == 5);
  CHECK(plus.at(2, 1));
  CHECK(plus.at(1, 2));
  CHECK_FALSE(plus.at(1, 1));
  CHECK(code_of([] { StructuringElement::disc(0); }) == Errc::kInvalidArgument);
}

TEST_CASE("erode and dilate match brute force") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 60; ++i) {
    const auto m = oracle::random_mask(rng, 48);
    for (int r : {1, 2, 3}) {
      const auto se = StructuringElement::disc(r);
      CHECK(erode(m, se) == oracle::naive_erode(m, r));
      CHECK(dilate(m, se) == oracle::naive_dilate(m, r));
    }
  }
}

TEST_CASE("morphology lattice laws") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 100; ++i) {
    const auto m = oracle::random_mask(rng, 64);
    const int r = 1 + i % 3;
    const auto se = StructuringElement::disc(r);
    const auto o = open(m, se);
    const auto c = close(m, se);
    CHECK(o.subset_of(m));
    CHECK(m.subset_of(c));
    CHECK(open(o, se) == o);
    CHECK(close(c, se) == c);
    auto bigger = m;
    std::uniform_int_distribution<int> px(0, m.width() - 1), py(0, m.height() - 1);
    for (int k = 0; k < 20; ++k) bigger.set(px(rng), py(rng), true);
    CHECK(dilate(m, se).subset_of(dilate(bigger, se)));
    CHECK(erode(m, se).subset_of(erode(bigger, se)));
    const auto e = erode(m, se);
    const auto d = ~dilate(~m, se);
    for (int y = r; y < m.height() - r; ++y) {
      for (int x = r; x < m.width() - r; ++x) CHECK(e.at(x, y) == d.at(x, y));
    }
  }
}

TEST_CASE("connected components") {
  CHECK(connected_components(BinaryMask(6, 6)).empty());
  BinaryMask two(8, 3);
  for (int x : {0, 1, 2}) two.set(x, 0);
  for (int x : {5, 6, 7}) two.set(x, 2);
  const auto comps = connected_components(two);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].area == 3);
  CHECK(comps[1].area == 3);
  CHECK(comps[1].bbox == BoundingBox{5, 2, 7, 2});

  BinaryMask diag(3, 3);
  diag.set(0, 0);
  diag.set(1, 1);
  diag.set(2, 2);
  CHECK(connected_components(diag).size() == 1);
  CHECK(label_components(diag, Connectivity::kFour).components.size() == 3);

  std::mt19937_64 rng(31);
  for (int i = 0; i < 60; ++i) {
    const auto m = oracle::random_mask(rng, 64);
    const auto cs = connected_components(m);
    std::size_t total = 0;
    for (const auto& c : cs) total += c.area;
    CHECK(total == m.count());
    CHECK(static_cast<int>(cs.size()) == oracle::naive_component_count(m));
    const auto kept = remove_small_components(m, 5);
    for (const auto& c : connected_components(kept)) CHECK(c.area >= 5);
    CHECK(kept.subset_of(m));
  }
}

TEST_CASE("largest component and hole filling") {
  BinaryMask m(10, 10);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) m.set(x, y);
  }
  m.set(8, 8);
  CHECK(largest_component(m, Connectivity::kEight).count() == 9);
  BinaryMask ring(5, 5, true);
  ring.set(2, 2, false);
  CHECK(fill_holes(ring).count() == 25);
}

TEST_CASE("overlay and contour") {
  std::mt19937_64 rng(6);
  const auto g = random_grid(rng, 6, 5, 3);
  BinaryMask m(6, 5);
  m.set(2, 2);
  m.set(3, 2);
  CHECK(overlay(g, m, {1, 0, 0}, 0.0) == g);
  CHECK(overlay(g, BinaryMask(6, 5), {1, 0, 0}, 0.7) == g);
  const auto full = overlay(g, m, {0.2f, 0.4f, 0.6f}, 1.0);
  CHECK(full.at(2, 2, 0) == 0.2f);
  CHECK(full.at(3, 2, 2) == 0.6f);
  CHECK(full.at(0, 0, 1) == g.at(0, 0, 1));
  const auto half = overlay(g, m, {1, 1, 1}, 0.5);
  CHECK(half.at(2, 2, 0) == doctest::Approx(0.5 * g.at(2, 2, 0) + 0.5));
  CHECK(overlay(PixelGrid(6, 5, 1), m, {1, 1, 1}, 0.5).channels() == 3);
  CHECK(code_of([&] { overlay(g, BinaryMask(5, 5), {1, 1, 1}, 0.5); }) == Errc::kGeometryMismatch);
  CHECK(code_of([&] { overlay(g, m, {1, 1, 1}, 1.5); }) == Errc::kInvalidArgument);

  BinaryMask block(5, 5);
  for (int y = 1; y < 4; ++y) {
    for (int x = 1; x < 4; ++x) block.set(x, y);
  }
  const auto edge = contour(block);
  CHECK(edge.count() == 8);
  CHECK_FALSE(edge.at(2, 2));
  CHECK(resize_nearest(block, 10, 10).count() == 36);
}
