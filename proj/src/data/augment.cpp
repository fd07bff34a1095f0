#include "ugpl/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ugpl {
namespace {

struct Dims {
  std::size_t h, w;
};

Dims dims_of(const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 1) throw ShapeError("augment", "expected [H, W, 1], got " + shape_str(image.shape()));
  return {image.dim(0), image.dim(1)};
}

}  // namespace

Tensor flip_horizontal(const Tensor& image) {
  const Dims d = dims_of(image);
  Tensor out(image.shape());
  for (std::size_t r = 0; r < d.h; ++r) {
    for (std::size_t c = 0; c < d.w; ++c) out[r * d.w + c] = image[r * d.w + (d.w - 1 - c)];
  }
  return out;
}

Tensor flip_vertical(const Tensor& image) {
  const Dims d = dims_of(image);
  Tensor out(image.shape());
  for (std::size_t r = 0; r < d.h; ++r) {
    for (std::size_t c = 0; c < d.w; ++c) out[r * d.w + c] = image[(d.h - 1 - r) * d.w + c];
  }
  return out;
}

Tensor translate(const Tensor& image, int dy, int dx) {
  const Dims d = dims_of(image);
  Tensor out(image.shape(), 0.0);
  const auto h = static_cast<long>(d.h);
  const auto w = static_cast<long>(d.w);
  for (long r = 0; r < h; ++r) {
    const long sr = r - dy;
    if (sr < 0 || sr >= h) continue;
    for (long c = 0; c < w; ++c) {
      const long sc = c - dx;
      if (sc < 0 || sc >= w) continue;
      out[static_cast<std::size_t>(r * w + c)] = image[static_cast<std::size_t>(sr * w + sc)];
    }
  }
  return out;
}

Tensor rotate(const Tensor& image, double degrees) {
  const Dims d = dims_of(image);
  if (degrees == 0.0) return image;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cy = (static_cast<double>(d.h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(d.w) - 1.0) / 2.0;
  auto at = [&](long r, long c) -> double {
    if (r < 0 || c < 0 || r >= static_cast<long>(d.h) || c >= static_cast<long>(d.w)) return 0.0;
    return image[static_cast<std::size_t>(r) * d.w + static_cast<std::size_t>(c)];
  };
  Tensor out(image.shape(), 0.0);
  for (std::size_t r = 0; r < d.h; ++r) {
    for (std::size_t c = 0; c < d.w; ++c) {
      const double y = static_cast<double>(r) - cy;
      const double x = static_cast<double>(c) - cx;
      const double sy = cs * y - sn * x + cy;
      const double sx = sn * y + cs * x + cx;
      const double fy = std::floor(sy);
      const double fx = std::floor(sx);
      const double ty = sy - fy;
      const double tx = sx - fx;
      const auto y0 = static_cast<long>(fy);
      const auto x0 = static_cast<long>(fx);
      out[r * d.w + c] = (at(y0, x0) * (1 - tx) + at(y0, x0 + 1) * tx) * (1 - ty) +
                         (at(y0 + 1, x0) * (1 - tx) + at(y0 + 1, x0 + 1) * tx) * ty;
    }
  }
  return out;
}

Tensor adjust_brightness_contrast(const Tensor& image, double brightness, double contrast) {
  dims_of(image);
  double mean = 0.0;
  for (double v : image.data()) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(image.size(), 1));
  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = std::clamp((mean + contrast * (image[i] - mean)) * brightness, 0.0, 1.0);
  }
  return out;
}

Sample augment(const Sample& sample, Rng& rng, const AugmentConfig& config) {
  if (!config.enabled) return sample;
  const Dims d = dims_of(sample.image);
  const bool hflip = rng.coin();
  const bool vflip = rng.coin();
  const bool rotated = rng.coin(config.rotation_probability);
  const double angle = rng.uniform(-config.max_rotation_degrees, config.max_rotation_degrees);
  const auto max_dy = static_cast<std::int64_t>(std::floor(config.max_shift_fraction * static_cast<double>(d.h)));
  const auto max_dx = static_cast<std::int64_t>(std::floor(config.max_shift_fraction * static_cast<double>(d.w)));
  const auto dy = static_cast<int>(rng.uniform_int(-max_dy, max_dy));
  const auto dx = static_cast<int>(rng.uniform_int(-max_dx, max_dx));
  const double brightness = rng.uniform(1.0 - config.brightness, 1.0 + config.brightness);
  const double contrast = rng.uniform(1.0 - config.contrast, 1.0 + config.contrast);

  Tensor img = sample.image;
  if (config.horizontal_flip && hflip) img = flip_horizontal(img);
  if (config.vertical_flip && vflip) img = flip_vertical(img);
  if (rotated) img = rotate(img, angle);
  if (dy != 0 || dx != 0) img = translate(img, dy, dx);
  img = adjust_brightness_contrast(img, brightness, contrast);
  return {std::move(img), sample.label, sample.id};
}

}  // namespace ugpl
