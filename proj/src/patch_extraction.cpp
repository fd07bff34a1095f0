#include "ugpl/patch_extraction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugpl {
namespace {

struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
};

Grid image_grid(const Tensor& image) {
  const Shape& s = image.shape();
  if (s.size() == 2 || (s.size() == 3 && s[2] == 1)) return {s[0], s[1]};
  throw ShapeError("extract_patches", "image must be [H, W, 1], got " + shape_str(s));
}

// Inclusive-exclusive 2-D prefix sums, (H + 1) x (W + 1).
class SummedArea {
 public:
  SummedArea(std::size_t height, std::size_t width) : width_(width + 1), sums_((height + 1) * (width + 1), 0) {}

  template <class Value>
  void build(std::size_t height, std::size_t width, Value value) {
    for (std::size_t r = 0; r < height; ++r) {
      std::int64_t row = 0;
      for (std::size_t c = 0; c < width; ++c) {
        row += value(r * width + c);
        sums_[(r + 1) * width_ + c + 1] = sums_[r * width_ + c + 1] + row;
      }
    }
  }

  std::int64_t window(std::size_t y, std::size_t x, std::size_t p) const {
    return sums_[(y + p) * width_ + x + p] - sums_[y * width_ + x + p] - sums_[(y + p) * width_ + x] +
           sums_[y * width_ + x];
  }

 private:
  std::size_t width_;
  std::vector<std::int64_t> sums_;
};

}  // namespace

std::string to_string(Suppression s) { return s == Suppression::kHardMask ? "hard_mask" : "gaussian"; }
std::string to_string(Selection s) { return s == Selection::kWindowMean ? "window_mean" : "pixel_argmax"; }

Suppression suppression_from_string(const std::string& s) {
  if (s == "hard_mask") return Suppression::kHardMask;
  if (s == "gaussian") return Suppression::kGaussian;
  throw std::invalid_argument("unknown suppression mode '" + s + "'");
}

Selection selection_from_string(const std::string& s) {
  if (s == "window_mean") return Selection::kWindowMean;
  if (s == "pixel_argmax") return Selection::kPixelArgmax;
  throw std::invalid_argument("unknown selection mode '" + s + "'");
}

void PatchExtractConfig::validate(std::size_t height, std::size_t width) const {
  if (patch_size == 0 || patch_size > std::min(height, width)) {
    throw std::invalid_argument("patch_size " + std::to_string(patch_size) + " must be in [1, min(H, W) = " +
                                std::to_string(std::min(height, width)) + "]");
  }
  if (num_patches == 0) throw std::invalid_argument("num_patches must be >= 1");
  if (gaussian_sigma && !(*gaussian_sigma > 0.0)) throw std::invalid_argument("gaussian_sigma must be positive");
}

std::int64_t to_fixed(double value) { return std::llround(value * kFixedPointScale); }

Tensor upsample_bilinear(const Tensor& map, std::size_t height, std::size_t width) {
  if (map.rank() != 2) throw ShapeError("upsample_map", "expected [h, w], got " + shape_str(map.shape()));
  const std::size_t h = map.dim(0);
  const std::size_t w = map.dim(1);
  if (h == 0 || w == 0) throw ShapeError("upsample_map", "empty map");
  if (height < h || width < w) {
    throw ShapeError("upsample_map", "target " + shape_str({height, width}) + " smaller than source " + shape_str(map.shape()));
  }
  return resize_bilinear(map, height, width).reshaped(Shape{height, width});
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  const Shape& s = image.shape();
  if (!(s.size() == 2 || (s.size() == 3 && s[2] == 1)) || s[0] == 0 || s[1] == 0) {
    throw ShapeError("resize_bilinear", "expected [h, w] or [h, w, 1], got " + shape_str(s));
  }
  const std::size_t h = s[0];
  const std::size_t w = s[1];
  Tensor out(Shape{height, width, 1});
  const double sy = height > 1 ? static_cast<double>(h - 1) / static_cast<double>(height - 1) : 0.0;
  const double sx = width > 1 ? static_cast<double>(w - 1) / static_cast<double>(width - 1) : 0.0;
  for (std::size_t r = 0; r < height; ++r) {
    const double fy = static_cast<double>(r) * sy;
    const auto y0 = std::min(static_cast<std::size_t>(fy), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t c = 0; c < width; ++c) {
      const double fx = static_cast<double>(c) * sx;
      const auto x0 = std::min(static_cast<std::size_t>(fx), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      const double top = image[y0 * w + x0] * (1.0 - tx) + image[y0 * w + x1] * tx;
      const double bottom = image[y1 * w + x0] * (1.0 - tx) + image[y1 * w + x1] * tx;
      out[r * width + c] = top * (1.0 - ty) + bottom * ty;
    }
  }
  return out;
}

Tensor crop_patch(const Tensor& image, std::ptrdiff_t x, std::ptrdiff_t y, std::size_t patch_size) {
  const Grid g = image_grid(image);
  const auto p = static_cast<std::ptrdiff_t>(patch_size);
  const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(x, 0);
  const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(y, 0);
  const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(x + p, static_cast<std::ptrdiff_t>(g.width));
  const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(y + p, static_cast<std::ptrdiff_t>(g.height));
  if (x1 <= x0 || y1 <= y0) throw ShapeError("crop_patch", "patch lies outside the image");
  const auto ch = static_cast<std::size_t>(y1 - y0);
  const auto cw = static_cast<std::size_t>(x1 - x0);
  Tensor crop(Shape{ch, cw, 1});
  for (std::size_t r = 0; r < ch; ++r) {
    for (std::size_t c = 0; c < cw; ++c) {
      crop[r * cw + c] = image[(static_cast<std::size_t>(y0) + r) * g.width + static_cast<std::size_t>(x0) + c];
    }
  }
  if (ch == patch_size && cw == patch_size) return crop;
  return resize_bilinear(crop, patch_size, patch_size);
}

double gaussian_keep(std::size_t row, std::size_t col, const PatchCoord& at, std::size_t patch_size, double sigma) {
  const double cy = static_cast<double>(at.y) + (static_cast<double>(patch_size) - 1.0) / 2.0;
  const double cx = static_cast<double>(at.x) + (static_cast<double>(patch_size) - 1.0) / 2.0;
  const double dy = static_cast<double>(row) - cy;
  const double dx = static_cast<double>(col) - cx;
  return 1.0 - std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
}

PatchSet extract_patches(const Tensor& image, const Tensor& map, const PatchExtractConfig& config, Rng& rng) {
  const Grid g = image_grid(image);
  config.validate(g.height, g.width);
  if (!image.all_finite() || !map.all_finite()) throw NonFiniteError("extract_patches: non-finite input");

  const std::size_t p = config.patch_size;
  const std::size_t margin = config.effective_margin();
  const bool hard = config.suppression == Suppression::kHardMask;
  const std::size_t max_x = g.width - p;
  const std::size_t max_y = g.height - p;
  const std::size_t n = g.height * g.width;

  Tensor upsampled = upsample_bilinear(map, g.height, g.width);
  std::vector<double> field(upsampled.storage());
  std::vector<unsigned char> mask(n, 0);
  std::vector<double> visible(n);

  PatchSet out;
  for (std::size_t k = 0; k < config.num_patches; ++k) {
    for (std::size_t i = 0; i < n; ++i) visible[i] = mask[i] ? 0.0 : field[i];

    bool found = false;
    PatchCoord at;
    double score = 0.0;
    if (config.selection == Selection::kWindowMean) {
      SummedArea values(g.height, g.width);
      values.build(g.height, g.width, [&](std::size_t i) { return to_fixed(visible[i]); });
      SummedArea masked(g.height, g.width);
      if (hard) masked.build(g.height, g.width, [&](std::size_t i) { return static_cast<std::int64_t>(mask[i]); });
      std::int64_t best = 0;
      bool any = false;
      for (std::size_t y = 0; y <= max_y; ++y) {
        for (std::size_t x = 0; x <= max_x; ++x) {
          if (hard && masked.window(y, x, p) != 0) continue;
          const std::int64_t s = values.window(y, x, p);
          if (!any || s > best) {
            any = true;
            best = s;
            at = {x, y};
          }
        }
      }
      if (any) {
        score = static_cast<double>(best) / (kFixedPointScale * static_cast<double>(p * p));
        found = hard ? best > 0 : score > kGaussianExhaustedScore;
      }
    } else {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (visible[i] > visible[arg]) arg = i;
      }
      score = visible[arg];
      found = hard ? score > 0.0 : score > kGaussianExhaustedScore;
      at = {std::min(arg % g.width, max_x), std::min(arg / g.width, max_y)};
    }

    if (!found) {
      at.y = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_y)));
      at.x = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_x)));
      score = 0.0;
    }

    const std::size_t r0 = at.y > margin ? at.y - margin : 0;
    const std::size_t c0 = at.x > margin ? at.x - margin : 0;
    const std::size_t r1 = std::min(at.y + p + margin, g.height);
    const std::size_t c1 = std::min(at.x + p + margin, g.width);
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = c0; c < c1; ++c) {
        if (hard) {
          mask[r * g.width + c] = 1;
        } else {
          field[r * g.width + c] *= gaussian_keep(r, c, at, p, config.effective_sigma());
        }
      }
    }

    out.coords.push_back(at);
    out.fallback_used.push_back(!found);
    out.scores.push_back(score);
    out.patches.push_back(crop_patch(image, static_cast<std::ptrdiff_t>(at.x), static_cast<std::ptrdiff_t>(at.y), p));
  }
  return out;
}

}  // namespace ugpl
