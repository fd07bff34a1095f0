#pragma once

#include "ugpl/data/synthetic.hpp"
#include "ugpl/numerics/rng.hpp"

namespace ugpl {

struct AugmentConfig {
  bool enabled = true;
  bool horizontal_flip = true;
  bool vertical_flip = true;
  double max_shift_fraction = 0.05;
  double brightness = 0.1;  // factor drawn from [1 - b, 1 + b]
  double contrast = 0.1;    // factor drawn from [1 - c, 1 + c]
  double max_rotation_degrees = 10.0;
  // Bilinear resampling smooths pixel noise, so only some images are rotated
  // and unrotated (eval-like) images stay in the training distribution.
  double rotation_probability = 0.5;
};

// All helpers take and return [H, W, 1] images.
Tensor flip_horizontal(const Tensor& image);
Tensor flip_vertical(const Tensor& image);
// Integer translation; uncovered pixels become 0.
Tensor translate(const Tensor& image, int dy, int dx);
// Rotation about the image center by bilinear resampling, zero fill.
Tensor rotate(const Tensor& image, double degrees);
// (mean + contrast (v - mean)) * brightness, clipped to [0, 1].
Tensor adjust_brightness_contrast(const Tensor& image, double brightness, double contrast);

// Draws flips, rotation coin, angle, shift, brightness and contrast from `rng` in that
// order. The label and shape are preserved; pixels stay in [0, 1].
Sample augment(const Sample& sample, Rng& rng, const AugmentConfig& config);

}  // namespace ugpl
