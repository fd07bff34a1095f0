#include "ugpl/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ugpl/numerics/rng.hpp"

namespace ugpl {
namespace {

constexpr double kBackground = 0.05;
constexpr double kEdgeSoftness = 0.04;

struct Phantom {
  double cy, cx, ay, ax, level, tilt_y, tilt_x;
};

Phantom draw_phantom(const SyntheticConfig& c, Rng& rng) {
  const double h = static_cast<double>(c.height);
  const double w = static_cast<double>(c.width);
  Phantom p{};
  p.cy = (h - 1.0) / 2.0 + rng.uniform(-0.06, 0.06) * h;
  p.cx = (w - 1.0) / 2.0 + rng.uniform(-0.06, 0.06) * w;
  p.ay = rng.uniform(0.32, 0.42) * h;
  p.ax = rng.uniform(0.32, 0.42) * w;
  p.level = rng.uniform(0.35, 0.5);
  p.tilt_y = rng.uniform(-0.08, 0.08);
  p.tilt_x = rng.uniform(-0.08, 0.08);
  return p;
}

// Normalized elliptical radius; < 1 inside.
double radius(const Phantom& p, double y, double x) {
  const double dy = (y - p.cy) / p.ay;
  const double dx = (x - p.cx) / p.ax;
  return std::sqrt(dy * dy + dx * dx);
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names{"normal", "focal_lesion", "diffuse_texture"};
  return names;
}

void SyntheticConfig::validate() const {
  if (!(lesion_radius_min > 0.0) || lesion_radius_max < lesion_radius_min) {
    throw std::invalid_argument("synthetic: lesion radius range must satisfy 0 < min <= max");
  }
  if (lesion_contrast_max < lesion_contrast_min) throw std::invalid_argument("synthetic: lesion contrast min > max");
  if (noise_sigma < 0.0 || texture_amplitude < 0.0) throw std::invalid_argument("synthetic: negative noise or texture");
  const double need = 4.0 * lesion_radius_max + 2.0;
  if (static_cast<double>(std::min(height, width)) < need) {
    throw std::invalid_argument("synthetic: image " + std::to_string(height) + "x" + std::to_string(width) +
                                " too small for lesions of radius " + std::to_string(lesion_radius_max) +
                                " (need at least " + std::to_string(static_cast<int>(std::ceil(need))) + " pixels)");
  }
}

nlohmann::json SyntheticConfig::to_json() const {
  return {{"height", height},
          {"width", width},
          {"samples_per_class", samples_per_class},
          {"lesion_radius_min", lesion_radius_min},
          {"lesion_radius_max", lesion_radius_max},
          {"lesion_contrast_min", lesion_contrast_min},
          {"lesion_contrast_max", lesion_contrast_max},
          {"noise_sigma", noise_sigma},
          {"texture_amplitude", texture_amplitude},
          {"seed", seed}};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.samples_per_class = j.value("samples_per_class", c.samples_per_class);
  c.lesion_radius_min = j.value("lesion_radius_min", c.lesion_radius_min);
  c.lesion_radius_max = j.value("lesion_radius_max", c.lesion_radius_max);
  c.lesion_contrast_min = j.value("lesion_contrast_min", c.lesion_contrast_min);
  c.lesion_contrast_max = j.value("lesion_contrast_max", c.lesion_contrast_max);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.texture_amplitude = j.value("texture_amplitude", c.texture_amplitude);
  c.seed = j.value("seed", c.seed);
  return c;
}

Sample synthesize_sample(const SyntheticConfig& config, std::size_t label, std::size_t index) {
  if (label >= kSyntheticClasses) throw std::invalid_argument("synthetic: label out of range");
  config.validate();
  const std::size_t h = config.height;
  const std::size_t w = config.width;
  Rng rng(config.seed, "sample/" + std::to_string(label) + "/" + std::to_string(index));
  const Phantom ph = draw_phantom(config, rng);

  Tensor img(Shape{h, w, 1});
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = static_cast<double>(r);
      const double x = static_cast<double>(c);
      const double inside = sigmoid((1.0 - radius(ph, y, x)) / kEdgeSoftness);
      const double shade = ph.level * (1.0 + ph.tilt_y * (y - ph.cy) / ph.ay + ph.tilt_x * (x - ph.cx) / ph.ax);
      img[r * w + c] = kBackground + (shade - kBackground) * inside;
    }
  }

  if (label == 1) {
    const double rad = rng.uniform(config.lesion_radius_min, config.lesion_radius_max);
    const double contrast = rng.uniform(config.lesion_contrast_min, config.lesion_contrast_max);
    // Rejection-sample a center inside the phantom interior, clear of borders.
    double ly = 0.0;
    double lx = 0.0;
    for (int attempt = 0;; ++attempt) {
      ly = rng.uniform(rad, static_cast<double>(h - 1) - rad);
      lx = rng.uniform(rad, static_cast<double>(w - 1) - rad);
      if (radius(ph, ly, lx) < 0.75 || attempt > 1000) break;
    }
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double d = std::hypot(static_cast<double>(r) - ly, static_cast<double>(c) - lx);
        img[r * w + c] += contrast * sigmoid((rad - d) / 0.5);
      }
    }
  } else if (label == 2) {
    constexpr int kWaves = 6;
    double fy[kWaves], fx[kWaves], phase[kWaves];
    for (int k = 0; k < kWaves; ++k) {
      const double period = rng.uniform(3.0, 6.0);
      const double theta = rng.uniform(0.0, std::numbers::pi);
      fy[k] = 2.0 * std::numbers::pi * std::sin(theta) / period;
      fx[k] = 2.0 * std::numbers::pi * std::cos(theta) / period;
      phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    const double amp = config.texture_amplitude * std::sqrt(2.0 / kWaves);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double y = static_cast<double>(r);
        const double x = static_cast<double>(c);
        double t = 0.0;
        for (int k = 0; k < kWaves; ++k) t += std::cos(fy[k] * y + fx[k] * x + phase[k]);
        img[r * w + c] += amp * t * sigmoid((0.9 - radius(ph, y, x)) / kEdgeSoftness);
      }
    }
  }

  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = std::clamp(img[i] + rng.normal(0.0, config.noise_sigma), 0.0, 1.0);
  }
  char id[64];
  std::snprintf(id, sizeof(id), "%s_%05zu", synthetic_class_names()[label].c_str(), index);
  return {std::move(img), label, id};
}

std::vector<Sample> synthesize_samples(const SyntheticConfig& config) {
  config.validate();
  std::vector<Sample> out;
  out.reserve(kSyntheticClasses * config.samples_per_class);
  for (std::size_t label = 0; label < kSyntheticClasses; ++label) {
    for (std::size_t i = 0; i < config.samples_per_class; ++i) out.push_back(synthesize_sample(config, label, i));
  }
  return out;
}

}  // namespace ugpl
