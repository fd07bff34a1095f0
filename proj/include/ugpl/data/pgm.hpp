#pragma once

#include <filesystem>
#include <stdexcept>

#include "ugpl/numerics/tensor.hpp"

namespace ugpl {

class PgmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary 8-bit PGM (P5, maxval <= 255). Returns [H, W] scaled to [0, 1].
Tensor read_pgm(const std::filesystem::path& path);

// Accepts [H, W] or [H, W, 1]; values are clamped to [0, 1] and stored as
// round(255 v).
void write_pgm(const std::filesystem::path& path, const Tensor& image);

}  // namespace ugpl
