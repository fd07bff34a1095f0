#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>

#include "ugpl/nn/layers.hpp"

namespace ugpl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout: "UGPL", u32 version, u64 record count, then per record
// u16 name length, name, u8 rank, u32 dims, little-endian f64 values.
// Parameters come first, then state buffers, both in registration order.
void save_checkpoint(const std::filesystem::path& path, const nn::ParameterSet& set);

// Every record must match a parameter or buffer of `set` by name and shape,
// and every parameter and buffer must be present.
void load_checkpoint(const std::filesystem::path& path, const nn::ParameterSet& set);

}  // namespace ugpl
