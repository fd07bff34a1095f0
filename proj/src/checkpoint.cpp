#include "ugpl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace ugpl {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw CheckpointError("checkpoint truncated reading " + what);
  return value;
}

void write_record(std::ostream& out, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) throw CheckpointError("parameter name too long: " + name);
  if (t.rank() > 0xFF) throw CheckpointError("tensor rank too large: " + name);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nn::ParameterSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out.write("UGPL", 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, set.params().size() + set.buffers().size());
  for (const auto& [name, var] : set.params()) write_record(out, name, var.value());
  for (const auto& buffer : set.buffers()) write_record(out, buffer.name, *buffer.tensor);
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const nn::ParameterSet& set) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "UGPL", 4) != 0) throw CheckpointError("bad checkpoint magic in " + path.string());
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in, "record count");

  std::map<std::string, Tensor*> targets;
  for (const auto& [name, var] : set.params()) targets[name] = &Var(var).mutable_value();
  for (const auto& buffer : set.buffers()) targets[buffer.name] = buffer.tensor;
  if (count != targets.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " records, model expects " +
                          std::to_string(targets.size()));
  }

  std::map<std::string, Tensor> loaded;
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("checkpoint truncated reading a name");
    const auto rank = get<std::uint8_t>(in, "rank of " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint32_t>(in, "shape of " + name);
    auto it = targets.find(name);
    if (it == targets.end()) throw CheckpointError("unexpected checkpoint record '" + name + "'");
    if (it->second->shape() != shape) {
      throw CheckpointError("shape mismatch for '" + name + "': checkpoint " + shape_str(shape) + ", model " +
                            shape_str(it->second->shape()));
    }
    Tensor values(shape);
    if (!in.read(reinterpret_cast<char*>(values.data().data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated reading values of " + name);
    }
    if (!loaded.emplace(name, std::move(values)).second) throw CheckpointError("duplicate record '" + name + "'");
  }
  for (auto& [name, values] : loaded) *targets[name] = std::move(values);
}

}  // namespace ugpl
