#include "fedgat/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedgat {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'A', 'T'};
constexpr std::uint8_t kVersion = 1;

void put_u16(std::ostream& out, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff),
                         static_cast<char>((v >> 8) & 0xff)};
  out.write(bytes, 2);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

[[noreturn]] void truncated(const std::string& path) {
  throw std::runtime_error("checkpoint " + path + " is truncated or corrupt");
}

std::uint16_t get_u16(std::istream& in, const std::string& path) {
  unsigned char bytes[2];
  if (!in.read(reinterpret_cast<char*>(bytes), 2)) truncated(path);
  return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) truncated(path);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t bits = get_u64(in, path);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");

  out.write(kMagic, sizeof kMagic);
  out.put(static_cast<char>(kVersion));
  put_u64(out, params.size());
  for (const auto& [name, t] : params.items()) {
    if (name.size() > UINT16_MAX) {
      throw std::runtime_error("parameter name too long: " + name);
    }
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    out.put(static_cast<char>(t.rank()));
    for (std::size_t dim : t.shape()) put_u64(out, dim);
  }
  for (const auto& [name, t] : params.items()) {
    (void)name;
    for (double v : t.values()) put_f64(out, v);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(path + " is not a checkpoint file");
  }
  const int version = in.get();
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  const std::uint64_t count = get_u64(in, path);

  std::vector<std::pair<std::string, std::vector<std::size_t>>> headers;
  headers.reserve(count);
  for (std::uint64_t p = 0; p < count; ++p) {
    const std::uint16_t name_len = get_u16(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) truncated(path);
    const int rank = in.get();
    if (rank < 0) truncated(path);
    std::vector<std::size_t> shape(static_cast<std::size_t>(rank));
    for (auto& dim : shape) dim = static_cast<std::size_t>(get_u64(in, path));
    headers.emplace_back(std::move(name), std::move(shape));
  }

  ParamStore store;
  for (auto& [name, shape] : headers) {
    std::size_t n = 1;
    for (std::size_t dim : shape) n *= dim;
    std::vector<double> values(n);
    for (auto& v : values) v = get_f64(in, path);
    store.add(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  return store;
}

}  // namespace fedgat
