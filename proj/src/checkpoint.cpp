#include "apex/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace apex {

namespace {

constexpr char kMagic[8] = {'A', 'P', 'X', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return value;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const auto len = read_pod<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated string");
  return s;
}

}  // namespace

const Eigen::MatrixXd& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::runtime_error("checkpoint: missing tensor " + name);
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

double Checkpoint::scalar(const std::string& name) const {
  auto it = scalars.find(name);
  if (it == scalars.end()) throw std::runtime_error("checkpoint: missing scalar " + name);
  return it->second;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, ckpt.config_hash);

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
  }

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.scalars.size()));
  for (const auto& [name, v] : ckpt.scalars) {
    write_string(out, name);
    write_pod(out, v);
  }

  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.strings.size()));
  for (const auto& [name, v] : ckpt.strings) {
    write_string(out, name);
    write_string(out, v);
  }
  if (!out) throw std::runtime_error("checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.config_hash = read_pod<std::uint64_t>(in);

  const auto n_tensors = read_pod<std::uint32_t>(in);
  ckpt.tensors.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = read_string(in);
    const auto rows = read_pod<std::uint32_t>(in);
    const auto cols = read_pod<std::uint32_t>(in);
    Eigen::MatrixXd t(rows, cols);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
    ckpt.tensors.emplace_back(name, std::move(t));
  }

  const auto n_scalars = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_scalars; ++i) {
    const std::string name = read_string(in);
    ckpt.scalars[name] = read_pod<double>(in);
  }

  const auto n_strings = read_pod<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_strings; ++i) {
    const std::string name = read_string(in);
    ckpt.strings[name] = read_string(in);
  }
  return ckpt;
}

}  // namespace apex
