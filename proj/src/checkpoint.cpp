#include "trajdiff/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "trajdiff/errors.hpp"

namespace trajdiff {

namespace {

constexpr char kMagic[8] = {'T', 'J', 'D', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
  uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

std::ifstream open_and_check(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != std::string(kMagic, 8)) {
    throw DataError("not a checkpoint file: " + path);
  }
  return in;
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::ParamStore& params,
                     const ExperimentConfig& config) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  write_str(os, config.digest());
  write_str(os, config.serialize());
  write_u64(os, static_cast<uint64_t>(params.step_count()));
  write_u64(os, params.all().size());
  for (const auto& p : params.all()) {
    write_str(os, p->name);
    write_u64(os, static_cast<uint64_t>(p->value.rows()));
    write_u64(os, static_cast<uint64_t>(p->value.cols()));
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(p->value.size())));
  }
  if (!os) throw DataError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path, nn::ParamStore* params) {
  auto in = open_and_check(path);
  Checkpoint ck;
  std::string digest = read_str(in);
  std::string config_text = read_str(in);
  {
    std::istringstream cs(config_text);
    std::string line;
    while (std::getline(cs, line)) {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      ck.config.apply_kv(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }
  ck.step = static_cast<long>(read_u64(in));
  uint64_t count = read_u64(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_str(in);
    auto rows = static_cast<Eigen::Index>(read_u64(in));
    auto cols = static_cast<Eigen::Index>(read_u64(in));
    nn::Param* p = params ? params->find(name) : nullptr;
    if (params) {
      if (!p) throw DataError("checkpoint parameter not in model: " + name);
      if (p->value.rows() != rows || p->value.cols() != cols) {
        throw DataError("checkpoint shape mismatch for " + name);
      }
      in.read(reinterpret_cast<char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(rows * cols)));
    } else {
      in.seekg(static_cast<std::streamoff>(sizeof(double) * static_cast<size_t>(rows * cols)),
               std::ios::cur);
    }
  }
  if (!in) throw DataError("truncated checkpoint: " + path);
  if (params) params->set_step_count(ck.step);
  return ck;
}

ExperimentConfig peek_checkpoint_config(const std::string& path) {
  return load_checkpoint(path, nullptr).config;
}

}  // namespace trajdiff
