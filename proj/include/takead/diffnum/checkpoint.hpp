#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "takead/diffnum/random.hpp"
#include "takead/diffnum/tape.hpp"

namespace takead::diffnum {

// Container layout:
//   TAKEAD-PARAMS v1\n
//   meta <key> <value>\n        (zero or more)
//   param <name> <group> <d0>[x<d1>] <offset>\n   (offset in doubles)
//   end <total_doubles>\n
//   <total_doubles little-endian fp64 values>
inline constexpr const char* kCheckpointMagic = "TAKEAD-PARAMS v1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using CheckpointMeta = std::map<std::string, std::string>;

namespace detail {

inline void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

inline double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::string serialize_parameters(const ParameterSet& ps, const CheckpointMeta& meta = {}) {
  std::ostringstream hdr;
  hdr << kCheckpointMagic << '\n';
  for (const auto& [k, v] : meta) hdr << "meta " << k << ' ' << v << '\n';
  std::size_t offset = 0;
  for (const auto& p : ps) {
    hdr << "param " << p.name << ' ' << p.group << ' ';
    const auto& s = p.value.shape();
    hdr << s[0];
    if (s.size() == 2) hdr << 'x' << s[1];
    hdr << ' ' << offset << '\n';
    offset += p.value.size();
  }
  hdr << "end " << offset << '\n';
  std::string out = hdr.str();
  out.reserve(out.size() + offset * 8);
  for (const auto& p : ps)
    for (double v : p.value.values()) detail::put_le(out, v);
  return out;
}

// Hash of parameter values only (names, shapes and values in LE byte order).
inline std::uint64_t parameter_hash(const ParameterSet& ps) {
  std::string s = serialize_parameters(ps);
  return fnv1a(s.data(), s.size());
}

inline void save_checkpoint(const std::string& path, const ParameterSet& ps, const CheckpointMeta& meta = {}) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open for writing: " + path);
  const std::string bytes = serialize_parameters(ps, meta);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("write failed: " + path);
}

// Loads values into an existing ParameterSet whose names and shapes must
// match the file exactly.
inline CheckpointMeta deserialize_parameters(const std::string& bytes, ParameterSet& ps) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw CheckpointError("truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) throw CheckpointError("bad magic (expected '" + std::string(kCheckpointMagic) + "')");
  CheckpointMeta meta;
  struct Entry { std::string name; Shape shape; std::size_t offset; };
  std::vector<Entry> entries;
  std::size_t total = 0;
  for (;;) {
    std::istringstream ls(next_line());
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls >> std::ws, v);
      meta[k] = v;
    } else if (tag == "param") {
      Entry e;
      std::string group, dims;
      ls >> e.name >> group >> dims >> e.offset;
      if (!ls) throw CheckpointError("malformed param line for '" + e.name + "'");
      auto x = dims.find('x');
      e.shape.push_back(std::stoul(dims.substr(0, x)));
      if (x != std::string::npos) e.shape.push_back(std::stoul(dims.substr(x + 1)));
      entries.push_back(std::move(e));
    } else if (tag == "end") {
      ls >> total;
      break;
    } else {
      throw CheckpointError("unexpected header line tag '" + tag + "'");
    }
  }
  if (bytes.size() - pos != total * 8)
    throw CheckpointError("payload size " + std::to_string(bytes.size() - pos) + " != " + std::to_string(total * 8));
  if (entries.size() != ps.size())
    throw CheckpointError("parameter count " + std::to_string(entries.size()) + " != model " + std::to_string(ps.size()));
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (const auto& e : entries) {
    auto& p = ps[ps.index(e.name)];
    if (p.value.shape() != e.shape)
      throw CheckpointError("shape mismatch for " + e.name + ": file " + shape_str(e.shape) + " model " +
                            shape_str(p.value.shape()));
    if (e.offset + p.value.size() > total) throw CheckpointError("offset out of range for " + e.name);
    for (std::size_t j = 0; j < p.value.size(); ++j) p.value[j] = detail::get_le(data + 8 * (e.offset + j));
  }
  return meta;
}

inline CheckpointMeta load_checkpoint(const std::string& path, ParameterSet& ps) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_parameters(bytes, ps);
}

}  // namespace takead::diffnum
