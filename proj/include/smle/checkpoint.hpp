// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Binary checkpoint container.
//
//   bytes 0..3    magic "SMLE"
//   bytes 4..7    format version, uint32 little-endian
//   bytes 8..15   header length in bytes, uint64 little-endian
//   header        UTF-8 JSON: kind, meta, and per-network topology plus the
//                 ordered tensor list (name, shape, role, dtype)
//   payload       float32 little-endian tensor data in header order,
//                 each tensor row-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "smle/neural.hpp"

namespace smle {

inline constexpr char kCheckpointMagic[4] = {'S', 'M', 'L', 'E'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedNetwork {
  std::string name;
  Network network;
};

struct Checkpoint {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedNetwork> networks;

  const Network& network(const std::string& name) const;
};

nlohmann::json topology_to_json(const Topology& topology);
Topology topology_from_json(const nlohmann::json& j);

/// FNV-1a 64 over the float32 little-endian parameter bytes, as hex.
std::string network_checksum(const Network& network);

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace smle
