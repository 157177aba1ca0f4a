// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "smle/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace smle {
namespace {

using nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

std::uint64_t get_le(std::istream& in, int bytes) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), bytes);
  if (!in) throw Error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

// Row-major float32 bytes of one tensor.
template <typename Fn>
void for_each_float(const Network& net, Fn&& fn) {
  for (std::size_t i = 0; i < net.tensors().size(); ++i) {
    const auto t = net.tensor(i);
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        fn(std::bit_cast<std::uint32_t>(static_cast<float>(t(r, c))));
  }
}

json network_header(const NamedNetwork& named) {
  json tensors = json::array();
  for (const TensorInfo& t : named.network.tensors())
    tensors.push_back({{"name", named.name + "/" + t.name},
                       {"shape", {t.rows, t.cols}},
                       {"role", t.role},
                       {"dtype", "float32"}});
  return {{"name", named.name},
          {"topology", topology_to_json(named.network.topology())},
          {"tensors", tensors}};
}

}  // namespace

const Network& Checkpoint::network(const std::string& name) const {
  for (const NamedNetwork& n : networks)
    if (n.name == name) return n.network;
  throw Error("checkpoint has no network named '" + name + "'");
}

json topology_to_json(const Topology& topology) {
  return {{"input_dim", topology.input_dim},
          {"hidden", topology.hidden},
          {"output_dim", topology.output_dim},
          {"activation", to_string(topology.activation)}};
}

Topology topology_from_json(const json& j) {
  Topology t;
  t.input_dim = j.at("input_dim").get<int>();
  t.hidden = j.at("hidden").get<std::vector<int>>();
  t.output_dim = j.at("output_dim").get<int>();
  t.activation = parse_activation(j.at("activation").get<std::string>());
  t.validate();
  return t;
}

std::string network_checksum(const Network& network) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for_each_float(network, [&](std::uint32_t bits) {
    for (int i = 0; i < 4; ++i) {
      hash ^= (bits >> (8 * i)) & 0xff;
      hash *= 0x100000001b3ULL;
    }
  });
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << hash;
  return s.str();
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  json header = {{"format", "smle-checkpoint"},
                 {"kind", checkpoint.kind},
                 {"meta", checkpoint.meta},
                 {"networks", json::array()}};
  for (const NamedNetwork& n : checkpoint.networks)
    header["networks"].push_back(network_header(n));
  const std::string text = header.dump();

  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const NamedNetwork& n : checkpoint.networks)
    for_each_float(n.network, [&](std::uint32_t bits) { put_u32(out, bits); });
  if (!out) throw Error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw Error("checkpoint: bad magic (not an SMLE checkpoint)");
  const auto version = static_cast<std::uint32_t>(get_le(in, 4));
  if (version != kCheckpointVersion)
    throw Error("checkpoint: unsupported format version " + std::to_string(version));
  const std::uint64_t header_len = get_le(in, 8);
  if (header_len > (1ULL << 30)) throw Error("checkpoint: header too large");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error("checkpoint: truncated header");

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: malformed header: ") + e.what());
  }

  Checkpoint cp;
  try {
    cp.kind = header.at("kind").get<std::string>();
    cp.meta = header.at("meta");
    for (const json& nj : header.at("networks")) {
      NamedNetwork named{nj.at("name").get<std::string>(),
                         Network::zeros(topology_from_json(nj.at("topology")))};
      const auto& tensors = nj.at("tensors");
      if (tensors.size() != named.network.tensors().size())
        throw Error("checkpoint: tensor list does not match topology of '" +
                    named.name + "'");
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        const TensorInfo& info = named.network.tensors()[i];
        const auto shape = tensors[i].at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != info.rows || shape[1] != info.cols ||
            tensors[i].at("name").get<std::string>() != named.name + "/" + info.name)
          throw Error("checkpoint: tensor " + std::to_string(i) + " of '" +
                      named.name + "' does not match its topology");
      }
      cp.networks.push_back(std::move(named));
    }
  } catch (const json::exception& e) {
    throw Error(std::string("checkpoint: malformed header: ") + e.what());
  }

  for (NamedNetwork& n : cp.networks) {
    for (std::size_t i = 0; i < n.network.tensors().size(); ++i) {
      auto t = n.network.tensor(i);
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c)
          t(r, c) = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(in, 4)));
    }
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error("checkpoint: trailing bytes after tensor data");
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace smle
