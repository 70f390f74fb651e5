#include "cardiosynth/core/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cardiosynth/core/digest.hpp"

namespace cardiosynth {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'C', 'K'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T take(const std::vector<std::uint8_t>& in, std::size_t& pos, std::size_t end) {
  if (pos + sizeof(T) > end) throw FormatError("checkpoint truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[pos + i]) << (8 * i));
  pos += sizeof(T);
  return v;
}

}  // namespace

Checkpoint Checkpoint::make(std::string kind, std::vector<std::uint8_t> blob, const Json& config, int epoch,
                            Json history) {
  Checkpoint c;
  c.network_kind = std::move(kind);
  c.blob = std::move(blob);
  c.config_snapshot = config.dump();
  c.epoch = epoch;
  c.history = std::move(history);
  c.digest = sha256_hex(c.blob);
  return c;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const Json header{{"network_kind", ckpt.network_kind},
                    {"config_snapshot", ckpt.config_snapshot},
                    {"epoch", ckpt.epoch},
                    {"history", ckpt.history},
                    {"digest", ckpt.digest}};
  const std::string h = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, h.size());
  out.insert(out.end(), h.begin(), h.end());
  put<std::uint64_t>(out, ckpt.blob.size());
  out.insert(out.end(), ckpt.blob.begin(), ckpt.blob.end());
  const auto d = sha256(std::span<const std::uint8_t>(out));
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kDigestSize = 32;
  if (bytes.size() < 4 + 4 + 8 + 8 + kDigestSize) throw DigestMismatch("checkpoint digest mismatch (file too short)");
  const std::size_t end = bytes.size() - kDigestSize;
  const auto d = sha256(std::span<const std::uint8_t>(bytes.data(), end));
  if (!std::equal(d.begin(), d.end(), bytes.begin() + static_cast<std::ptrdiff_t>(end)))
    throw DigestMismatch("checkpoint digest mismatch");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint file");
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos, end);
  if (version != kCheckpointVersion) throw FormatError("unknown checkpoint version " + std::to_string(version));
  const auto hlen = take<std::uint64_t>(bytes, pos, end);
  if (pos + hlen > end) throw FormatError("checkpoint header truncated");
  const Json header = Json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + hlen));
  pos += hlen;
  const auto blen = take<std::uint64_t>(bytes, pos, end);
  if (pos + blen != end) throw FormatError("checkpoint blob length mismatch");

  Checkpoint c;
  c.network_kind = header.at("network_kind").get<std::string>();
  c.config_snapshot = header.at("config_snapshot").get<std::string>();
  c.epoch = header.at("epoch").get<int>();
  c.history = header.at("history");
  c.digest = header.at("digest").get<std::string>();
  c.blob.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(end));
  if (sha256_hex(c.blob) != c.digest) throw DigestMismatch("checkpoint blob digest mismatch");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace cardiosynth
