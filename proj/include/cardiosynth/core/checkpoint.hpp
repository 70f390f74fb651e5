#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cardiosynth/core/config.hpp"

namespace cardiosynth {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trained network state plus the exact configuration that produced it.
///
/// The parameter blob is opaque here; `nn::ParamStore` defines its layout.
/// `digest` is the SHA-256 of the blob and is recomputed by `make`.
struct Checkpoint {
  std::string network_kind;
  std::vector<std::uint8_t> blob;
  /// Serialized config, kept verbatim so it round-trips bit-exactly.
  std::string config_snapshot;
  int epoch = 0;
  Json history = Json::array();
  std::string digest;

  static Checkpoint make(std::string kind, std::vector<std::uint8_t> blob, const Json& config, int epoch,
                         Json history = Json::array());
  Json config() const { return Json::parse(config_snapshot); }
  bool operator==(const Checkpoint&) const = default;
};

/// File layout: "CSCK" | u32 version | u64 header length | header JSON |
/// u64 blob length | blob | SHA-256 of everything before it.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
/// Throws DigestMismatch on corruption or truncation, FormatError on an unknown version.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cardiosynth
