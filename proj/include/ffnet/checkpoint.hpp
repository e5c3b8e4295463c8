#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "ffnet/errors.hpp"
#include "ffnet/graph.hpp"

namespace ffnet {

// sha-256 digest, used for the 32-byte architecture fingerprint
std::array<std::uint8_t, 32> sha256(const void* data, std::size_t len);

// hash of NetworkSpec::canonical_text()
std::array<std::uint8_t, 32> spec_fingerprint(const NetworkSpec& spec);

// Binary layout (all integers little-endian):
//   magic "FFNT" | u32 version=1 | u64 iteration | fingerprint (32 bytes) |
//   u32 tensor count | per tensor: u16 name length, UTF-8 name, u8 rank,
//   rank x u32 dims, f32 payload.
// Parameter tensors ("<layer>.w", "<layer>.b") come first in store order,
// momentum tensors follow with an extra ".m" suffix.
void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                     const ParamStore& params, std::uint64_t iteration);

// verifies magic, version and fingerprint, then restores parameters and
// momentum into `params` (which must already have the spec's layout).
// returns the stored iteration counter.
// throws format_error / spec_mismatch_error / io_error.
std::uint64_t load_checkpoint(const std::string& path, const NetworkSpec& spec,
                              ParamStore& params);

}  // namespace ffnet
