#pragma once

#include <cstdint>
#include <filesystem>

#include "noisyq/network.hpp"

namespace noisyq::harness {

/// Text checkpoint: a header (format version, architecture, kind, rng seed,
/// training step) followed by named parameter blocks with 17-significant-
/// digit decimals, so load(save(net)) is forward-equivalent exactly. Files
/// are written atomically.
void checkpoint_save(const nets::QNetwork& net, std::int64_t step, std::uint64_t seed,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  nets::QNetwork net;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

LoadedCheckpoint checkpoint_load(const std::filesystem::path& path);

/// Load that additionally requires the stored network to match an expected
/// architecture (including kind).
LoadedCheckpoint checkpoint_load_expect(const std::filesystem::path& path,
                                        const nets::Arch& expected);

}  // namespace noisyq::harness
