#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "idistill/encoder.hpp"

namespace idistill {

/// Child-seed derivation: every stage hashes its label together with the
/// root seed, so one --seed determines all randomness.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  return encoder::fnv1a64(std::string(label) + "#" + std::to_string(root));
}

}  // namespace idistill
