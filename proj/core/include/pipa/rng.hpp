#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace pipa {

using Rng = std::mt19937_64;

/// splitmix64 finalizer over (root, index); child streams are independent of
/// generation order.
std::uint64_t child_seed(std::uint64_t root, std::uint64_t index);

inline Rng make_rng(std::uint64_t root, std::uint64_t index) { return Rng(child_seed(root, index)); }

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& state);

}  // namespace pipa
