#pragma once

#include <cstdint>
#include <string_view>

namespace blockforge {

// FNV-1a, 64-bit. Used for content hashes of serialized state.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace blockforge
