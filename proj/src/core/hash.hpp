#pragma once

#include <cstdint>
#include <string>

namespace qct {

// FNV-1a 64; cheap content fingerprint for the run manifest.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
    const uint64_t h = fnv1a64(bytes.data(), bytes.size());
    char buf[19];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

uint64_t fnv1a64_file(const std::string& path);
std::string fnv1a64_file_hex(const std::string& path);

}  // namespace qct
