#include "hash.hpp"

#include <fstream>
#include <vector>

#include "errors.hpp"

namespace qct {

uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) h = fnv1a64(buf.data(), static_cast<size_t>(got), h);
    }
    return h;
}

std::string fnv1a64_file_hex(const std::string& path) {
    char buf[19];
    snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64_file(path)));
    return buf;
}

}  // namespace qct
