#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace vmstab {

// 64-bit FNV-1a, used for config and grid fingerprints in reports.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::vector<double>& v, std::uint64_t h = 1469598103934665603ull) {
    return fnv1a(v.data(), v.size() * sizeof(double), h);
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
    return fnv1a(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 15u];
    return s;
}

}  // namespace vmstab
