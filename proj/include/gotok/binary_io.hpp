// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>

namespace gotok::binary {

// Little-endian fixed-width encoding, independent of host byte order.

template <typename T>
    requires std::is_integral_v<T>
void put(std::ostream& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
    out.write(bytes.data(), bytes.size());
}

inline void put_f32(std::ostream& out, float value) {
    put(out, std::bit_cast<std::uint32_t>(value));
}

/// Returns false on short read.
template <typename T>
    requires std::is_integral_v<T>
bool get(std::istream& in, T& value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) return false;
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        u |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
    value = static_cast<T>(u);
    return true;
}

inline bool get_f32(std::istream& in, float& value) {
    std::uint32_t bits = 0;
    if (!get(in, bits)) return false;
    value = std::bit_cast<float>(bits);
    return true;
}

}  // namespace gotok::binary
