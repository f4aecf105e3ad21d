// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gotok/binary_io.hpp"
#include "gotok/error.hpp"

namespace gotok {

/// Patch features of one sampled frame: an n_p x n_p x d_v grid stored
/// row-major as (row, col, channel). Values are kept at 32-bit precision;
/// consumers widen to double.
class FrameFeatureMap {
public:
    FrameFeatureMap() = default;

    FrameFeatureMap(std::string video_id, std::uint32_t frame_slot, int n_p, int d_v)
        : video_id_(std::move(video_id)), frame_slot_(frame_slot), n_p_(n_p), d_v_(d_v) {
        if (n_p < 1 || d_v < 1)
            throw ValidationError("feature map dims must be positive, got n_p=" + std::to_string(n_p) +
                                  " d_v=" + std::to_string(d_v));
        values_.assign(static_cast<std::size_t>(n_p) * n_p * d_v, 0.0f);
    }

    const std::string& video_id() const noexcept { return video_id_; }
    std::uint32_t frame_slot() const noexcept { return frame_slot_; }
    int n_p() const noexcept { return n_p_; }
    int d_v() const noexcept { return d_v_; }
    int patch_count() const noexcept { return n_p_ * n_p_; }

    float& at(int row, int col, int ch) { return values_[index(row, col, ch)]; }
    float at(int row, int col, int ch) const { return values_[index(row, col, ch)]; }

    /// Feature vector of patch `flat` (= row * n_p + col).
    std::span<float> patch(int flat) {
        return {values_.data() + static_cast<std::size_t>(flat) * d_v_, static_cast<std::size_t>(d_v_)};
    }
    std::span<const float> patch(int flat) const {
        return {values_.data() + static_cast<std::size_t>(flat) * d_v_, static_cast<std::size_t>(d_v_)};
    }

    std::span<float> values() noexcept { return values_; }
    std::span<const float> values() const noexcept { return values_; }

    bool all_finite() const noexcept {
        for (float v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const FrameFeatureMap&) const = default;

private:
    std::size_t index(int row, int col, int ch) const noexcept {
        return (static_cast<std::size_t>(row) * n_p_ + col) * d_v_ + ch;
    }

    std::string video_id_;
    std::uint32_t frame_slot_ = 0;
    int n_p_ = 0;
    int d_v_ = 0;
    std::vector<float> values_;
};

/// A frozen visual encoder: fixed output geometry, deterministic, and no
/// trainable state. Anything that turns a frame description into a feature
/// map qualifies.
template <typename E, typename Input>
concept VisualEncoder = requires(const E& enc, const Input& in) {
    { enc.n_p() } -> std::convertible_to<int>;
    { enc.d_v() } -> std::convertible_to<int>;
    { enc.encode(in) } -> std::same_as<FrameFeatureMap>;
};

// ---------------------------------------------------------------------------
// GOFM binary format (little-endian):
//   "GOFM" | u16 version=1 | u16 n_p | u32 d_v | u32 frame_slot |
//   u16 id_len | id bytes | n_p*n_p*d_v float32 (row, col, channel)
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kGofmVersion = 1;
inline constexpr std::uint64_t kGofmMaxValues = std::uint64_t{1} << 28;

class GofmError : public ValidationError {
public:
    enum class Kind { BadMagic, BadVersion, Truncated, DimensionOverflow };
    GofmError(Kind kind, const std::string& what) : ValidationError("GOFM: " + what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

inline std::size_t gofm_header_size(const FrameFeatureMap& map) {
    return 4 + 2 + 2 + 4 + 4 + 2 + map.video_id().size();
}

/// Returns the number of bytes written.
inline std::size_t write_gofm(const FrameFeatureMap& map, std::ostream& sink) {
    if (map.n_p() < 1 || map.n_p() > std::numeric_limits<std::uint16_t>::max())
        throw ValidationError("GOFM: n_p out of range");
    if (map.video_id().size() > std::numeric_limits<std::uint16_t>::max())
        throw ValidationError("GOFM: video_id longer than 65535 bytes");
    if (!map.all_finite()) throw ValidationError("GOFM: feature map contains a non-finite value");

    sink.write("GOFM", 4);
    binary::put(sink, kGofmVersion);
    binary::put(sink, static_cast<std::uint16_t>(map.n_p()));
    binary::put(sink, static_cast<std::uint32_t>(map.d_v()));
    binary::put(sink, map.frame_slot());
    binary::put(sink, static_cast<std::uint16_t>(map.video_id().size()));
    sink.write(map.video_id().data(), static_cast<std::streamsize>(map.video_id().size()));
    for (float v : map.values()) binary::put_f32(sink, v);
    if (!sink) throw IoError("GOFM: write failed");
    return gofm_header_size(map) + map.values().size() * sizeof(float);
}

inline FrameFeatureMap read_gofm(std::istream& source) {
    using Kind = GofmError::Kind;
    char magic[4] = {};
    source.read(magic, 4);
    if (source.gcount() != 4) throw GofmError(Kind::Truncated, "stream ends inside the magic");
    if (std::string(magic, 4) != "GOFM") throw GofmError(Kind::BadMagic, "bad magic '" + std::string(magic, 4) + "'");

    std::uint16_t version = 0, n_p = 0, id_len = 0;
    std::uint32_t d_v = 0, slot = 0;
    if (!binary::get(source, version)) throw GofmError(Kind::Truncated, "truncated header");
    if (version != kGofmVersion) throw GofmError(Kind::BadVersion, "unsupported version " + std::to_string(version));
    if (!binary::get(source, n_p) || !binary::get(source, d_v) || !binary::get(source, slot) ||
        !binary::get(source, id_len))
        throw GofmError(Kind::Truncated, "truncated header");

    const std::uint64_t count = std::uint64_t{n_p} * n_p * d_v;
    if (n_p == 0 || d_v == 0 || d_v > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
        count > kGofmMaxValues)
        throw GofmError(Kind::DimensionOverflow,
                        "declared dims n_p=" + std::to_string(n_p) + " d_v=" + std::to_string(d_v) + " out of range");

    std::string id(id_len, '\0');
    source.read(id.data(), id_len);
    if (source.gcount() != id_len) throw GofmError(Kind::Truncated, "truncated video id");

    FrameFeatureMap map(std::move(id), slot, n_p, static_cast<int>(d_v));
    auto values = map.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!binary::get_f32(source, values[i]))
            throw GofmError(Kind::Truncated,
                            "payload truncated after " + std::to_string(i) + " of " + std::to_string(count) + " values");
    }
    return map;
}

}  // namespace gotok
