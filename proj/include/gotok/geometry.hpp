// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "gotok/error.hpp"

namespace gotok {

/// Axis-aligned box in normalized image coordinates (fractions of W and H).
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const noexcept { return x2 - x1; }
    double height() const noexcept { return y2 - y1; }
    double center_x() const noexcept { return 0.5 * (x1 + x2); }
    double center_y() const noexcept { return 0.5 * (y1 + y2); }
    bool degenerate() const noexcept { return !(x2 > x1) || !(y2 > y1); }

    bool valid() const noexcept {
        return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
               0.0 <= x1 && x1 <= x2 && x2 <= 1.0 && 0.0 <= y1 && y1 <= y2 && y2 <= 1.0;
    }

    bool contains(const BBox& o) const noexcept {
        return x1 <= o.x1 && y1 <= o.y1 && o.x2 <= x2 && o.y2 <= y2;
    }

    auto operator<=>(const BBox&) const = default;
};

inline void require_valid(const BBox& b) {
    if (!b.valid())
        throw ValidationError("bbox (" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " +
                              std::to_string(b.x2) + ", " + std::to_string(b.y2) +
                              ") violates 0 <= x1 <= x2 <= 1, 0 <= y1 <= y2 <= 1");
}

/// Square grid of n_p x n_p patches tiling the unit square. Cell (r, c)
/// spans [c/n_p, (c+1)/n_p) x [r/n_p, (r+1)/n_p); the last row and column
/// are closed at 1.0.
struct PatchGrid {
    int n_p = 1;

    explicit PatchGrid(int patches_per_side) : n_p(patches_per_side) {
        if (n_p < 1) throw ValidationError("patch grid needs n_p >= 1, got " + std::to_string(n_p));
    }

    int cell_count() const noexcept { return n_p * n_p; }
    double lo(int i) const noexcept { return static_cast<double>(i) / n_p; }
    double hi(int i) const noexcept { return static_cast<double>(i + 1) / n_p; }

    /// Index of the cell containing coordinate v, with v == 1.0 in the last cell.
    int cell_of(double v) const noexcept {
        int i = static_cast<int>(std::floor(v * n_p));
        return std::clamp(i, 0, n_p - 1);
    }
};

struct PatchIndex {
    int row = 0;
    int col = 0;
    auto operator<=>(const PatchIndex&) const = default;
};

/// Distinct patch cells, kept in row-major order.
class PatchSet {
public:
    PatchSet() = default;

    /// Sorts and deduplicates.
    explicit PatchSet(std::vector<PatchIndex> cells) : cells_(std::move(cells)) {
        std::sort(cells_.begin(), cells_.end());
        cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
    }

    std::size_t size() const noexcept { return cells_.size(); }
    bool empty() const noexcept { return cells_.empty(); }
    auto begin() const noexcept { return cells_.begin(); }
    auto end() const noexcept { return cells_.end(); }
    const std::vector<PatchIndex>& cells() const noexcept { return cells_; }

    bool contains(PatchIndex p) const { return std::binary_search(cells_.begin(), cells_.end(), p); }

    bool is_subset_of(const PatchSet& other) const {
        return std::includes(other.cells_.begin(), other.cells_.end(), cells_.begin(), cells_.end());
    }

    /// Row-major flat indices (row * n_p + col).
    std::vector<int> flat(int n_p) const {
        std::vector<int> out;
        out.reserve(cells_.size());
        for (auto [r, c] : cells_) out.push_back(r * n_p + c);
        return out;
    }

    bool operator==(const PatchSet&) const = default;

private:
    std::vector<PatchIndex> cells_;
};

/// Pixel box -> normalized box. Reorders swapped corners.
inline BBox normalize_bbox(const std::array<double, 4>& px, double image_width, double image_height) {
    if (!(image_width > 0.0) || !std::isfinite(image_width))
        throw ValidationError("image width must be > 0, got " + std::to_string(image_width));
    if (!(image_height > 0.0) || !std::isfinite(image_height))
        throw ValidationError("image height must be > 0, got " + std::to_string(image_height));

    static constexpr std::array<const char*, 4> names{"x1", "y1", "x2", "y2"};
    for (std::size_t i = 0; i < 4; ++i) {
        const double limit = (i % 2 == 0) ? image_width : image_height;
        if (!std::isfinite(px[i]) || px[i] < 0.0 || px[i] > limit)
            throw ValidationError(std::string("bbox ") + names[i] + " = " + std::to_string(px[i]) +
                                  " outside [0, " + std::to_string(limit) + "]");
    }
    BBox b{px[0] / image_width, px[1] / image_height, px[2] / image_width, px[3] / image_height};
    if (b.x1 > b.x2) std::swap(b.x1, b.x2);
    if (b.y1 > b.y2) std::swap(b.y1, b.y2);
    return b;
}

/// Overlap length of [a0, a1] with [b0, b1]; <= 0 when they only touch or are disjoint.
inline double overlap_1d(double a0, double a1, double b0, double b1) noexcept {
    return std::min(a1, b1) - std::max(a0, b0);
}

/// Cells whose rectangle meets the box with positive area. A zero-area box
/// maps to the single cell holding its center, so the result is never empty.
inline PatchSet covered_patches(const BBox& bbox, const PatchGrid& grid) {
    require_valid(bbox);
    std::vector<int> rows;
    std::vector<int> cols;
    if (!bbox.degenerate()) {
        for (int i = 0; i < grid.n_p; ++i) {
            if (overlap_1d(bbox.x1, bbox.x2, grid.lo(i), grid.hi(i)) > 0.0) cols.push_back(i);
            if (overlap_1d(bbox.y1, bbox.y2, grid.lo(i), grid.hi(i)) > 0.0) rows.push_back(i);
        }
    }
    std::vector<PatchIndex> cells;
    cells.reserve(rows.size() * cols.size());
    for (int r : rows)
        for (int c : cols) cells.push_back({r, c});
    if (cells.empty()) cells.push_back({grid.cell_of(bbox.center_y()), grid.cell_of(bbox.center_x())});
    return PatchSet(std::move(cells));
}

struct ShiftDirection {
    int sign_x = 1;  ///< -1 or +1
    int sign_y = 1;  ///< -1 or +1
};

/// Translates the box by `fraction` of the image width/height, clamping each
/// coordinate to [0, 1].
inline BBox shift_bbox(const BBox& bbox, double fraction, ShiftDirection dir) {
    require_valid(bbox);
    if (!(fraction >= 0.0)) throw ValidationError("shift fraction must be >= 0");
    if (std::abs(dir.sign_x) != 1 || std::abs(dir.sign_y) != 1)
        throw ValidationError("shift direction components must be -1 or +1");
    if (fraction == 0.0) return bbox;
    const double dx = dir.sign_x * fraction;
    const double dy = dir.sign_y * fraction;
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return BBox{clamp01(bbox.x1 + dx), clamp01(bbox.y1 + dy), clamp01(bbox.x2 + dx), clamp01(bbox.y2 + dy)};
}

}  // namespace gotok
