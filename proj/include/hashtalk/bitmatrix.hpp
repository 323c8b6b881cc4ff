#pragma once

#include <cstdint>
#include <vector>

#include "hashtalk/error.hpp"

namespace hashtalk {

// Dense row-major matrix of binary values: one row per sample, one column
// per code bit.
struct BitMatrix {
    std::size_t n = 0;  // rows (samples)
    std::size_t h = 0;  // columns (bits)
    std::vector<std::uint8_t> bits;

    BitMatrix() = default;
    BitMatrix(std::size_t rows, std::size_t cols)
        : n(rows), h(cols), bits(rows * cols, 0) {}

    std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * h + j]; }
    void set(std::size_t i, std::size_t j, std::uint8_t v) { bits[i * h + j] = v; }
    const std::uint8_t* row(std::size_t i) const { return bits.data() + i * h; }

    std::vector<std::uint8_t> row_vec(std::size_t i) const {
        return std::vector<std::uint8_t>(row(i), row(i) + h);
    }

    // Packs a row into an integer key. Requires h <= 64.
    std::uint64_t row_key(std::size_t i) const {
        if (h > 64) throw Error("BitMatrix::row_key: more than 64 columns");
        std::uint64_t key = 0;
        const std::uint8_t* r = row(i);
        for (std::size_t j = 0; j < h; ++j)
            if (r[j]) key |= (1ULL << j);
        return key;
    }

    // Rows of `left` and `right` stacked side by side.
    static BitMatrix concat_cols(const BitMatrix& left, const BitMatrix& right) {
        if (left.n != right.n)
            throw Error("BitMatrix::concat_cols: row count mismatch");
        BitMatrix out(left.n, left.h + right.h);
        for (std::size_t i = 0; i < left.n; ++i) {
            for (std::size_t j = 0; j < left.h; ++j) out.set(i, j, left.at(i, j));
            for (std::size_t j = 0; j < right.h; ++j)
                out.set(i, left.h + j, right.at(i, j));
        }
        return out;
    }

    BitMatrix select_rows(const std::vector<std::size_t>& idx) const {
        BitMatrix out(idx.size(), h);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < h; ++j) out.set(i, j, at(idx[i], j));
        return out;
    }
};

}  // namespace hashtalk
