#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udi/symbology/reed_solomon.hpp"

namespace udi::symbology {

/// Square boolean grid, row-major, true = dark module.
struct BitMatrix {
  int size = 0;
  std::vector<std::uint8_t> bits;

  BitMatrix() = default;
  explicit BitMatrix(int n) : size(n), bits(static_cast<std::size_t>(n) * n, 0) {}

  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * size + col] != 0; }
  void set(int row, int col, bool dark) { bits[static_cast<std::size_t>(row) * size + col] = dark ? 1 : 0; }

  bool operator==(const BitMatrix&) const = default;
};

/// One ECC200 square symbol with a single data region and a single RS block.
struct SymbolSize {
  int size;
  int data_codewords;
  int ecc_codewords;
};

/// 10x10, 12x12, 14x14, 16x16.
std::span<const SymbolSize> supported_symbol_sizes() noexcept;
/// Throws InvalidInput for an unsupported edge length.
const SymbolSize& symbol_size(int size);

/// Where a module of the symbol comes from.
struct ModuleSource {
  enum class Kind { finder, codeword, fixed_dark, fixed_light } kind;
  int codeword = -1;  // 0-based codeword index for Kind::codeword
  int bit = -1;       // 7 = most significant
};

/// Module-to-codeword assignment for a symbol size, row-major over the full
/// symbol (finder included).
std::vector<ModuleSource> placement_map(int size);

/// True for modules of the L-shaped solid border and the alternating clock
/// track.
bool is_finder_module(int size, int row, int col) noexcept;

/// ASCII encodation without padding: digit pairs -> 130 + value, bytes
/// 0..127 -> value + 1, bytes 128..255 -> upper shift (235) + value - 127.
Bytes ascii_encode(std::string_view payload);

/// Fills up to `capacity` with the pad codeword 129 followed by the
/// position-dependent randomized pads.
Bytes pad_codewords(Bytes codewords, int capacity);

/// Inverse of ascii_encode; stops at the first pad codeword. Throws
/// UnsupportedEncodation.
std::string ascii_decode(std::span<const std::uint8_t> codewords);

/// Picks the smallest supported size unless `size` is given. Throws
/// PayloadTooLarge, InvalidInput.
BitMatrix datamatrix_encode(std::string_view payload, std::optional<int> size = std::nullopt);

/// Throws BadFinderPattern, TooManyErrors, UnsupportedEncodation.
std::string datamatrix_decode(const BitMatrix& matrix);

/// Reads the raw codeword stream (data then ECC) without correction.
Bytes read_codewords(const BitMatrix& matrix);

/// PBM-style text: "P1", "<cols> <rows>", then one line of 0/1 per row.
std::string to_pbm(const BitMatrix& matrix);
/// Throws InvalidInput.
BitMatrix bit_matrix_from_pbm(std::string_view text);

}  // namespace udi::symbology
