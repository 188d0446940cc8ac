#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace udi::symbology {

using Bytes = std::vector<std::uint8_t>;

/// GF(2^8) arithmetic over the ECC200 primitive polynomial
/// x^8 + x^5 + x^3 + x^2 + 1 (0x12D), generator alpha = 2.
class Gf256 {
 public:
  static constexpr unsigned kPrimitive = 0x12D;

  static const Gf256& instance();

  std::uint8_t mul(std::uint8_t a, std::uint8_t b) const noexcept {
    if (a == 0 || b == 0) return 0;
    return exp_[log_[a] + log_[b]];
  }
  std::uint8_t div(std::uint8_t a, std::uint8_t b) const;
  std::uint8_t inv(std::uint8_t a) const;
  /// alpha^power, power taken mod 255.
  std::uint8_t pow_alpha(int power) const noexcept;
  int log(std::uint8_t a) const;

 private:
  Gf256();
  std::array<std::uint8_t, 512> exp_{};
  std::array<int, 256> log_{};
};

struct CodewordBlock {
  Bytes data;
  Bytes ecc;

  bool operator==(const CodewordBlock&) const = default;

  Bytes codewords() const;
};

struct RsDecodeResult {
  Bytes data;
  int corrected = 0;
};

/// Generator polynomial (x - alpha^1)...(x - alpha^n), coefficients from the
/// highest degree down, leading 1 included.
Bytes rs_generator(int ecc_len);

/// Systematic encoding: ecc = data(x) * x^n mod g(x). Throws EmptyData.
CodewordBlock rs_encode(std::span<const std::uint8_t> data, int ecc_len);

/// Corrects up to floor(ecc_len/2) symbol errors at unknown positions.
/// Throws TooManyErrors whenever the result cannot be verified; never returns
/// unverified data.
RsDecodeResult rs_decode(const CodewordBlock& block);

}  // namespace udi::symbology
