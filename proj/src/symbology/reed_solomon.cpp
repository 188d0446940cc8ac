#include "udi/symbology/reed_solomon.hpp"

#include <algorithm>

#include "udi/error.hpp"

namespace udi::symbology {

Gf256::Gf256() {
  unsigned x = 1;
  for (int i = 0; i < 255; ++i) {
    exp_[i] = static_cast<std::uint8_t>(x);
    log_[x] = i;
    x <<= 1;
    if (x & 0x100) x ^= kPrimitive;
  }
  for (int i = 255; i < 512; ++i) exp_[i] = exp_[i - 255];
  log_[0] = -1;
}

const Gf256& Gf256::instance() {
  static const Gf256 field;
  return field;
}

std::uint8_t Gf256::div(std::uint8_t a, std::uint8_t b) const {
  if (b == 0) fail(ErrorCode::InvalidInput, "GF(256) division by zero");
  if (a == 0) return 0;
  return exp_[(log_[a] + 255 - log_[b]) % 255];
}

std::uint8_t Gf256::inv(std::uint8_t a) const { return div(1, a); }

std::uint8_t Gf256::pow_alpha(int power) const noexcept { return exp_[((power % 255) + 255) % 255]; }

int Gf256::log(std::uint8_t a) const {
  if (a == 0) fail(ErrorCode::InvalidInput, "log of zero in GF(256)");
  return log_[a];
}

Bytes CodewordBlock::codewords() const {
  Bytes out = data;
  out.insert(out.end(), ecc.begin(), ecc.end());
  return out;
}

namespace {

using Poly = std::vector<std::uint8_t>;  // ascending powers

std::uint8_t eval_ascending(const Gf256& gf, const Poly& p, std::uint8_t x) {
  std::uint8_t acc = 0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = gf.mul(acc, x) ^ *it;
  return acc;
}

/// S_j = r(alpha^j) for j = 1..n, with codeword[0] the highest-degree coefficient.
Poly syndromes(const Gf256& gf, const Bytes& codeword, int n) {
  Poly s(n);
  for (int j = 0; j < n; ++j) {
    const std::uint8_t x = gf.pow_alpha(j + 1);
    std::uint8_t acc = 0;
    for (std::uint8_t c : codeword) acc = gf.mul(acc, x) ^ c;
    s[j] = acc;
  }
  return s;
}

Poly berlekamp_massey(const Gf256& gf, const Poly& s) {
  Poly c{1}, b{1};
  int l = 0, m = 1;
  std::uint8_t bd = 1;
  for (std::size_t n = 0; n < s.size(); ++n) {
    std::uint8_t d = s[n];
    for (int i = 1; i <= l && i < static_cast<int>(c.size()); ++i) d ^= gf.mul(c[i], s[n - i]);
    if (d == 0) {
      ++m;
      continue;
    }
    const std::uint8_t coef = gf.div(d, bd);
    Poly t = c;
    if (c.size() < b.size() + m) c.resize(b.size() + m, 0);
    for (std::size_t i = 0; i < b.size(); ++i) c[i + m] ^= gf.mul(coef, b[i]);
    if (2 * l <= static_cast<int>(n)) {
      l = static_cast<int>(n) + 1 - l;
      b = std::move(t);
      bd = d;
      m = 1;
    } else {
      ++m;
    }
  }
  while (c.size() > 1 && c.back() == 0) c.pop_back();
  return c;
}

}  // namespace

Bytes rs_generator(int ecc_len) {
  const Gf256& gf = Gf256::instance();
  Bytes g{1};  // descending
  for (int i = 1; i <= ecc_len; ++i) {
    const std::uint8_t root = gf.pow_alpha(i);
    Bytes next(g.size() + 1, 0);
    for (std::size_t k = 0; k < g.size(); ++k) {
      next[k] ^= g[k];
      next[k + 1] ^= gf.mul(g[k], root);
    }
    g = std::move(next);
  }
  return g;
}

CodewordBlock rs_encode(std::span<const std::uint8_t> data, int ecc_len) {
  if (data.empty()) fail(ErrorCode::EmptyData, "Reed-Solomon encode of empty data");
  if (ecc_len < 1) fail(ErrorCode::InvalidInput, "ecc_len must be at least 1");
  if (data.size() + static_cast<std::size_t>(ecc_len) > 255) {
    fail(ErrorCode::InvalidInput, "block longer than 255 codewords");
  }
  const Gf256& gf = Gf256::instance();
  const Bytes g = rs_generator(ecc_len);

  // LFSR division: the remainder register holds ecc_len coefficients.
  Bytes rem(ecc_len, 0);
  for (std::uint8_t d : data) {
    const std::uint8_t feedback = d ^ rem[0];
    std::rotate(rem.begin(), rem.begin() + 1, rem.end());
    rem.back() = 0;
    if (feedback != 0) {
      for (int k = 0; k < ecc_len; ++k) rem[k] ^= gf.mul(feedback, g[k + 1]);
    }
  }
  return CodewordBlock{Bytes(data.begin(), data.end()), std::move(rem)};
}

RsDecodeResult rs_decode(const CodewordBlock& block) {
  const int nsym = static_cast<int>(block.ecc.size());
  if (block.data.empty()) fail(ErrorCode::EmptyData, "Reed-Solomon decode of empty data");
  if (nsym < 1) fail(ErrorCode::InvalidInput, "block carries no ECC codewords");
  Bytes cw = block.codewords();
  const int n = static_cast<int>(cw.size());
  if (n > 255) fail(ErrorCode::InvalidInput, "block longer than 255 codewords");

  const Gf256& gf = Gf256::instance();
  const Poly s = syndromes(gf, cw, nsym);
  if (std::all_of(s.begin(), s.end(), [](std::uint8_t v) { return v == 0; })) {
    return {block.data, 0};
  }

  const Poly lambda = berlekamp_massey(gf, s);
  const int num_errors = static_cast<int>(lambda.size()) - 1;
  if (num_errors == 0 || 2 * num_errors > nsym) {
    fail(ErrorCode::TooManyErrors, "error locator degree " + std::to_string(num_errors) + " exceeds capacity");
  }

  // Chien search over the (possibly shortened) codeword positions.
  std::vector<int> positions;
  for (int i = 0; i < n; ++i) {
    const int power = n - 1 - i;
    if (eval_ascending(gf, lambda, gf.pow_alpha(-power)) == 0) positions.push_back(i);
  }
  if (static_cast<int>(positions.size()) != num_errors) {
    fail(ErrorCode::TooManyErrors, "error locator has " + std::to_string(positions.size()) + " roots in range, expected " +
                                       std::to_string(num_errors));
  }

  // Forney: omega = S(x) * lambda(x) mod x^nsym; e = omega(X^-1) / lambda'(X^-1).
  Poly omega(nsym, 0);
  for (int i = 0; i < nsym; ++i) {
    for (int j = 0; j <= i && j < static_cast<int>(lambda.size()); ++j) omega[i] ^= gf.mul(lambda[j], s[i - j]);
  }
  Poly lambda_prime(lambda.size() > 1 ? lambda.size() - 1 : 1, 0);
  for (std::size_t k = 1; k < lambda.size(); k += 2) lambda_prime[k - 1] = lambda[k];

  for (int i : positions) {
    const std::uint8_t x_inv = gf.pow_alpha(-(n - 1 - i));
    const std::uint8_t denom = eval_ascending(gf, lambda_prime, x_inv);
    if (denom == 0) fail(ErrorCode::TooManyErrors, "degenerate error locator derivative");
    cw[i] ^= gf.div(eval_ascending(gf, omega, x_inv), denom);
  }

  const Poly check = syndromes(gf, cw, nsym);
  if (!std::all_of(check.begin(), check.end(), [](std::uint8_t v) { return v == 0; })) {
    fail(ErrorCode::TooManyErrors, "syndromes nonzero after correction");
  }
  return {Bytes(cw.begin(), cw.begin() + static_cast<long>(block.data.size())), num_errors};
}

}  // namespace udi::symbology
