#include "udi/symbology/datamatrix.hpp"

#include <array>
#include <cctype>
#include <tuple>
#include <sstream>

#include "udi/error.hpp"

namespace udi::symbology {

namespace {

constexpr std::array<SymbolSize, 4> kSizes{{{10, 3, 5}, {12, 5, 7}, {14, 8, 10}, {16, 12, 12}}};

constexpr std::uint8_t kPad = 129;
constexpr std::uint8_t kUpperShift = 235;
constexpr std::uint8_t kDigitPairBase = 130;

/// Standard ECC200 module placement over the data region (nrow x ncol).
class Placement {
 public:
  Placement(int nrow, int ncol) : nrow_(nrow), ncol_(ncol), cells_(static_cast<std::size_t>(nrow) * ncol) {
    run();
  }

  struct Cell : ModuleSource {
    bool codeword_set = false;
    bool fixed = false;
    Cell() : ModuleSource{Kind::fixed_light, -1, -1} {}
  };

  const Cell& cell(int row, int col) const { return cells_[static_cast<std::size_t>(row) * ncol_ + col]; }

 private:
  bool empty(int row, int col) const { return !cell(row, col).codeword_set && !cell(row, col).fixed; }
  Cell& at(int row, int col) { return cells_[static_cast<std::size_t>(row) * ncol_ + col]; }

  void module(int row, int col, int chr, int bit) {
    if (row < 0) {
      row += nrow_;
      col += 4 - ((nrow_ + 4) % 8);
    }
    if (col < 0) {
      col += ncol_;
      row += 4 - ((ncol_ + 4) % 8);
    }
    Cell& c = at(row, col);
    c.kind = ModuleSource::Kind::codeword;
    c.codeword = chr;
    c.bit = 8 - bit;  // bit 1 of the placement numbering is the MSB
    c.codeword_set = true;
  }

  void utah(int row, int col, int chr) {
    module(row - 2, col - 2, chr, 1);
    module(row - 2, col - 1, chr, 2);
    module(row - 1, col - 2, chr, 3);
    module(row - 1, col - 1, chr, 4);
    module(row - 1, col, chr, 5);
    module(row, col - 2, chr, 6);
    module(row, col - 1, chr, 7);
    module(row, col, chr, 8);
  }

  void corner1(int chr) {
    module(nrow_ - 1, 0, chr, 1);
    module(nrow_ - 1, 1, chr, 2);
    module(nrow_ - 1, 2, chr, 3);
    module(0, ncol_ - 2, chr, 4);
    module(0, ncol_ - 1, chr, 5);
    module(1, ncol_ - 1, chr, 6);
    module(2, ncol_ - 1, chr, 7);
    module(3, ncol_ - 1, chr, 8);
  }

  void corner2(int chr) {
    module(nrow_ - 3, 0, chr, 1);
    module(nrow_ - 2, 0, chr, 2);
    module(nrow_ - 1, 0, chr, 3);
    module(0, ncol_ - 4, chr, 4);
    module(0, ncol_ - 3, chr, 5);
    module(0, ncol_ - 2, chr, 6);
    module(0, ncol_ - 1, chr, 7);
    module(1, ncol_ - 1, chr, 8);
  }

  void corner3(int chr) {
    module(nrow_ - 3, 0, chr, 1);
    module(nrow_ - 2, 0, chr, 2);
    module(nrow_ - 1, 0, chr, 3);
    module(0, ncol_ - 2, chr, 4);
    module(0, ncol_ - 1, chr, 5);
    module(1, ncol_ - 1, chr, 6);
    module(2, ncol_ - 1, chr, 7);
    module(3, ncol_ - 1, chr, 8);
  }

  void corner4(int chr) {
    module(nrow_ - 1, 0, chr, 1);
    module(nrow_ - 1, ncol_ - 1, chr, 2);
    module(0, ncol_ - 3, chr, 3);
    module(0, ncol_ - 2, chr, 4);
    module(0, ncol_ - 1, chr, 5);
    module(1, ncol_ - 3, chr, 6);
    module(1, ncol_ - 2, chr, 7);
    module(1, ncol_ - 1, chr, 8);
  }

  void run() {
    int chr = 0;
    int row = 4;
    int col = 0;
    do {
      if (row == nrow_ && col == 0) corner1(chr++);
      if (row == nrow_ - 2 && col == 0 && ncol_ % 4 != 0) corner2(chr++);
      if (row == nrow_ - 2 && col == 0 && ncol_ % 8 == 4) corner3(chr++);
      if (row == nrow_ + 4 && col == 2 && ncol_ % 8 == 0) corner4(chr++);
      do {
        if (row < nrow_ && col >= 0 && empty(row, col)) utah(row, col, chr++);
        row -= 2;
        col += 2;
      } while (row >= 0 && col < ncol_);
      row += 1;
      col += 3;
      do {
        if (row >= 0 && col < ncol_ && empty(row, col)) utah(row, col, chr++);
        row += 2;
        col -= 2;
      } while (row < nrow_ && col >= 0);
      row += 3;
      col += 1;
    } while (row < nrow_ || col < ncol_);

    // Unfilled bottom-right 2x2: checkerboard with dark corners.
    if (empty(nrow_ - 1, ncol_ - 1)) {
      for (auto [r, c, dark] : {std::tuple{nrow_ - 1, ncol_ - 1, true}, std::tuple{nrow_ - 2, ncol_ - 2, true},
                                std::tuple{nrow_ - 1, ncol_ - 2, false}, std::tuple{nrow_ - 2, ncol_ - 1, false}}) {
        Cell& cl = at(r, c);
        cl.kind = dark ? ModuleSource::Kind::fixed_dark : ModuleSource::Kind::fixed_light;
        cl.fixed = true;
      }
    }
  }

  int nrow_;
  int ncol_;
  std::vector<Cell> cells_;
};

}  // namespace

std::span<const SymbolSize> supported_symbol_sizes() noexcept { return kSizes; }

const SymbolSize& symbol_size(int size) {
  for (const auto& s : kSizes) {
    if (s.size == size) return s;
  }
  fail(ErrorCode::InvalidInput, "unsupported DataMatrix size " + std::to_string(size));
}

bool is_finder_module(int size, int row, int col) noexcept {
  return row == 0 || col == 0 || row == size - 1 || col == size - 1;
}

std::vector<ModuleSource> placement_map(int size) {
  symbol_size(size);
  const int inner = size - 2;
  const Placement placement(inner, inner);
  std::vector<ModuleSource> out(static_cast<std::size_t>(size) * size, ModuleSource{ModuleSource::Kind::finder});
  for (int r = 0; r < inner; ++r) {
    for (int c = 0; c < inner; ++c) {
      const ModuleSource& src = placement.cell(r, c);
      out[static_cast<std::size_t>(r + 1) * size + (c + 1)] = ModuleSource{src.kind, src.codeword, src.bit};
    }
  }
  return out;
}

namespace {

bool finder_dark(int size, int row, int col) {
  if (col == 0 || row == size - 1) return true;   // solid L
  if (row == 0) return col % 2 == 0;              // top clock track
  return (size - 1 - row) % 2 == 0;               // right clock track
}

}  // namespace

Bytes ascii_encode(std::string_view payload) {
  Bytes out;
  const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const auto b = static_cast<unsigned char>(payload[i]);
    if (i + 1 < payload.size() && is_digit(payload[i]) && is_digit(payload[i + 1])) {
      out.push_back(static_cast<std::uint8_t>(kDigitPairBase + (payload[i] - '0') * 10 + (payload[i + 1] - '0')));
      ++i;
    } else if (b < 128) {
      out.push_back(static_cast<std::uint8_t>(b + 1));
    } else {
      out.push_back(kUpperShift);
      out.push_back(static_cast<std::uint8_t>(b - 127));
    }
  }
  return out;
}

Bytes pad_codewords(Bytes codewords, int capacity) {
  if (static_cast<int>(codewords.size()) < capacity) codewords.push_back(kPad);
  while (static_cast<int>(codewords.size()) < capacity) {
    const int position = static_cast<int>(codewords.size()) + 1;
    int v = kPad + ((149 * position) % 253) + 1;
    if (v > 254) v -= 254;
    codewords.push_back(static_cast<std::uint8_t>(v));
  }
  return codewords;
}

std::string ascii_decode(std::span<const std::uint8_t> codewords) {
  std::string out;
  for (std::size_t i = 0; i < codewords.size(); ++i) {
    const std::uint8_t c = codewords[i];
    if (c == kPad) break;
    if (c >= 1 && c <= 128) {
      out += static_cast<char>(c - 1);
    } else if (c >= kDigitPairBase && c <= 229) {
      const int v = c - kDigitPairBase;
      out += static_cast<char>('0' + v / 10);
      out += static_cast<char>('0' + v % 10);
    } else if (c == kUpperShift) {
      if (i + 1 >= codewords.size()) fail(ErrorCode::UnsupportedEncodation, "upper shift at end of data");
      const std::uint8_t next = codewords[++i];
      if (next < 1 || next > 128) fail(ErrorCode::UnsupportedEncodation, "invalid codeword after upper shift");
      out += static_cast<char>(next + 127);
    } else {
      fail(ErrorCode::UnsupportedEncodation, "codeword " + std::to_string(c) + " is outside ASCII encodation");
    }
  }
  return out;
}

BitMatrix datamatrix_encode(std::string_view payload, std::optional<int> size) {
  Bytes data = ascii_encode(payload);
  const SymbolSize* chosen = nullptr;
  if (size) {
    chosen = &symbol_size(*size);
    if (static_cast<int>(data.size()) > chosen->data_codewords) {
      fail(ErrorCode::PayloadTooLarge, std::to_string(data.size()) + " data codewords exceed the " +
                                           std::to_string(chosen->data_codewords) + " of a " + std::to_string(*size) +
                                           "x" + std::to_string(*size) + " symbol");
    }
  } else {
    for (const auto& s : kSizes) {
      if (static_cast<int>(data.size()) <= s.data_codewords) {
        chosen = &s;
        break;
      }
    }
    if (chosen == nullptr) {
      fail(ErrorCode::PayloadTooLarge, std::to_string(data.size()) + " data codewords exceed the largest supported symbol");
    }
  }

  data = pad_codewords(std::move(data), chosen->data_codewords);
  const Bytes codewords = rs_encode(data, chosen->ecc_codewords).codewords();

  BitMatrix m(chosen->size);
  const auto map = placement_map(chosen->size);
  for (int r = 0; r < m.size; ++r) {
    for (int c = 0; c < m.size; ++c) {
      const ModuleSource& src = map[static_cast<std::size_t>(r) * m.size + c];
      switch (src.kind) {
        case ModuleSource::Kind::finder:
          m.set(r, c, finder_dark(m.size, r, c));
          break;
        case ModuleSource::Kind::codeword:
          m.set(r, c, (codewords[src.codeword] >> src.bit) & 1);
          break;
        case ModuleSource::Kind::fixed_dark:
          m.set(r, c, true);
          break;
        case ModuleSource::Kind::fixed_light:
          m.set(r, c, false);
          break;
      }
    }
  }
  return m;
}

Bytes read_codewords(const BitMatrix& matrix) {
  const SymbolSize& s = symbol_size(matrix.size);
  if (matrix.bits.size() != static_cast<std::size_t>(matrix.size) * matrix.size) {
    fail(ErrorCode::InvalidInput, "bit matrix storage does not match its size");
  }
  Bytes codewords(static_cast<std::size_t>(s.data_codewords + s.ecc_codewords), 0);
  const auto map = placement_map(matrix.size);
  for (int r = 0; r < matrix.size; ++r) {
    for (int c = 0; c < matrix.size; ++c) {
      const ModuleSource& src = map[static_cast<std::size_t>(r) * matrix.size + c];
      if (src.kind == ModuleSource::Kind::codeword && matrix.at(r, c)) {
        codewords[src.codeword] |= static_cast<std::uint8_t>(1u << src.bit);
      }
    }
  }
  return codewords;
}

std::string datamatrix_decode(const BitMatrix& matrix) {
  bool size_ok = false;
  for (const auto& s : kSizes) size_ok = size_ok || s.size == matrix.size;
  if (!size_ok) fail(ErrorCode::BadFinderPattern, "unsupported symbol size " + std::to_string(matrix.size));
  for (int r = 0; r < matrix.size; ++r) {
    for (int c = 0; c < matrix.size; ++c) {
      if (is_finder_module(matrix.size, r, c) && matrix.at(r, c) != finder_dark(matrix.size, r, c)) {
        fail(ErrorCode::BadFinderPattern, "finder module (" + std::to_string(r) + "," + std::to_string(c) + ") is wrong");
      }
    }
  }
  const SymbolSize& s = symbol_size(matrix.size);
  const Bytes cw = read_codewords(matrix);
  CodewordBlock block{Bytes(cw.begin(), cw.begin() + s.data_codewords), Bytes(cw.begin() + s.data_codewords, cw.end())};
  const RsDecodeResult fixed = rs_decode(block);
  return ascii_decode(fixed.data);
}

std::string to_pbm(const BitMatrix& matrix) {
  std::string out = "P1\n" + std::to_string(matrix.size) + " " + std::to_string(matrix.size) + "\n";
  for (int r = 0; r < matrix.size; ++r) {
    for (int c = 0; c < matrix.size; ++c) out += matrix.at(r, c) ? '1' : '0';
    out += '\n';
  }
  return out;
}

BitMatrix bit_matrix_from_pbm(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  int cols = 0;
  int rows = 0;
  if (!(in >> magic >> cols >> rows) || magic != "P1" || cols != rows || cols <= 0 || cols > 144) {
    fail(ErrorCode::InvalidInput, "expected 'P1 <n> <n>' header for a square matrix");
  }
  BitMatrix m(cols);
  std::size_t filled = 0;
  char ch = 0;
  while (in.get(ch)) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (ch != '0' && ch != '1') fail(ErrorCode::InvalidInput, std::string("unexpected character '") + ch + "' in raster");
    if (filled >= m.bits.size()) fail(ErrorCode::InvalidInput, "raster longer than header size");
    m.bits[filled++] = ch == '1' ? 1 : 0;
  }
  if (filled != m.bits.size()) fail(ErrorCode::InvalidInput, "raster shorter than header size");
  return m;
}

}  // namespace udi::symbology
