#include "udi/core/udi.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <optional>

#include "udi/error.hpp"

namespace udi::core {

namespace {

constexpr std::size_t kMaxProductionIdLength = 20;

bool all_digits(std::string_view s) noexcept {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int two_digits(std::string_view s) { return (s[0] - '0') * 10 + (s[1] - '0'); }

void check_production_id(std::string_view what, std::string_view value) {
  if (value.empty() || value.size() > kMaxProductionIdLength) {
    fail(ErrorCode::MalformedIdentifier,
         std::string(what) + " must be 1-20 characters, got " + std::to_string(value.size()));
  }
  for (char c : value) {
    if (!is_production_id_char(c)) {
      fail(ErrorCode::MalformedIdentifier,
           std::string(what) + " contains unsupported character code " +
               std::to_string(static_cast<unsigned char>(c)));
    }
  }
}

void check_device_identifier(std::string_view di) {
  if (di.size() != 14 || !all_digits(di)) {
    fail(ErrorCode::MalformedIdentifier, "device identifier must be 14 digits: '" + std::string(di) + "'");
  }
  if (!gtin_valid(di)) {
    fail(ErrorCode::BadCheckDigit, "device identifier '" + std::string(di) + "' fails the mod-10 check");
  }
}

}  // namespace

int gtin_check_digit(std::string_view digits) {
  if (digits.size() != 13) {
    fail(ErrorCode::NonDigitInput, "expected 13 digits, got " + std::to_string(digits.size()) + " characters");
  }
  int sum = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    const char c = digits[i];
    if (c < '0' || c > '9') {
      fail(ErrorCode::NonDigitInput, "non-digit '" + std::string(1, c) + "' at position " + std::to_string(i));
    }
    sum += (c - '0') * (i % 2 == 0 ? 3 : 1);
  }
  return (10 - sum % 10) % 10;
}

bool gtin_valid(std::string_view di) noexcept {
  if (di.size() != 14 || !all_digits(di)) return false;
  int sum = 0;
  for (std::size_t i = 0; i < 13; ++i) sum += (di[i] - '0') * (i % 2 == 0 ? 3 : 1);
  return (10 - sum % 10) % 10 == di[13] - '0';
}

bool is_production_id_char(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x20 && u <= 0x7E && c != '(' && c != ')';
}

Date parse_yymmdd(std::string_view text) {
  if (text.size() != 6 || !all_digits(text)) {
    fail(ErrorCode::BadDate, "expected YYMMDD, got '" + std::string(text) + "'");
  }
  const Date d{std::chrono::year{2000 + two_digits(text.substr(0, 2))},
               std::chrono::month{static_cast<unsigned>(two_digits(text.substr(2, 2)))},
               std::chrono::day{static_cast<unsigned>(two_digits(text.substr(4, 2)))}};
  if (!d.ok()) fail(ErrorCode::BadDate, "not a calendar date: '" + std::string(text) + "'");
  return d;
}

std::string format_yymmdd(Date date) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02d%02u%02u", static_cast<int>(date.year()) % 100,
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::string format_iso_date(Date date) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

Date parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !all_digits(text.substr(0, 4)) ||
      !all_digits(text.substr(5, 2)) || !all_digits(text.substr(8, 2))) {
    fail(ErrorCode::BadDate, "expected YYYY-MM-DD, got '" + std::string(text) + "'");
  }
  int y = 0;
  std::from_chars(text.data(), text.data() + 4, y);
  const Date d{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(two_digits(text.substr(5, 2)))},
               std::chrono::day{static_cast<unsigned>(two_digits(text.substr(8, 2)))}};
  if (!d.ok()) fail(ErrorCode::BadDate, "not a calendar date: '" + std::string(text) + "'");
  return d;
}

void validate(const UdiRecord& record) {
  check_device_identifier(record.device_identifier);
  if (!record.manufacture_date.ok() || !record.expiry_date.ok()) {
    fail(ErrorCode::BadDate, "invalid calendar date");
  }
  const auto in_pivot = [](Date d) { return d.year() >= std::chrono::year{2000} && d.year() <= std::chrono::year{2099}; };
  if (!in_pivot(record.manufacture_date) || !in_pivot(record.expiry_date)) {
    fail(ErrorCode::BadDate, "dates must fall in 2000-2099");
  }
  if (record.expiry_date < record.manufacture_date) {
    fail(ErrorCode::BadDate, "expiry date precedes manufacture date");
  }
  check_production_id("lot", record.lot);
  check_production_id("serial", record.serial);
}

UdiRecord parse_udi(std::string_view text) {
  if (text.empty()) fail(ErrorCode::MalformedIdentifier, "empty identifier");

  std::optional<std::string> di, lot, serial;
  std::optional<Date> manufactured, expires;

  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text.size() - pos < 4 || text[pos] != '(' || text[pos + 3] != ')' ||
        !all_digits(text.substr(pos + 1, 2))) {
      fail(ErrorCode::MalformedIdentifier, "expected '(NN)' application identifier at offset " + std::to_string(pos));
    }
    const std::string_view ai = text.substr(pos + 1, 2);
    const std::size_t value_begin = pos + 4;
    const std::size_t value_end = std::min(text.find('(', value_begin), text.size());
    const std::string_view value = text.substr(value_begin, value_end - value_begin);
    pos = value_end;

    const auto once = [&](const auto& slot) {
      if (slot.has_value()) fail(ErrorCode::MalformedIdentifier, "duplicate application identifier (" + std::string(ai) + ")");
    };
    if (ai == "01") {
      once(di);
      check_device_identifier(value);
      di = std::string(value);
    } else if (ai == "11") {
      once(manufactured);
      manufactured = parse_yymmdd(value);
    } else if (ai == "17") {
      once(expires);
      expires = parse_yymmdd(value);
    } else if (ai == "10") {
      once(lot);
      check_production_id("lot", value);
      lot = std::string(value);
    } else if (ai == "21") {
      once(serial);
      check_production_id("serial", value);
      serial = std::string(value);
    } else {
      fail(ErrorCode::MalformedIdentifier, "unknown application identifier (" + std::string(ai) + ")");
    }
  }

  const std::array<std::pair<bool, const char*>, 5> required{{{di.has_value(), "01"},
                                                              {manufactured.has_value(), "11"},
                                                              {expires.has_value(), "17"},
                                                              {lot.has_value(), "10"},
                                                              {serial.has_value(), "21"}}};
  for (const auto& [present, name] : required) {
    if (!present) fail(ErrorCode::MalformedIdentifier, std::string("missing application identifier (") + name + ")");
  }

  UdiRecord record{*di, *manufactured, *expires, *lot, *serial, IssuingAgency::gs1};
  if (record.expiry_date < record.manufacture_date) {
    fail(ErrorCode::BadDate, "expiry date precedes manufacture date");
  }
  return record;
}

std::string format_udi(const UdiRecord& record) {
  return "(01)" + record.device_identifier + "(11)" + format_yymmdd(record.manufacture_date) + "(17)" +
         format_yymmdd(record.expiry_date) + "(10)" + record.lot + "(21)" + record.serial;
}

}  // namespace udi::core
