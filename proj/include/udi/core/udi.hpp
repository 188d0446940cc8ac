#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace udi::core {

using Date = std::chrono::year_month_day;

enum class IssuingAgency { gs1 };

/// Device identifier plus production identifiers, as carried by the GS1-style
/// application-identifier string
/// `(01)<14 digits>(11)<YYMMDD>(17)<YYMMDD>(10)<lot>(21)<serial>`.
struct UdiRecord {
  std::string device_identifier;
  Date manufacture_date;
  Date expiry_date;
  std::string lot;
  std::string serial;
  IssuingAgency issuing_agency = IssuingAgency::gs1;

  bool operator==(const UdiRecord&) const = default;
};

/// Check digit for a 13-digit GTIN body: weights 3,1,3,... from the left,
/// result brings the weighted sum to a multiple of ten.
/// Throws NonDigitInput.
int gtin_check_digit(std::string_view digits);

/// True iff `di` is 14 digits and its last digit is the GTIN check digit of
/// the first 13.
bool gtin_valid(std::string_view di) noexcept;

/// Lot/serial alphabet: printable Code 128 set-B characters (0x20..0x7E)
/// minus the parentheses, which delimit application identifiers.
bool is_production_id_char(char c) noexcept;

/// Throws MalformedIdentifier, BadCheckDigit or BadDate when the record
/// violates an invariant.
void validate(const UdiRecord& record);

/// Throws MalformedIdentifier, BadCheckDigit, BadDate.
UdiRecord parse_udi(std::string_view text);

std::string format_udi(const UdiRecord& record);

/// Dates in the identifier string are YYMMDD with years 2000-2099.
Date parse_yymmdd(std::string_view text);
std::string format_yymmdd(Date date);

/// ISO-8601 calendar date (YYYY-MM-DD), used in JSON documents.
std::string format_iso_date(Date date);
Date parse_iso_date(std::string_view text);

}  // namespace udi::core
