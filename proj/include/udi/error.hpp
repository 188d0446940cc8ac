#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace udi {

enum class ErrorCode {
  // identifier model
  MalformedIdentifier,
  BadCheckDigit,
  BadDate,
  NonDigitInput,
  DuplicateLink,
  ProcurementIncomplete,
  // symbologies
  ValueOutOfRange,
  BadBarWidth,
  BarCountOutOfRange,
  UnsupportedCharacter,
  BadStartSymbol,
  BadStopPattern,
  ChecksumMismatch,
  UnknownSymbolPattern,
  UnsupportedEncodation,
  EmptyData,
  TooManyErrors,
  PayloadTooLarge,
  BadFinderPattern,
  // readout
  BadStructuringElement,
  ConstantSignal,
  NoRunsFound,
  AmbiguousModuleWidth,
  DecodeFailed,
  // access control
  AccessDenied,
  UnknownSubject,
  BadSecret,
  ExpiredSession,
  InvalidSession,
  ChainBroken,
  // store / federation
  NotFound,
  StaleWrite,
  MissingRequiredField,
  UnknownField,
  UnitConversionError,
  DuplicateSource,
  InvalidMapping,
  MalformedRow,
  // tooling
  InvalidInput,
  ScenarioFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure surfaced by the library. The code is the
/// stable, machine-readable part; the message is for humans. Failures that
/// were recorded in the audit log carry the sequence number of that entry.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> audit_seq = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        audit_seq_(audit_seq) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> audit_seq() const noexcept { return audit_seq_; }

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> audit_seq_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace udi
