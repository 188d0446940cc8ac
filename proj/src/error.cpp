#include "udi/error.hpp"

namespace udi {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedIdentifier:
      return "MalformedIdentifier";
    case ErrorCode::BadCheckDigit:
      return "BadCheckDigit";
    case ErrorCode::BadDate:
      return "BadDate";
    case ErrorCode::NonDigitInput:
      return "NonDigitInput";
    case ErrorCode::DuplicateLink:
      return "DuplicateLink";
    case ErrorCode::ProcurementIncomplete:
      return "ProcurementIncomplete";
    case ErrorCode::ValueOutOfRange:
      return "ValueOutOfRange";
    case ErrorCode::BadBarWidth:
      return "BadBarWidth";
    case ErrorCode::BarCountOutOfRange:
      return "BarCountOutOfRange";
    case ErrorCode::UnsupportedCharacter:
      return "UnsupportedCharacter";
    case ErrorCode::BadStartSymbol:
      return "BadStartSymbol";
    case ErrorCode::BadStopPattern:
      return "BadStopPattern";
    case ErrorCode::ChecksumMismatch:
      return "ChecksumMismatch";
    case ErrorCode::UnknownSymbolPattern:
      return "UnknownSymbolPattern";
    case ErrorCode::UnsupportedEncodation:
      return "UnsupportedEncodation";
    case ErrorCode::EmptyData:
      return "EmptyData";
    case ErrorCode::TooManyErrors:
      return "TooManyErrors";
    case ErrorCode::PayloadTooLarge:
      return "PayloadTooLarge";
    case ErrorCode::BadFinderPattern:
      return "BadFinderPattern";
    case ErrorCode::BadStructuringElement:
      return "BadStructuringElement";
    case ErrorCode::ConstantSignal:
      return "ConstantSignal";
    case ErrorCode::NoRunsFound:
      return "NoRunsFound";
    case ErrorCode::AmbiguousModuleWidth:
      return "AmbiguousModuleWidth";
    case ErrorCode::DecodeFailed:
      return "DecodeFailed";
    case ErrorCode::AccessDenied:
      return "AccessDenied";
    case ErrorCode::UnknownSubject:
      return "UnknownSubject";
    case ErrorCode::BadSecret:
      return "BadSecret";
    case ErrorCode::ExpiredSession:
      return "ExpiredSession";
    case ErrorCode::InvalidSession:
      return "InvalidSession";
    case ErrorCode::ChainBroken:
      return "ChainBroken";
    case ErrorCode::NotFound:
      return "NotFound";
    case ErrorCode::StaleWrite:
      return "StaleWrite";
    case ErrorCode::MissingRequiredField:
      return "MissingRequiredField";
    case ErrorCode::UnknownField:
      return "UnknownField";
    case ErrorCode::UnitConversionError:
      return "UnitConversionError";
    case ErrorCode::DuplicateSource:
      return "DuplicateSource";
    case ErrorCode::InvalidMapping:
      return "InvalidMapping";
    case ErrorCode::MalformedRow:
      return "MalformedRow";
    case ErrorCode::InvalidInput:
      return "InvalidInput";
    case ErrorCode::ScenarioFailed:
      return "ScenarioFailed";
  }
  return "Unknown";
}

}  // namespace udi
