#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsfactor {

enum class ErrorCode {
  kArgument,
  kShape,
  kValidation,
  kParse,
  kLookup,
  kNumeric,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kArgument: return "argument_error";
    case ErrorCode::kShape: return "shape_error";
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kParse: return "parse_error";
    case ErrorCode::kLookup: return "lookup_error";
    case ErrorCode::kNumeric: return "numeric_error";
    case ErrorCode::kIo: return "io_error";
  }
  return "error";
}

// Base of every library error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define TSFACTOR_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {} \
  };

TSFACTOR_DEFINE_ERROR(ArgumentError, kArgument)
TSFACTOR_DEFINE_ERROR(ShapeError, kShape)
TSFACTOR_DEFINE_ERROR(ValidationError, kValidation)
TSFACTOR_DEFINE_ERROR(ParseError, kParse)
TSFACTOR_DEFINE_ERROR(LookupError, kLookup)
TSFACTOR_DEFINE_ERROR(NumericError, kNumeric)
TSFACTOR_DEFINE_ERROR(IoError, kIo)

#undef TSFACTOR_DEFINE_ERROR

/// Rethrows `e` as the same error class with `context` prepended to the message.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  switch (e.code()) {
    case ErrorCode::kArgument: throw ArgumentError(msg);
    case ErrorCode::kShape: throw ShapeError(msg);
    case ErrorCode::kValidation: throw ValidationError(msg);
    case ErrorCode::kParse: throw ParseError(msg);
    case ErrorCode::kLookup: throw LookupError(msg);
    case ErrorCode::kNumeric: throw NumericError(msg);
    case ErrorCode::kIo: throw IoError(msg);
  }
  throw Error(e.code(), msg);
}

}  // namespace tsfactor
