#pragma once

#include <stdexcept>
#include <string>

namespace actseg {

/// Failure category. Maps onto the CLI exit codes (usage=1, data=2, numeric=3).
enum class ErrorKind { kUsage, kData, kNumeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define ACTSEG_DEFINE_ERROR(Name, Kind)                          \
  class Name : public Error {                                   \
   public:                                                       \
    explicit Name(const std::string& what) : Error(Kind, what) {} \
  };

ACTSEG_DEFINE_ERROR(DimensionError, ErrorKind::kData)
ACTSEG_DEFINE_ERROR(ParameterError, ErrorKind::kUsage)
ACTSEG_DEFINE_ERROR(LabelError, ErrorKind::kData)
ACTSEG_DEFINE_ERROR(InputError, ErrorKind::kData)
ACTSEG_DEFINE_ERROR(FormatError, ErrorKind::kData)
ACTSEG_DEFINE_ERROR(LengthError, ErrorKind::kData)
ACTSEG_DEFINE_ERROR(PairingError, ErrorKind::kData)
ACTSEG_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
ACTSEG_DEFINE_ERROR(VerificationError, ErrorKind::kNumeric)

#undef ACTSEG_DEFINE_ERROR

}  // namespace actseg
