#ifndef VIDHOC_CORE_ERROR_H_
#define VIDHOC_CORE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace vidhoc {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidState,
  kIndexOutOfRange,
  kEmptyInput,
  kProfileGap,
  kInfeasible,
  kNoMatch,
  kInsufficientData,
  kUndefined,
  kParse,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vidhoc

#endif  // VIDHOC_CORE_ERROR_H_
