#pragma once

#include <stdexcept>
#include <string>

namespace stfcn {

/// Base of every error thrown by the library. `category()` is a stable,
/// machine-parseable token used by the command-line tool.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define STFCN_DEFINE_ERROR(Name, token)                                  \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(token, what) {}       \
  };

STFCN_DEFINE_ERROR(ShapeError, "shape")
STFCN_DEFINE_ERROR(DepthError, "depth")
STFCN_DEFINE_ERROR(StateError, "state")
STFCN_DEFINE_ERROR(ConfigError, "config")
STFCN_DEFINE_ERROR(RangeError, "range")
STFCN_DEFINE_ERROR(FormatError, "format")
STFCN_DEFINE_ERROR(DataError, "data")
STFCN_DEFINE_ERROR(DivergenceError, "divergence")

#undef STFCN_DEFINE_ERROR

}  // namespace stfcn
