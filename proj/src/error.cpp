#include "thzrsma/error.hpp"

namespace thzrsma {

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig:
      return "config";
    case ErrorCategory::kDimension:
      return "dimension";
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kFormat:
      return "format";
    case ErrorCategory::kNumerical:
      return "numerical";
    case ErrorCategory::kInternal:
      return "internal";
  }
  return "internal";
}

}  // namespace thzrsma
