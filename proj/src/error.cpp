#include "stpp/error.hpp"

namespace stpp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kLabel: return "label error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kLookup: return "lookup error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kStage: return "stage error";
  }
  return "error";
}

}  // namespace stpp
