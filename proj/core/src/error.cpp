#include "fewie/error.hpp"

namespace fewie {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kMissingEmbedding: return "missing-embedding";
    case ErrorKind::kAlignment: return "alignment";
    case ErrorKind::kPrecondition: return "precondition";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kConfig: return "config";
  }
  return "unknown";
}

}  // namespace fewie
