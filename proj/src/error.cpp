#include "mcr/error.hpp"

namespace mcr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Arity: return "arity";
    case ErrorKind::Sampling: return "sampling";
    case ErrorKind::Mining: return "mining";
    case ErrorKind::Input: return "input";
    case ErrorKind::Index: return "index";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace mcr
