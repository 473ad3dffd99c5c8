#include "crowdbp/error.hpp"

namespace crowdbp {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::data_format:
      return 3;
    case ErrorKind::numeric_degeneracy:
      return 4;
    case ErrorKind::parameter:
    case ErrorKind::generation:
    case ErrorKind::size:
      break;
  }
  return 2;
}

}  // namespace crowdbp
