#include "fredformer/error.hpp"

namespace fredformer {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::ShapeMismatch: return "shape mismatch";
        case ErrorKind::NonFinite: return "non-finite value";
        case ErrorKind::UndefinedReference: return "undefined reference";
        case ErrorKind::EmptyInput: return "empty input";
        case ErrorKind::Io: return "i/o error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Diverged: return "diverged";
    }
    return "unknown";
}

}  // namespace fredformer
