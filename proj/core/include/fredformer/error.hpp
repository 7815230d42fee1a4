#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fredformer {

enum class ErrorKind {
    InvalidArgument,
    ShapeMismatch,
    NonFinite,
    UndefinedReference,
    EmptyInput,
    Io,
    Parse,
    Diverged,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure surfaced by the library is an Error; `kind()` lets callers
// (the CLI in particular) map failures onto exit codes without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace fredformer
