#ifndef GLNS_ERRORS_HPP
#define GLNS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace glns {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define GLNS_DEFINE_ERROR(Name)            \
    class Name : public Error {            \
    public:                                \
        using Error::Error;                \
    }

GLNS_DEFINE_ERROR(InvalidSolutionError);
GLNS_DEFINE_ERROR(ConfigError);
GLNS_DEFINE_ERROR(UnsupportedFormatError);
GLNS_DEFINE_ERROR(FormatError);
GLNS_DEFINE_ERROR(OperatorError);
GLNS_DEFINE_ERROR(SelectionError);
GLNS_DEFINE_ERROR(StateError);
GLNS_DEFINE_ERROR(DomainError);
GLNS_DEFINE_ERROR(RequestError);
GLNS_DEFINE_ERROR(ResponseParseError);
GLNS_DEFINE_ERROR(BackendError);
GLNS_DEFINE_ERROR(SandboxError);
GLNS_DEFINE_ERROR(SeedingError);
GLNS_DEFINE_ERROR(ReplenishError);

#undef GLNS_DEFINE_ERROR

/// Parse failure that remembers the 1-based line it happened on (0 when unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

}  // namespace glns

#endif
