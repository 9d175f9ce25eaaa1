#pragma once

#include <stdexcept>
#include <string>

namespace t2s {

enum class Errc {
    MalformedSchema,
    MissingDatabaseFile,
    DuplicateDbId,
    UnknownDbId,
    MalformedExample,
    EmptyGeneration,
    ProviderUnavailable,
    DimensionMismatch,
    ZeroVector,
    UnscoredAugmentation,
    EmptySet,
    LengthMismatch,
    SizeMismatch,
    DbIdMismatch,
    EmptyInput,
    EmptyResponse,
    Usage,
    Io,
};

const char* errc_name(Errc code);

// Domain error. Carries a machine-checkable code plus a human message.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace t2s
