#pragma once

#include <stdexcept>
#include <string>

namespace equicom {

enum class Errc {
    InvalidConfig,
    InvalidArgument,
    AddressInUse,
    UnsupportedScheme,
    ConnectionRefused,
    ConnectionClosed,
    Timeout,
    ShutDown,
    OversizeField,
    DuplicateNodeId,
    EmptyMembers,
    ParseError,
    ValidationError,
    ConvergenceTimeout,
    IoError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

}  // namespace equicom
