#include "equicom/errors.hpp"

namespace equicom {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::AddressInUse: return "AddressInUse";
        case Errc::UnsupportedScheme: return "UnsupportedScheme";
        case Errc::ConnectionRefused: return "ConnectionRefused";
        case Errc::ConnectionClosed: return "ConnectionClosed";
        case Errc::Timeout: return "Timeout";
        case Errc::ShutDown: return "ShutDown";
        case Errc::OversizeField: return "OversizeField";
        case Errc::DuplicateNodeId: return "DuplicateNodeId";
        case Errc::EmptyMembers: return "EmptyMembers";
        case Errc::ParseError: return "ParseError";
        case Errc::ValidationError: return "ValidationError";
        case Errc::ConvergenceTimeout: return "ConvergenceTimeout";
        case Errc::IoError: return "IoError";
    }
    return "?";
}

}  // namespace equicom
