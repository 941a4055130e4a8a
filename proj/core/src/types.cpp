#include "equicom/types.hpp"

namespace equicom {

std::string_view mechanism_name(Mechanism mech) {
    switch (mech) {
        case Mechanism::Private: return "private";
        case Mechanism::Broadcast: return "broadcast";
        case Mechanism::GroupBroadcast: return "group_broadcast";
        case Mechanism::Balance: return "balance";
    }
    return "?";
}

std::optional<Mechanism> mechanism_from_name(std::string_view name) {
    if (name == "private") return Mechanism::Private;
    if (name == "broadcast") return Mechanism::Broadcast;
    if (name == "group_broadcast") return Mechanism::GroupBroadcast;
    if (name == "balance") return Mechanism::Balance;
    return std::nullopt;
}

}  // namespace equicom
