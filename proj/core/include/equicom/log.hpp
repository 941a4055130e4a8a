#pragma once

#include <cstdint>
#include <sstream>
#include <string>

namespace equicom::log {

enum class Level : int { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Global threshold; initialized once from EQUICOM_LOG (error|warn|info|debug).
Level threshold();
void set_threshold(Level level);
bool enabled(Level level);

void write(Level level, const std::string& message);

namespace detail {
template <typename... Args>
std::string concat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}
}  // namespace detail

template <typename... Args>
void error(Args&&... args) {
    if (enabled(Level::Error)) write(Level::Error, detail::concat(std::forward<Args>(args)...));
}
template <typename... Args>
void warn(Args&&... args) {
    if (enabled(Level::Warn)) write(Level::Warn, detail::concat(std::forward<Args>(args)...));
}
template <typename... Args>
void info(Args&&... args) {
    if (enabled(Level::Info)) write(Level::Info, detail::concat(std::forward<Args>(args)...));
}
template <typename... Args>
void debug(Args&&... args) {
    if (enabled(Level::Debug)) write(Level::Debug, detail::concat(std::forward<Args>(args)...));
}

}  // namespace equicom::log
