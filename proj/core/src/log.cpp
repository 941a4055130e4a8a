#include "equicom/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>

namespace equicom::log {
namespace {

Level level_from_env() {
    const char* v = std::getenv("EQUICOM_LOG");
    if (!v) return Level::Warn;
    if (std::strcmp(v, "error") == 0) return Level::Error;
    if (std::strcmp(v, "warn") == 0) return Level::Warn;
    if (std::strcmp(v, "info") == 0) return Level::Info;
    if (std::strcmp(v, "debug") == 0) return Level::Debug;
    return Level::Warn;
}

std::atomic<int>& threshold_slot() {
    static std::atomic<int> slot{static_cast<int>(level_from_env())};
    return slot;
}

const char* level_tag(Level level) {
    switch (level) {
        case Level::Error: return "error";
        case Level::Warn: return "warn";
        case Level::Info: return "info";
        case Level::Debug: return "debug";
    }
    return "?";
}

}  // namespace

Level threshold() { return static_cast<Level>(threshold_slot().load(std::memory_order_relaxed)); }

void set_threshold(Level level) {
    threshold_slot().store(static_cast<int>(level), std::memory_order_relaxed);
}

bool enabled(Level level) { return static_cast<int>(level) <= static_cast<int>(threshold()); }

void write(Level level, const std::string& message) {
    // One lock keeps interleaved lines whole; logging is off the hot path.
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::fprintf(stderr, "[%s] %s\n", level_tag(level), message.c_str());
    std::fflush(stderr);
}

}  // namespace equicom::log
