#include "nsv/common.hpp"

#include <cstdio>
#include <cstdlib>

namespace nsv {

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("NSV_LOG");
        if (!env) return LogLevel::warn;
        std::string_view s(env);
        if (s == "error") return LogLevel::error;
        if (s == "info") return LogLevel::info;
        if (s == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log(LogLevel level, const std::string& msg) {
    if (level > log_level()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::fprintf(stderr, "[nsv:%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

}  // namespace nsv
