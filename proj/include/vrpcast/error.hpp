#pragma once

#include <stdexcept>
#include <string>

#include <spdlog/spdlog.h>

namespace vrpcast {

/// Data or numeric failure: unusable input, a failed statistical gate, or a
/// diverging computation. Precondition violations on the API use
/// std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::shared_ptr<spdlog::logger> logger()
{
    static auto log = [] {
        auto existing = spdlog::get("vrpcast");
        if (existing) return existing;
        auto created = spdlog::default_logger()->clone("vrpcast");
        spdlog::register_logger(created);
        return created;
    }();
    return log;
}

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail

/// Adjust the verbosity of library diagnostics (warnings about duplicates,
/// out-of-range normalized inputs, and so on).
inline void set_log_level(spdlog::level::level_enum level) { detail::logger()->set_level(level); }

}  // namespace vrpcast
