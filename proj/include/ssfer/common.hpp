#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ssfer {

inline constexpr const char* kVersion = "0.1.0";

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// thrown for invalid arguments, bad configs, malformed files
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

template <class... Args>
[[noreturn]] inline void fail(const Args&... parts) {
    std::string msg;
    ((msg += parts), ...);
    throw Error(msg);
}

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw Error(msg);
}

// warnings go to stderr so CLI output stays clean on stdout
void log_warn(const std::string& msg);
void log_info(const std::string& msg);

}  // namespace ssfer
