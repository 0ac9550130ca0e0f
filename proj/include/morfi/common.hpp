#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace morfi {

using Index = Eigen::Index;

// Bad user input or violated call contract. The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A model/answer oracle failed (subprocess died, malformed reply, ...). Exit code 3.
struct OracleError : std::runtime_error {
    explicit OracleError(const std::string& msg) : std::runtime_error(msg) {}
};

// An internal invariant broke. Exit code 4.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

inline void internal_check(bool cond, const char* msg) {
    if (!cond) throw InternalError(msg);
}

} // namespace morfi
