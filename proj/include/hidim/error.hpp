#pragma once

#include <stdexcept>
#include <string>

namespace hidim {

// Bad arguments, shape mismatches, malformed files. The CLI maps these to exit code 2.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Singular matrices, non-positive variance estimates, failed convergence. Exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& message) {
    if (!ok) throw InputError(message);
}

}  // namespace hidim
