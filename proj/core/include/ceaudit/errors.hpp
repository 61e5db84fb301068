#ifndef CEAUDIT_ERRORS_HPP
#define CEAUDIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ceaudit {

// Invalid configuration, malformed input data, or violated preconditions.
// CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training data contains a single class; no classifier can be fit.
// CLI exit code 2.
class DegenerateLabelsError : public std::runtime_error {
public:
    explicit DegenerateLabelsError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem read/write failure. CLI exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ceaudit

#endif  // CEAUDIT_ERRORS_HPP
