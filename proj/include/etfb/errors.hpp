#pragma once

#include <stdexcept>
#include <string>

namespace etfb {

/// Invalid configuration or scene description.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (e.g. d_hat outside [0,1]).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Filesystem or serialization failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace etfb
