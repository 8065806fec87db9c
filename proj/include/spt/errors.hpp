#pragma once

#include <stdexcept>
#include <string>

namespace spt {

class SptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public SptError {
public:
    using SptError::SptError;
};

class InvalidParameter : public SptError {
public:
    using SptError::SptError;
};

class BoundaryError : public SptError {
public:
    using SptError::SptError;
};

class NumericalError : public SptError {
public:
    using SptError::SptError;
};

/// Malformed model or experiment configuration. `key()` names the offending entry.
class ConfigError : public SptError {
public:
    ConfigError(std::string key, const std::string& what)
        : SptError(key.empty() ? what : "'" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Raised when an operation needs a gradient drift field and the model does not provide one.
class NotGradientError : public SptError {
public:
    using SptError::SptError;
};

} // namespace spt
