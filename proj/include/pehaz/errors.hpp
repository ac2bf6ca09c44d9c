#pragma once

#include <stdexcept>
#include <string>

namespace pehaz {

// Bad or inconsistent user-supplied settings (too few anchors, K < 4, ...).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input data violating a documented invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Broken internal invariant; the message carries a state dump where available.
class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pehaz
