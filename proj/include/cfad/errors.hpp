#pragma once

#include <stdexcept>
#include <string>

namespace cfad {

/// Bad configuration file or invalid parameter combination.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corrupt or incompatible on-disk artifact (dataset, checkpoint).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure (degenerate inputs, non-finite results).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cfad
