#pragma once

#include <stdexcept>
#include <string>

namespace nbpss {

/// Invalid model description, dataset, or argument. Maps to CLI exit status 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside a numerical routine (factorization, quadrature, non-finite
/// predictor). Maps to CLI exit status 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

inline void require_numeric(bool ok, const std::string& what) {
    if (!ok) throw NumericError(what);
}

inline void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

inline void require_numeric(bool ok, const char* what) {
    if (!ok) throw NumericError(what);
}

} // namespace detail
} // namespace nbpss
