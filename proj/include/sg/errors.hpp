// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sg {

// Exit-code mapping used by the CLI: config/shape/serialization errors -> 2,
// search failures -> 3, numeric errors (NaN, divergence) -> 4.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class SerializationError : public Error {
  public:
    using Error::Error;
};

class NumericError : public Error {
  public:
    using Error::Error;
};

class SearchFailure : public Error {
  public:
    SearchFailure(const std::string& msg, std::string diagnostics_json)
        : Error(msg), diagnostics(std::move(diagnostics_json)) {}
    std::string diagnostics;
};

}  // namespace sg
