// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gotok {

/// Base of every error raised by the toolkit. `exit_code()` is the process
/// status the CLI reports for it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

/// Input violates a documented precondition or schema.
class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// NaN/Inf during training or a failed gradient audit.
class NumericError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

}  // namespace gotok
