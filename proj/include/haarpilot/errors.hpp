// Copyright 2026 The HaarPilot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace haarpilot {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatch, NaN, non-positive extents.
class InputError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

/// Text or binary parse failure. `line` is 1-based (0 when not applicable),
/// `offset` is a byte offset for binary formats.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t offset = 0)
        : Error(what), line_(line), offset_(offset) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t line_;
    std::size_t offset_;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training data without both classes.
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// Best weak learner no better than chance (weighted error >= 0.5).
class BoostingStall : public Error {
public:
    using Error::Error;
};

/// Too few positives survive the cascade to train the next stage.
class TrainingCollapse : public Error {
public:
    TrainingCollapse(const std::string& what, std::size_t stage) : Error(what), stage_(stage) {}
    std::size_t stage() const noexcept { return stage_; }

private:
    std::size_t stage_;
};

class TransportError : public Error {
public:
    using Error::Error;
};

}  // namespace haarpilot
