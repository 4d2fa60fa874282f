// Copyright (C) 2026 The mvprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvprune {

/// Base class for every error thrown by the library. The C API maps each
/// subclass onto one status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad index, shape mismatch).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A configuration value is outside its allowed domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A serialized record could not be decoded.
class ParseError : public Error {
public:
    ParseError(std::string field, std::size_t offset, const std::string& what)
        : Error("parse error at byte " + std::to_string(offset) + " (field '" + field + "'): " + what),
          field_(std::move(field)),
          offset_(offset) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string field_;
    std::size_t offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss or an invalid hook value.
class TrainingError : public Error {
public:
    TrainingError(std::int64_t step, const std::string& what)
        : Error("training error at step " + std::to_string(step) + ": " + what), step_(step) {}

    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

/// Annotation input (boxes, geometry) is inconsistent. frame == -1 when the
/// failing call was not tied to a frame.
class AnnotationError : public Error {
public:
    AnnotationError(std::int64_t frame, const std::string& what)
        : Error((frame >= 0 ? "frame " + std::to_string(frame) + ": " : std::string()) + what), frame_(frame) {}

    std::int64_t frame() const noexcept { return frame_; }

private:
    std::int64_t frame_;
};

/// An annotation file or record violates an EpisodeAnnotation invariant.
class ValidationError : public Error {
public:
    ValidationError(std::int64_t frame, const std::string& what)
        : Error("frame " + std::to_string(frame) + ": " + what), frame_(frame) {}

    std::int64_t frame() const noexcept { return frame_; }

private:
    std::int64_t frame_;
};

/// A pipeline stage produced output violating its own post-conditions.
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace mvprune
