#pragma once

#include <stdexcept>
#include <string>

namespace qct {

// Bad inputs: malformed files, out-of-contract arguments, config mistakes.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble, always carries the offending path in the message.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A stage that started from valid inputs but could not produce a result
// (degenerate windows, failed segmentation, diverged fits, ...).
class ComputeError : public std::runtime_error {
public:
    explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qct
