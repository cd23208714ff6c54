#pragma once

#include <stdexcept>
#include <string>

namespace faultlab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor extents do not line up (both shapes are named in the message).
struct ShapeError : Error {
    using Error::Error;
};

// A value is outside its documented domain (probability, label, rate, ...).
struct DomainError : Error {
    using Error::Error;
};

// A file does not match its declared binary format.
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Stored checksum does not match the bytes on disk.
struct CorruptionError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

// Malformed CSV / JSON input.
struct ParseError : Error {
    using Error::Error;
};

} // namespace faultlab
