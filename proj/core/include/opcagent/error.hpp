#pragma once

#include <stdexcept>
#include <string>

namespace opcagent {

// Base of every error the library throws. The CLI maps each subclass to a
// distinct process exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid or degenerate geometry: short edges, non-rectilinear outlines,
// self-intersecting masks, points outside the clip.
class GeometryError : public Error {
public:
  using Error::Error;
};

// Raised by materialize() when an offset vector collapses a polygon.
class SelfIntersectionError : public GeometryError {
public:
  SelfIntersectionError(int polygon_id, const std::string& what)
      : GeometryError(what), polygon_id_(polygon_id) {}
  int polygon_id() const noexcept { return polygon_id_; }

private:
  int polygon_id_;
};

// Malformed input files. Message names the line and/or field.
class ParseError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

// Non-finite values inside the policy or training loop.
class NumericError : public Error {
public:
  using Error::Error;
};

// Squish encodings that do not fit the fixed tensor size.
class EncodingError : public Error {
public:
  using Error::Error;
};

// Synthetic clip generation gave up after bounded retries.
class GenerationError : public Error {
public:
  using Error::Error;
};

}  // namespace opcagent
