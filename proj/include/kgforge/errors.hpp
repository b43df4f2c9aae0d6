#pragma once

#include <stdexcept>
#include <string>

namespace kgforge {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad user input: config files, flags, missing paths. CLI maps this to exit 1.
struct ConfigError : Error {
  using Error::Error;
};

// Transport-level backend failure; aborts the run.
struct BackendUnreachableError : Error {
  using Error::Error;
};

// Structured output stayed malformed through all retries. Carries the last
// raw backend output so run reports can record what came back.
struct ExtractionFailedError : Error {
  ExtractionFailedError(const std::string& what, std::string raw_output, int attempts)
      : Error(what), raw(std::move(raw_output)), attempts(attempts) {}
  std::string raw;
  int attempts;
};

struct DimensionMismatchError : Error {
  using Error::Error;
};

// Relation endpoint key not present in the entity set.
struct DanglingEndpointError : Error {
  using Error::Error;
};

// Malformed data file (graph JSON, fixture file, pair dataset, ...).
struct ParseError : Error {
  using Error::Error;
};

}  // namespace kgforge
