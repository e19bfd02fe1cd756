#pragma once

#include <stdexcept>
#include <string>

namespace tripleagent {

/// An input document or wire record could not be parsed. The message
/// carries a locus (file, line number or field path).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was invoked outside its contract.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Filesystem or subprocess failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Persisted campaign data contradicts itself or the active configuration.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The campaign cannot continue: unrecoverable target, red baseline, or an
/// experiment that could not be run at all where a result is mandatory.
class CampaignAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tripleagent
