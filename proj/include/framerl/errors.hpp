#pragma once

#include <stdexcept>
#include <string>

namespace framerl {

// Base class for all framerl errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-supplied input: missing files, malformed manifests, invalid flags.
class InputError : public Error {
 public:
  using Error::Error;
};

// Requested extraction window lies entirely outside the video.
class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

// A scripted policy was asked for more turns than its script contains.
class ScriptExhaustedError : public Error {
 public:
  using Error::Error;
};

// Remote policy endpoint unreachable or persistently failing after retries.
class PolicyTransportError : public Error {
 public:
  using Error::Error;
};

// The endpoint rejected the request because the conversation no longer fits.
class ContextOverflowError : public Error {
 public:
  using Error::Error;
};

// Judge endpoint unreachable; scoring must be deferred, never defaulted.
class JudgeUnavailableError : public Error {
 public:
  using Error::Error;
};

// Judge replied, but no score could be parsed even after one reprompt.
class UnparseableVerdictError : public Error {
 public:
  using Error::Error;
};

// Fewer than two rewards in a rollout group.
class GroupTooSmallError : public Error {
 public:
  using Error::Error;
};

// Paired sequences of different lengths.
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

// An operation that requires at least one element received none.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// A template referenced a slot the source record does not provide.
class MissingSlotError : public Error {
 public:
  using Error::Error;
};

// No template registered for the requested (dataset, task) pair.
class UnknownTemplateError : public Error {
 public:
  using Error::Error;
};

}  // namespace framerl
