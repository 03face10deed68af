#pragma once

#include <stdexcept>
#include <string>

namespace ekt {

/// Root of every error the library throws. Callers that only need a
/// diagnostic can catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inputs that do not satisfy a documented schema or invariant.
class InputError : public Error {
public:
    using Error::Error;
};

class MalformedRecord : public InputError {
public:
    using InputError::InputError;
};

class UnparsableAnswer : public InputError {
public:
    using InputError::InputError;
};

class InsufficientExamples : public InputError {
public:
    using InputError::InputError;
};

class SchemaViolation : public InputError {
public:
    using InputError::InputError;
};

class InvariantViolation : public InputError {
public:
    using InputError::InputError;
};

class UnknownExampleId : public InputError {
public:
    using InputError::InputError;
};

class EmptyDataset : public InputError {
public:
    using InputError::InputError;
};

class EmptySampleList : public InputError {
public:
    using InputError::InputError;
};

class InsufficientSamples : public InputError {
public:
    using InputError::InputError;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class IoFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Teacher / student endpoint failures.
class EndpointError : public Error {
public:
    using Error::Error;
};

class EndpointUnreachable : public EndpointError {
public:
    using EndpointError::EndpointError;
};

class AuthFailure : public EndpointError {
public:
    using EndpointError::EndpointError;
};

class MalformedResponse : public EndpointError {
public:
    using EndpointError::EndpointError;
};

class TrainerFailure : public Error {
public:
    using Error::Error;
};

} // namespace ekt
