#pragma once

#include <stdexcept>
#include <string>

namespace dcm {

// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// All attempts failed but the round budget was not used up.
class IncompleteTrajectory : public Error {
public:
    using Error::Error;
};

// Transport failure after retries, or an empty completion.
class ProviderError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class StoreError : public Error {
public:
    using Error::Error;
};

class FormatVersionError : public StoreError {
public:
    using StoreError::StoreError;
};

// Names the violated invariant in what().
class CorruptStore : public StoreError {
public:
    using StoreError::StoreError;
};

class NoMemoryError : public Error {
public:
    using Error::Error;
};

// Execution environment problems (harness missing, spawn failure); distinct from script failures.
class EnvironmentError : public Error {
public:
    using Error::Error;
};

} // namespace dcm
