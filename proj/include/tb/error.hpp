#pragma once

#include <stdexcept>
#include <string>

namespace tb {

// Every failure the engine reports derives from Error. The CLI maps these to
// exit status 1; usage problems are handled separately by the argument parser.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input file does not match the expected column layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A (text, attribute) cell has no surviving judgments after worker filtering.
class CoverageError : public Error {
public:
    using Error::Error;
};

// Two matrices that must share row ids do not.
class AlignmentError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class VectorizationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace tb
