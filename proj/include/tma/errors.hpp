#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tma {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

/// A name or id that does not resolve against a vocabulary.
class VocabularyError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to an operation (empty text, empty KG, bad gold index...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Text-encoder backend could not be reached or returned garbage.
class BackendError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace tma
