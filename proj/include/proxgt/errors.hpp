#pragma once

#include <stdexcept>
#include <string>

namespace proxgt {

// Base class for all library errors. Subclasses carry no extra state;
// they exist so call sites can catch a specific failure kind.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class NotConnected : public Error {
public:
    explicit NotConnected(const std::string& msg) : Error(msg) {}
};

class BadShape : public Error {
public:
    explicit BadShape(const std::string& msg) : Error(msg) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class NotDoublyStochastic : public Error {
public:
    explicit NotDoublyStochastic(const std::string& msg) : Error(msg) {}
};

class SparsityMismatch : public Error {
public:
    explicit SparsityMismatch(const std::string& msg) : Error(msg) {}
};

class AsymmetricMatrix : public Error {
public:
    explicit AsymmetricMatrix(const std::string& msg) : Error(msg) {}
};

class NonFinite : public Error {
public:
    explicit NonFinite(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

class TooFewRows : public Error {
public:
    explicit TooFewRows(const std::string& msg) : Error(msg) {}
};

class OracleError : public Error {
public:
    explicit OracleError(const std::string& msg) : Error(msg) {}
};

class Diverged : public Error {
public:
    explicit Diverged(const std::string& msg) : Error(msg) {}
};

class MissingConstant : public Error {
public:
    explicit MissingConstant(const std::string& msg) : Error(msg) {}
};

// Config-file errors.
class UnknownKey : public Error {
public:
    explicit UnknownKey(const std::string& msg) : Error(msg) {}
};

class TypeError : public Error {
public:
    explicit TypeError(const std::string& msg) : Error(msg) {}
};

class MissingRequired : public Error {
public:
    explicit MissingRequired(const std::string& msg) : Error(msg) {}
};

}  // namespace proxgt
