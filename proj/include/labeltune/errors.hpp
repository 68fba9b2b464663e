#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace labeltune {

// Shape, range and precondition violations.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyInput : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class MissingEmbedding : public std::runtime_error {
public:
    explicit MissingEmbedding(const std::string& id)
        : std::runtime_error("no embedding stored for id '" + id + "'"), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class InvalidPattern : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Malformed or unreadable files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when the tuning objective stops being finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::size_t step, double learning_rate);
    std::size_t step() const noexcept { return step_; }
    double learning_rate() const noexcept { return learning_rate_; }

private:
    std::size_t step_;
    double learning_rate_;
};

// Welch's test is undefined for tiny or zero-variance samples.
class UndefinedTest : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace labeltune
