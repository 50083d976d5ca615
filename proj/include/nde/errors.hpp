#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace nde {

// Shapes or lengths that do not line up.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bad values in otherwise well-shaped input (labels out of range, empty data).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// API called in the wrong state or with out-of-range arguments.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Invalid experiment or training configuration. `field()` names the offending key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Malformed binary input. `offset()` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, const std::string& message)
        : std::runtime_error("at byte " + std::to_string(offset) + ": " + message), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace nde
