#pragma once

#include <stdexcept>
#include <string>

namespace depprobe {

// Malformed or inconsistent input: bad files, misaligned data, bad flags.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// CoNLL-U / CSV syntax problem at a known line.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Structurally invalid sentence (cycles, dangling heads, several roots).
class ValidationError : public InputError {
public:
    ValidationError(const std::string& sent_id, const std::string& what)
        : InputError("sentence '" + sent_id + "': " + what), sent_id_(sent_id) {}

    const std::string& sent_id() const noexcept { return sent_id_; }

private:
    std::string sent_id_;
};

// Non-finite values during optimization or scoring.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace depprobe
