#pragma once

#include <stdexcept>
#include <string>

namespace experts {

// Error classes map 1:1 to CLI exit codes (see README).
enum class ErrorClass {
    usage = 2,      // bad arguments / unusable request
    io = 3,         // file missing, unreadable, unwritable
    format = 4,     // parse failure in a checkpoint, XML, JSONL, CSV, vocab
    validation = 5, // inputs violate a documented invariant
    internal = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string message)
        : std::runtime_error(std::move(message)), cls_(cls) {}

    ErrorClass cls() const noexcept { return cls_; }
    int exit_code() const noexcept { return static_cast<int>(cls_); }

private:
    ErrorClass cls_;
};

[[noreturn]] inline void fail(ErrorClass cls, const std::string& message) {
    throw Error(cls, message);
}

} // namespace experts
