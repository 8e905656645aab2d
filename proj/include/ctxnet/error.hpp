#pragma once

#include <stdexcept>
#include <string>

namespace ctxnet {

// Every failure carries a short machine-readable category ("parse", "shape",
// "format", ...). The CLI prints it as "error:<category>:<message>".
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

[[noreturn]] inline void fail(const char* category, const std::string& message) {
    throw Error(category, message);
}

inline void require(bool ok, const char* category, const std::string& message) {
    if (!ok) fail(category, message);
}

}  // namespace ctxnet
