#pragma once

#include <stdexcept>
#include <string>

namespace nkiso {

// Every failure carries a short machine-readable code ("grid-underresolved",
// "amplitude-collapse", ...) plus a human detail string.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& detail = {})
        : std::runtime_error(detail.empty() ? code : code + ": " + detail), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Parameter gates and configuration problems. The CLI maps these to exit code 2.
class GateError : public Error {
public:
    using Error::Error;
};

}  // namespace nkiso
