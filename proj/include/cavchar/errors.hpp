#pragma once

#include <stdexcept>
#include <string>

namespace cavchar {

// Exit-code contract shared with the CLI: 2 parse/validation,
// 3 fit non-convergence, 4 domain error.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
    static constexpr int exit_code = 2;
};

struct FitError : std::runtime_error {
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
    static constexpr int exit_code = 3;
};

struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
    static constexpr int exit_code = 4;
};

inline void require_domain(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

} // namespace cavchar
