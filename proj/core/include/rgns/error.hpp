#pragma once

#include <stdexcept>
#include <string>

namespace rgns {

// Invalid user/config input: shapes that do not compose, bad settings.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Broken API contract: stale caches, mismatched preconditions.
struct contract_error : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite values, degenerate factorizations, diverged rollouts.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or truncated files.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rgns
