#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace sqmatch {

/// Error with a machine-parsable class code (e.g. "io.not_found").
/// The CLI maps the code prefix to an exit code.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

/// Runs fn(i) for i in [0, n). With threads <= 1 this is a plain loop;
/// otherwise indices are split into contiguous chunks, one per worker.
/// fn must only write to per-index state.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

} // namespace sqmatch
