#pragma once

#include <stdexcept>
#include <string>

namespace dsrn {

enum class ErrorCode {
    format,      // malformed image or file content
    dimension,   // spatial size violates a divisibility or minimum-size rule
    config,      // architecture / hyper-parameter mismatch
    data,        // dataset layout problems
    io,          // filesystem failures
    numeric,     // non-finite values during optimization
    corrupt,     // truncated or checksum-failing archive
    version,     // archive version not understood
    usage,       // caller misuse (bad flags, missing inputs)
    unsupported, // requested feature is not available
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace dsrn
