#pragma once

#include <stdexcept>
#include <string>

namespace triage {

/// Base class for every error raised by the triage library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file or model response does not follow the expected format.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A prompt argument provider could not be resolved for a case.
class RenderError : public Error {
public:
    using Error::Error;
};

/// Network or provider failure that survived every retry.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Replay mode was asked for a request that was never recorded.
class ReplayMissError : public Error {
public:
    ReplayMissError(const std::string& hash)
        : Error("replay miss: no recorded response for request " + hash), hash_(hash) {}

    const std::string& hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

}  // namespace triage
