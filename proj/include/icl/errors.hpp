#pragma once

#include <stdexcept>
#include <string>

namespace icl {

// Base for every error the library raises on bad input or failed numerics.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Configuration or schema problem; `path` names the offending field.
class ValidationError : public Error {
public:
    ValidationError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Importance sampler ended up with too few effective samples.
class LowConfidenceError : public Error {
public:
    LowConfidenceError(const std::string& what, double ess) : Error(what), ess_(ess) {}
    double effective_sample_size() const noexcept { return ess_; }

private:
    double ess_;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

class IndexOverflowError : public Error {
public:
    IndexOverflowError(const std::string& what, long long index)
        : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
    long long index() const noexcept { return index_; }

private:
    long long index_;
};

}  // namespace icl
