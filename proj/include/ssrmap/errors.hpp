#pragma once

#include <stdexcept>
#include <string>

namespace ssrmap {

/// Input outside an operation's domain.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A requested moment does not exist for the given shape parameters.
class UndefinedMoment : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The minimal sample size exceeds the configured cap.
class CapExceeded : public std::runtime_error {
public:
    CapExceeded(const std::string& what, long cap) : std::runtime_error(what), cap_(cap) {}
    long cap() const noexcept { return cap_; }

private:
    long cap_;
};

/// EM produced a component with negligible weight or the data cannot identify a Gamma fit.
class DegenerateFit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ssrmap
