#pragma once

#include <stdexcept>
#include <string>

namespace fednest {

// Bad configuration: unknown key, out-of-range value, inconsistent shapes.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// An iterate blew past the divergence guard. Carries enough context to name
// the offending stepsize. The CLI maps this to exit code 2.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& which, double stepsize, double norm)
        : std::runtime_error(which + " diverged: iterate norm " + std::to_string(norm) +
                             " exceeds 1e12 (stepsize " + std::to_string(stepsize) + ")"),
          which_(which),
          stepsize_(stepsize),
          norm_(norm) {}
    const std::string& which() const { return which_; }
    double stepsize() const { return stepsize_; }
    double norm() const { return norm_; }

private:
    std::string which_;
    double stepsize_;
    double norm_;
};

// A query that is only defined under preconditions the caller did not meet
// (e.g. expected-operator enumeration with noise or partial participation).
class UnsupportedConfigError : public std::runtime_error {
public:
    explicit UnsupportedConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fednest
