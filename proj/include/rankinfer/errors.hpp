#pragma once

#include <stdexcept>
#include <string>

namespace rankinfer {

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InsufficientDraws : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Singular values tied across the r-boundary make the minimizing subspace
// non-unique. The value evaluated on one admissible choice is carried along
// so callers can decide whether to use it.
class DegenerateSubspace : public std::runtime_error {
  public:
    DegenerateSubspace(const std::string& what, double candidate)
        : std::runtime_error(what), candidate_(candidate) {}

    double candidate() const noexcept { return candidate_; }

  private:
    double candidate_;
};

}  // namespace rankinfer
