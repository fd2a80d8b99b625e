#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace climcast {

/// Malformed file structure (bad header, unexpected column layout).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A single data row could not be parsed or validated.
class RowError : public std::runtime_error {
public:
    RowError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DuplicateKeyError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Too few usable observations for a model or pipeline stage.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AlignmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateScaleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularDesignError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an optimizer exhausts its iteration budget. Carries the best point found.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::vector<double> best_params, double best_objective,
                     int iterations)
        : std::runtime_error(what),
          best_params_(std::move(best_params)),
          best_objective_(best_objective),
          iterations_(iterations) {}

    [[nodiscard]] const std::vector<double>& best_params() const noexcept { return best_params_; }
    [[nodiscard]] double best_objective() const noexcept { return best_objective_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

private:
    std::vector<double> best_params_;
    double best_objective_;
    int iterations_;
};

/// Non-finite value produced inside a numeric kernel.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training diverged (non-finite loss).
class TrainingError : public std::runtime_error {
public:
    TrainingError(int epoch, const std::string& what)
        : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

    [[nodiscard]] int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace climcast
