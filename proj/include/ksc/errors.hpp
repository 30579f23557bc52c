#ifndef KSC_ERRORS_HPP
#define KSC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ksc {

// Invalid arguments to a numerical routine (bad index, base, size mismatch).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Configuration could not be parsed or failed validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A linear system could not be solved reliably, or a numerical
// precondition (quadrature budget, nonpositive errors in a fit) failed.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Failure of one external-solver evaluation. Carries the sample slot so
// campaign drivers can report and retry individual samples.
class ExternalSolverError : public std::runtime_error {
public:
    enum class Kind { launch, nonzero_exit, timeout, missing_output, short_output, nan_output };

    ExternalSolverError(Kind kind, std::size_t sample_index, const std::string& what)
        : std::runtime_error("sample " + std::to_string(sample_index) + ": " + what),
          kind_(kind),
          sample_index_(sample_index) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t sample_index() const noexcept { return sample_index_; }

private:
    Kind kind_;
    std::size_t sample_index_;
};

} // namespace ksc

#endif // KSC_ERRORS_HPP
