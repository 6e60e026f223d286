#pragma once

#include <stdexcept>
#include <string>

namespace swimcycle {

// Every failure carries a stable machine-readable code (used by the CLI's
// error JSON) plus a human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define SWIMCYCLE_ERROR_KIND(Name)                                          \
    class Name : public Error {                                             \
    public:                                                                 \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

SWIMCYCLE_ERROR_KIND(DegenerateShape);
SWIMCYCLE_ERROR_KIND(InvalidState);
SWIMCYCLE_ERROR_KIND(SolverDiverged);
SWIMCYCLE_ERROR_KIND(CflViolation);
SWIMCYCLE_ERROR_KIND(OutOfDomain);
SWIMCYCLE_ERROR_KIND(PhaseOutOfRange);
SWIMCYCLE_ERROR_KIND(ShapeMismatch);
SWIMCYCLE_ERROR_KIND(ReconstitutionResidual);
SWIMCYCLE_ERROR_KIND(IllConditioned);
SWIMCYCLE_ERROR_KIND(ConfigError);
SWIMCYCLE_ERROR_KIND(FormatError);

#undef SWIMCYCLE_ERROR_KIND

// Find-cycle failure; keeps the best residual seen for reporting.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& message, double best_residual, int iterations)
        : Error("NoConvergence", message),
          best_residual_(best_residual),
          iterations_(iterations) {}

    double best_residual() const noexcept { return best_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double best_residual_;
    int iterations_;
};

}  // namespace swimcycle
