#pragma once

#include <stdexcept>
#include <string>

namespace cpwlab {

// Argument outside the mathematical domain of a kernel (k > 1, negative
// widths, ...). Plain precondition breaks use std::invalid_argument.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Requested evaluation point where the quantity diverges (K(1), K(k)/K(k')
// at k in {0,1}).
class DivergenceError : public DomainError {
public:
    explicit DivergenceError(const std::string& what) : DomainError(what) {}
};

// Root finder could not reach the target inside the search bracket.
class NoSolutionError : public std::runtime_error {
public:
    NoSolutionError(const std::string& what, double bracket_lo, double bracket_hi)
        : std::runtime_error(what), bracket_lo(bracket_lo), bracket_hi(bracket_hi) {}
    double bracket_lo;
    double bracket_hi;
};

// Base for everything that can go wrong inside a fit pipeline. `stage`
// names the pipeline step that failed ("delay", "circle", "phase",
// "refine", "tls").
class FitError : public std::runtime_error {
public:
    FitError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage(std::move(stage)) {}
    std::string stage;
};

class InsufficientDataError : public FitError {
public:
    InsufficientDataError(std::string stage, const std::string& what)
        : FitError(std::move(stage), what) {}
};

class DegenerateGeometryError : public FitError {
public:
    explicit DegenerateGeometryError(const std::string& what)
        : FitError("circle", what) {}
};

class NoResonanceError : public FitError {
public:
    explicit NoResonanceError(const std::string& what) : FitError("circle", what) {}
};

class UnphysicalParamsError : public FitError {
public:
    explicit UnphysicalParamsError(const std::string& what)
        : FitError("refine", what) {}
};

// Iteration cap reached without meeting the step tolerance. The message
// carries the best-so-far values.
class FitFailureError : public FitError {
public:
    FitFailureError(std::string stage, const std::string& what)
        : FitError(std::move(stage), what) {}
};

// Malformed file headers / columns.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpwlab
