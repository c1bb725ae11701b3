#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace nnmstab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Errors. Every failure mode that a caller may want to react to has its own
// type; all derive from Error so the CLI can map them to exit codes.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration or schema violation (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A function was evaluated outside its working domain or returned non-finite values.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Mass matrix not invertible at the requested configuration.
class DegenerateMassError : public DomainError {
public:
    using DomainError::DomainError;
};

/// An operation's precondition does not hold (e.g. not a fixed point).
class PreconditionError : public Error {
public:
    using Error::Error;
};

class IntegrationFailure : public Error {
public:
    IntegrationFailure(const std::string& what, double last_good_time)
        : Error(what), last_good_time_(last_good_time) {}
    double last_good_time() const { return last_good_time_; }

private:
    double last_good_time_;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, std::vector<double> residual_history)
        : Error(what), history_(std::move(residual_history)) {}
    const std::vector<double>& residual_history() const { return history_; }

private:
    std::vector<double> history_;
};

/// Spectrum of a monodromy matrix is outside the generic setting (repeated pairs, -1).
class NonGenericSpectrum : public Error {
public:
    using Error::Error;
};

/// A required derivative is not available analytically and FD fallback was not enabled.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// Inconsistent inputs between cooperating objects (e.g. forcing period vs orbit period).
class SpecError : public Error {
public:
    using Error::Error;
};

class IncompleteInput : public Error {
public:
    using Error::Error;
};

/// Orbit data (subspace, monodromy) no longer satisfies its invariance relation.
class StaleSubspace : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// PhaseState: x = (q, p) in a 2n-dimensional phase space.
// ---------------------------------------------------------------------------

class PhaseState {
public:
    PhaseState() = default;

    explicit PhaseState(Vec x) : x_(std::move(x)) { validate(); }

    PhaseState(const Vec& q, const Vec& p) : x_(q.size() + p.size()) {
        if (q.size() != p.size()) throw DomainError("PhaseState: q and p lengths differ");
        x_ << q, p;
        validate();
    }

    int dof() const { return static_cast<int>(x_.size() / 2); }
    int dim() const { return static_cast<int>(x_.size()); }

    auto q() const { return x_.head(dof()); }
    auto p() const { return x_.tail(dof()); }

    const Vec& vec() const { return x_; }
    operator const Vec&() const { return x_; }

private:
    void validate() const {
        if (x_.size() < 2 || x_.size() % 2 != 0)
            throw DomainError("PhaseState: dimension must be 2n with n >= 1");
        if (!x_.allFinite()) throw DomainError("PhaseState: non-finite entry");
    }

    Vec x_;
};

}  // namespace nnmstab
