#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace streamgp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2Pi = 2.5066282746310005024;
inline constexpr double kLog2Pi = 1.8378770664093454836;

enum class ErrorKind {
    Config,      // bad configuration or input file
    Parameter,   // invalid numeric parameter (non-positive scale, ...)
    Domain,      // argument outside the support of an operation
    Lookup,      // unknown site / id
    Numerical,   // factorisation failure, non-finite intermediate
    Capability,  // closed form not available for the request
    Misuse,      // API called in a state it does not support
    Infeasible,  // no feasible optimiser start
    Internal
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v))
        fail(ErrorKind::Parameter, std::string(what) + " must be positive and finite");
}

}  // namespace streamgp
