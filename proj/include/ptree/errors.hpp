#pragma once

#include <stdexcept>
#include <string>

namespace ptree {

// Error categories map onto CLI exit codes: data errors (malformed input)
// exit 2, configuration errors exit 3, numeric failures exit 4.
enum class ErrorCode {
  DataError = 2,
  ConfigError = 3,
  NumericError = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error empty_domain(const std::string& what) { return Error(ErrorCode::ConfigError, "EmptyDomain: " + what); }
inline Error depth_negative(const std::string& what) { return Error(ErrorCode::ConfigError, "DepthNegative: " + what); }
inline Error zero_mass(const std::string& what) { return Error(ErrorCode::NumericError, "ZeroMass: " + what); }
inline Error invalid_prior(const std::string& what) { return Error(ErrorCode::ConfigError, "InvalidPrior: " + what); }
inline Error out_of_domain(const std::string& what) { return Error(ErrorCode::ConfigError, "OutOfDomain: " + what); }
inline Error grid_mismatch(const std::string& what) { return Error(ErrorCode::ConfigError, "GridMismatch: " + what); }
inline Error unknown_scenario(const std::string& what) { return Error(ErrorCode::ConfigError, "UnknownScenario: " + what); }
inline Error domain_error(const std::string& what) { return Error(ErrorCode::ConfigError, "DomainError: " + what); }
inline Error node_budget_exceeded(const std::string& what) { return Error(ErrorCode::NumericError, "NodeBudgetExceeded: " + what); }
inline Error numerical_underflow(const std::string& what) { return Error(ErrorCode::NumericError, "NumericalUnderflow: " + what); }
inline Error data_error(const std::string& what) { return Error(ErrorCode::DataError, what); }
inline Error config_error(const std::string& what) { return Error(ErrorCode::ConfigError, what); }

}  // namespace ptree
