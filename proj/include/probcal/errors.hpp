#pragma once

#include <stdexcept>
#include <string>

namespace probcal {

// Argument-domain violations are reported as std::invalid_argument. The two
// types below cover the remaining failure classes.

/// A configuration combination that cannot be run (e.g. several updates per
/// rollout without a clipping threshold).
class InvalidConfiguration : public std::invalid_argument {
 public:
  explicit InvalidConfiguration(const std::string& what) : std::invalid_argument(what) {}
};

/// A metric that has no value on the given input (e.g. AUROC with one class).
class UndefinedMetric : public std::domain_error {
 public:
  explicit UndefinedMetric(const std::string& what) : std::domain_error(what) {}
};

}  // namespace probcal
