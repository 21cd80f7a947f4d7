#pragma once

#include <stdexcept>
#include <string>

namespace cws {

// Error taxonomy. Each condition named by what went wrong; all derive from
// Error so callers can catch the whole family at once.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonEmbedded : Error {
  explicit NonEmbedded(const std::string& msg) : Error(msg) {}
};

struct AxisIntersection : Error {
  explicit AxisIntersection(const std::string& msg) : Error(msg) {}
};

struct DegenerateCell : Error {
  explicit DegenerateCell(const std::string& msg) : Error(msg) {}
};

struct SingularPeriodMatrix : Error {
  explicit SingularPeriodMatrix(const std::string& msg) : Error(msg) {}
};

struct AssemblyFailure : Error {
  explicit AssemblyFailure(const std::string& msg) : Error(msg) {}
};

struct NotMeanZero : Error {
  explicit NotMeanZero(const std::string& msg) : Error(msg) {}
};

struct SolveFailure : Error {
  explicit SolveFailure(const std::string& msg) : Error(msg) {}
};

struct NoConvergence : Error {
  explicit NoConvergence(const std::string& msg) : Error(msg) {}
};

struct FilamentIntersectsDomain : Error {
  explicit FilamentIntersectsDomain(const std::string& msg) : Error(msg) {}
};

struct OnFilament : Error {
  explicit OnFilament(const std::string& msg) : Error(msg) {}
};

struct RankDeficient : Error {
  explicit RankDeficient(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg, std::string key_ = "")
      : Error(msg), key(std::move(key_)) {}
  std::string key;
};

}  // namespace cws
