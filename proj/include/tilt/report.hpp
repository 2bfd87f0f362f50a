#ifndef TILT_REPORT_HPP
#define TILT_REPORT_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"
#include "tilt/ext_real.hpp"
#include "tilt/width.hpp"

namespace tilt {

using Json = nlohmann::json;

// Outcome of checking one inequality lhs <= rhs (+ tolerance).
struct InequalityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
  bool holds = true;
  std::optional<double> ratio;  // empirical constant, when meaningful
  std::string method;
  std::uint64_t seed = 0;
  Json details = Json::object();

  double gap() const { return rhs - lhs; }
};

// Fills holds = lhs <= rhs + tolerance.
InequalityReport make_report(std::string name, double lhs, double rhs, double tolerance, std::string method,
                             std::uint64_t seed = 0);

Json to_json(const InequalityReport& r);
Json to_json(const WidthEstimate& w);
// Non-finite doubles become "+inf"/"-inf"/"nan" so the output stays valid JSON.
Json json_number(double v);
Json json_number(const ExtReal& v);
Json json_optional(const std::optional<double>& v);

// Sorted keys, 17 significant digits, two-space indentation.
std::string dump_json(const Json& j);

}  // namespace tilt

#endif
