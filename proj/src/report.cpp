#include "tilt/report.hpp"

#include <cmath>
#include <cstdio>

namespace tilt {

InequalityReport make_report(std::string name, double lhs, double rhs, double tolerance, std::string method,
                             std::uint64_t seed) {
  InequalityReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.tolerance = tolerance;
  r.holds = lhs <= rhs + tolerance;
  r.method = std::move(method);
  r.seed = seed;
  return r;
}

Json json_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

Json json_number(const ExtReal& v) { return json_number(v.to_double()); }

Json json_optional(const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); }

Json to_json(const InequalityReport& r) {
  Json j;
  j["name"] = r.name;
  j["lhs"] = json_number(r.lhs);
  j["rhs"] = json_number(r.rhs);
  j["gap"] = json_number(r.gap());
  j["tolerance"] = r.tolerance;
  j["holds"] = r.holds;
  j["ratio"] = json_optional(r.ratio);
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["details"] = r.details;
  return j;
}

Json to_json(const WidthEstimate& w) {
  Json j;
  j["mean"] = json_number(w.mean);
  j["ci_half_width"] = json_number(w.ci_half_width);
  j["method"] = to_string(w.method);
  j["samples"] = w.samples;
  j["seed"] = w.seed;
  if (w.hs_bound > 0) j["hs_bound"] = w.hs_bound;
  return j;
}

namespace {

void write_string(std::string& out, const std::string& s) { out += Json(s).dump(); }

void write(std::string& out, const Json& j, int indent) {
  const std::string pad(indent * 2, ' '), inner((indent + 1) * 2, ' ');
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += inner;
        write_string(out, it.key());
        out += ": ";
        write(out, it.value(), indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write(out, j[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        write(out, json_number(v), indent);
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default: out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j) {
  std::string out;
  write(out, j, 0);
  out += "\n";
  return out;
}

}  // namespace tilt
