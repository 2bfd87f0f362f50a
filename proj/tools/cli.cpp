#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tilt/battery.hpp"
#include "tilt/free_energy.hpp"
#include "tilt/integrability.hpp"
#include "tilt/logsob.hpp"
#include "tilt/nld.hpp"
#include "tilt/parallel.hpp"
#include "tilt/potentials.hpp"
#include "tilt/report.hpp"
#include "tilt/rng.hpp"
#include "tilt/transport.hpp"
#include "tilt/width.hpp"

#ifndef TILT_VERSION
#define TILT_VERSION "0.1.0"
#endif

namespace tilt::cli {

std::string version() { return TILT_VERSION; }

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Outcome {
  Json result;
  bool violated = false;
};

// Rows of a curve: column names plus one value vector per column.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values;
};

struct Common {
  std::uint64_t seed = 7;
  unsigned threads = 0;
  std::string out, config, csv, svg;
  bool timing = false;
};

struct PotentialArgs {
  std::string ising, field, linear, multilinear, table;
  int n = 0;
  double random_hs = 0.0;
  double field_scale = 0.0;
};

WidthMode parse_mode(const std::string& s) {
  if (s == "exact") return WidthMode::exact;
  if (s == "mc") return WidthMode::monte_carlo;
  throw UsageError("mode must be 'exact' or 'mc', got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
  }
  return out;
}

bool chosen(const std::string& s) { return !s.empty(); }

Potential build_potential(const PotentialArgs& a, std::uint64_t seed) {
  const int sources = chosen(a.ising) + chosen(a.linear) + chosen(a.multilinear) + chosen(a.table) + (a.random_hs > 0);
  if (sources != 1)
    throw UsageError("give exactly one of --ising, --linear, --multilinear, --table, --random-hs");
  auto check_n = [&](int n) {
    if (a.n > 0 && a.n != n)
      throw UsageError("--n " + std::to_string(a.n) + " does not match the input dimension " + std::to_string(n));
  };
  if (chosen(a.ising)) {
    const Eigen::MatrixXd J = read_matrix_market(a.ising);
    check_n(static_cast<int>(J.rows()));
    Eigen::VectorXd h = chosen(a.field) ? read_vector_csv(a.field) : Eigen::VectorXd::Zero(J.rows());
    if (h.size() != J.rows()) throw UsageError("--field length does not match J");
    return Potential::ising(J, h);
  }
  if (chosen(a.field)) throw UsageError("--field needs --ising");
  if (chosen(a.linear)) {
    const Eigen::VectorXd v = read_vector_csv(a.linear);
    check_n(static_cast<int>(v.size()));
    return Potential::linear(v);
  }
  if (a.n <= 0) throw UsageError("--n is required for this input");
  if (chosen(a.multilinear)) return Potential::multilinear(a.n, read_multilinear_csv(a.multilinear));
  if (chosen(a.table)) {
    const auto t = read_table_csv(a.table, a.n);
    return Potential::from_vertex_table(a.n, t);
  }
  CounterRng rng(seed, StreamTag::generic, 0);
  Eigen::MatrixXd J = random_couplings(a.n, a.random_hs, rng);
  Eigen::VectorXd h(a.n);
  for (int i = 0; i < a.n; ++i) h[i] = a.field_scale * rng.normal();
  return Potential::ising(J, h);
}

void add_potential_options(CLI::App* s, PotentialArgs& a) {
  s->add_option("--ising", a.ising, "Couplings J (Matrix Market)");
  s->add_option("--field", a.field, "External field h (CSV, one value per line)");
  s->add_option("--linear", a.linear, "Linear potential a (CSV)");
  s->add_option("--multilinear", a.multilinear, "Multilinear coefficients (CSV rows bitmask,coefficient)");
  s->add_option("--table", a.table, "Vertex values (CSV rows bitmask,value)");
  s->add_option("--n", a.n, "Dimension");
  s->add_option("--random-hs", a.random_hs, "Random Gaussian couplings with this Hilbert-Schmidt norm");
  s->add_option("--field-scale", a.field_scale, "Scale of the random N(0,1) field with --random-hs");
}

void add_common(CLI::App* s, Common& c, bool plots) {
  s->add_option("--seed", c.seed, "Random seed (64-bit)");
  s->add_option("--threads", c.threads, "Cap on worker threads (0 = all cores)");
  s->add_option("--out", c.out, "Write the JSON report here instead of stdout");
  s->add_option("--config", c.config, "TOML file with flat keys mirroring the flags");
  s->add_flag("--timing", c.timing, "Include wall-clock runtimes in the report")->default_str("false");
  if (plots) {
    s->add_option("--csv", c.csv, "Write the curve as CSV");
    s->add_option("--svg", c.svg, "Write the curve as an SVG plot");
  }
}

// Applies the config file to options not given on the command line.
void apply_config(CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::ParseError& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  for (const auto& item : items) {
    if (!item.parents.empty() || item.name == "++" || item.name == "--")
      throw UsageError("config file " + path + ": sections are not supported, use flat keys");
    CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config" || item.name == "help")
      throw UsageError("config file " + path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;  // flags override the file
    for (const auto& v : item.inputs) opt->add_result(v);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError("config file " + path + ": key '" + item.name + "': " + e.what());
    }
  }
}

Json config_json(const CLI::App* sub) {
  Json cfg = Json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      std::string v;
      for (const auto& r : opt->results()) v += (v.empty() ? "" : ",") + r;
      cfg[name] = v;
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_csv(const std::string& path, const Table& t) {
  std::string s;
  for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c];
  s += "\n";
  const std::size_t rows = t.values.empty() ? 0 : t.values[0].size();
  char buf[40];
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", t.values[c][r]);
      s += (c ? "," : "") + std::string(buf);
    }
    s += "\n";
  }
  write_text(path, s);
}

// Line plot of columns 1.. against column 0.
void write_svg(const std::string& path, const std::string& title, const Table& t) {
  const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
  const auto& xs = t.values.at(0);
  double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = 0.0, ymax = -HUGE_VAL;
  for (double x : xs) xmin = std::min(xmin, x), xmax = std::max(xmax, x);
  for (std::size_t c = 1; c < t.values.size(); ++c)
    for (double y : t.values[c])
      if (std::isfinite(y)) ymin = std::min(ymin, y), ymax = std::max(ymax, y);
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << title << "</text>\n"
    << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = xmin + (xmax - xmin) * k / 4, y = ymin + (ymax - ymin) * k / 4;
    o << "<text x=\"" << px(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(x) << "</text>\n"
      << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
      << "font-size=\"11\">" << fmt(y) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" "
    << "font-family=\"sans-serif\" font-size=\"12\">" << t.columns[0] << "</text>\n";
  for (std::size_t c = 1; c < t.values.size(); ++c) {
    const char* color = colors[(c - 1) % 5];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t r = 0; r < xs.size(); ++r)
      if (std::isfinite(t.values[c][r])) o << px(xs[r]) << "," << py(t.values[c][r]) << " ";
    o << "\"/>\n"
      << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 18 * c << "\" fill=\"" << color
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << t.columns[c] << "</text>\n";
  }
  o << "</svg>\n";
  write_text(path, o.str());
}

Json report_json(const InequalityReport& r, bool& violated) {
  violated = violated || !r.holds;
  return to_json(r);
}

// Subcommand handlers -------------------------------------------------------------

struct Args {
  Common common;
  PotentialArgs pot;
  double p = 0.5;
  std::string mode = "exact";
  std::uint64_t samples = kDefaultWidthSamples;
  double ratio_cap = 8.0;
  // meanfield
  int starts = 32;
  double damping = 0.5;
  int max_iterations = 10000;
  double mf_tolerance = 1e-10;
  // ising-gap
  double hs_min = 0.1, hs_max = 3.0;
  int points = 20;
  double gap_field_scale = 0.0;
  // width
  std::string vectors;
  bool gaussian = false;
  // transport-check
  std::string nu;
  int grid = 2000;
  double tolerance = 2e-3;
  std::string transport_mode = "lp";
  // exp-transport
  double lambda = 1.0;
  double gamma_shape = 0.0, gamma_scale = 1.0;
  int atoms = 400;
  double exp_tolerance = 1e-3;
  // strongint / intexpo
  double strong_tolerance = 1e-12;
  std::string law = "exponential", method = "auto";
  std::uint64_t mc_samples = 1000000;
  // nld
  double t = 0.0, delta = 0.0, C = 1.0, kappa = 1.0;
  int rate_starts = 8, s_grid = 8;
  double grid_step = 0.0;
  // logsob
  double logsob_tolerance = 1e-10;
  // battery
  BatteryConfig battery;
};

Outcome cmd_free_energy(const Args& a) {
  const Potential f = build_potential(a.pot, a.common.seed);
  const BernoulliParam p(a.p);
  const auto nu = gibbs_measure(f, p);
  return {{{"log_partition", exact_log_partition(f, p)}, {"n", f.n()}, {"p", a.p}, {"gibbs_means", nu.means()}},
          false};
}

GapConfig gap_config(const Args& a, std::uint64_t seed) {
  GapConfig g;
  g.meanfield.starts = a.starts;
  g.meanfield.damping = a.damping;
  g.meanfield.max_iterations = a.max_iterations;
  g.meanfield.tolerance = a.mf_tolerance;
  g.meanfield.seed = seed;
  g.width_mode = parse_mode(a.mode);
  g.width_samples = a.samples;
  g.ratio_cap = a.ratio_cap;
  return g;
}

Outcome cmd_meanfield(const Args& a) {
  const Potential f = build_potential(a.pot, a.common.seed);
  const auto r = meanfield_gap_report(f, BernoulliParam(a.p), gap_config(a, a.common.seed));
  return {to_json(r), !(r.gibbs_ok && r.ratio_ok)};
}

Outcome cmd_ising_gap(const Args& a, Table& table) {
  if (a.pot.n <= 0) throw UsageError("--n is required");
  if (a.points < 1 || !(a.hs_min > 0) || !(a.hs_max >= a.hs_min)) throw UsageError("need 0 < hs-min <= hs-max, points >= 1");
  const BernoulliParam p(a.p);
  Json curve = Json::array();
  table.columns = {"hs_norm", "gap", "width", "bound"};
  table.values.assign(4, {});
  bool violated = false;
  const int n = a.pot.n;
  for (int k = 0; k < a.points; ++k) {
    const double hs = a.points == 1 ? a.hs_min : a.hs_min + (a.hs_max - a.hs_min) * k / (a.points - 1);
    CounterRng rng(a.common.seed, StreamTag::generic, static_cast<std::uint64_t>(k));
    Eigen::MatrixXd J = random_couplings(n, hs, rng);
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h[i] = a.gap_field_scale * rng.normal();
    const auto r = meanfield_gap_report(Potential::ising(J, h), p, gap_config(a, a.common.seed + k));
    const double bound = 2.0 * std::sqrt(static_cast<double>(n)) * hs;
    const bool width_ok = r.width.mean <= bound + 1e-9;
    violated = violated || !r.gibbs_ok || !r.ratio_ok || !width_ok;
    curve.push_back({{"hs_norm", hs},
                     {"gap", r.gap},
                     {"width", r.width.mean},
                     {"bound", bound},
                     {"ratio", json_optional(r.ratio)},
                     {"gibbs_ok", r.gibbs_ok},
                     {"ratio_ok", r.ratio_ok},
                     {"width_bound_ok", width_ok}});
    table.values[0].push_back(hs);
    table.values[1].push_back(r.gap);
    table.values[2].push_back(r.width.mean);
    table.values[3].push_back(bound);
  }
  return {{{"n", n}, {"p", a.p}, {"ratio_cap", a.ratio_cap}, {"curve", curve}}, violated};
}

Outcome cmd_width(const Args& a) {
  const WidthMode mode = parse_mode(a.mode);
  if (chosen(a.vectors)) {
    const auto V = read_vectors_csv(a.vectors);
    if (a.gaussian) return {to_json(gaussian_width_finite(V, a.samples, a.common.seed)), false};
    return {to_json(rademacher_width_finite(V, mode, a.samples, a.common.seed)), false};
  }
  if (a.gaussian) throw UsageError("--gaussian needs --vectors");
  const Potential f = build_potential(a.pot, a.common.seed);
  return {to_json(potential_width(f, mode, a.samples, a.common.seed)), false};
}

DenseDistribution parse_nu(const std::string& spec, BernoulliParam p) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw UsageError("--nu must look like product:y1,y2 | probs:w0,w1,.. | file:path");
  const std::string kind = spec.substr(0, colon), rest = spec.substr(colon + 1);
  std::vector<double> w;
  if (kind == "product") return ProductMeasure(parse_list(rest), p).materialize();
  if (kind == "probs") {
    w = parse_list(rest);
  } else if (kind == "file") {
    const auto v = read_vector_csv(rest);
    w.assign(v.data(), v.data() + v.size());
  } else {
    throw UsageError("unknown --nu kind '" + kind + "'");
  }
  int n = 0;
  while ((std::size_t{1} << n) < w.size()) ++n;
  if ((std::size_t{1} << n) != w.size()) throw UsageError("--nu needs 2^n probabilities");
  return DenseDistribution::from_weights(n, w);
}

Outcome cmd_transport_check(const Args& a) {
  if (!chosen(a.nu)) throw UsageError("--nu is required");
  const BernoulliParam p(a.p);
  TranspoConfig cfg;
  cfg.grid = a.grid;
  cfg.tolerance = a.tolerance;
  if (a.transport_mode == "lp")
    cfg.mode = TranspoMode::lp;
  else if (a.transport_mode == "analytic")
    cfg.mode = TranspoMode::product_analytic;
  else
    throw UsageError("--method must be 'lp' or 'analytic'");
  bool violated = false;
  const Json r = report_json(check_transpo_bernoulli(parse_nu(a.nu, p), p, cfg), violated);
  return {r, violated};
}

Outcome cmd_exp_transport(const Args& a) {
  bool violated = false;
  if (a.gamma_shape > 0) {
    const auto r = check_transpoexp_general(gamma_law(a.gamma_shape, a.gamma_scale), a.atoms, a.exp_tolerance);
    return {report_json(r, violated), violated};
  }
  if (!(a.lambda > 0)) throw UsageError("--lambda must be positive");
  return {report_json(check_transpoexp_tilt(a.lambda, a.atoms), violated), violated};
}

std::vector<std::vector<double>> need_vectors(const Args& a) {
  if (!chosen(a.vectors)) throw UsageError("--vectors is required");
  auto V = read_vectors_csv(a.vectors);
  if (V.empty()) throw UsageError("--vectors: empty set");
  return V;
}

Outcome cmd_strongint(const Args& a) {
  StrongIntConfig cfg;
  cfg.ratio_cap = a.ratio_cap;
  cfg.width_mode = parse_mode(a.mode);
  cfg.samples = a.samples;
  cfg.seed = a.common.seed;
  cfg.tolerance = a.strong_tolerance;
  bool violated = false;
  return {report_json(check_strongintB(need_vectors(a), BernoulliParam(a.p), cfg), violated), violated};
}

Outcome cmd_intexpo(const Args& a) {
  const auto V = need_vectors(a);
  const bool one_d = std::all_of(V.begin(), V.end(), [](const auto& v) { return v.size() == 1; });
  bool quad = false;
  if (a.method == "quadrature") {
    if (!one_d) throw UsageError("quadrature needs one-dimensional vectors");
    quad = true;
  } else if (a.method == "auto") {
    quad = one_d;
  } else if (a.method != "mc") {
    throw UsageError("--method must be auto, quadrature or mc");
  }
  std::vector<double> V1;
  if (quad)
    for (const auto& v : V) V1.push_back(v[0]);
  InequalityReport r;
  if (a.law == "exponential")
    r = quad ? check_intexpo_1d(V1) : check_intexpo(V, a.mc_samples, a.common.seed);
  else if (a.law == "gaussian")
    r = quad ? check_strongG_1d(V1) : check_strongG(V, a.mc_samples, a.common.seed);
  else
    throw UsageError("--law must be exponential or gaussian");
  bool violated = false;
  return {report_json(r, violated), violated};
}

Outcome cmd_nld(const Args& a) {
  const Potential f = build_potential(a.pot, a.common.seed);
  if (!(a.delta > 0)) throw UsageError("--delta must be positive");
  NldConfig cfg;
  cfg.rate.starts = a.rate_starts;
  cfg.rate.grid_step = a.grid_step;
  cfg.rate.seed = a.common.seed;
  cfg.s_grid_points = a.s_grid;
  cfg.width_mode = parse_mode(a.mode);
  cfg.width_samples = a.samples;
  cfg.seed = a.common.seed;
  const auto r = nld_report(f, a.t, a.delta, BernoulliParam(a.p), a.C, a.kappa, cfg);
  return {to_json(r), r.asserted && !r.holds};
}

Outcome cmd_logsob(const Args& a) {
  const Potential f = build_potential(a.pot, a.common.seed);
  const GibbsOnCube g(f.n(), f.vertex_table());
  LogSobConfig cfg;
  cfg.ratio_cap = a.ratio_cap;
  cfg.tolerance = a.logsob_tolerance;
  cfg.width_mode = parse_mode(a.mode);
  cfg.width_samples = a.samples;
  cfg.seed = a.common.seed;
  bool violated = false;
  return {report_json(check_logsob_pair(g, cfg), violated), violated};
}

Outcome cmd_battery(const Args& a, Table& table) {
  BatteryConfig cfg = a.battery;
  cfg.seed = a.common.seed;
  const auto results = run_battery(cfg, [](const CriterionResult& r) {
    std::fprintf(stderr, "criterion %d %-28s %s %.1fs\n", r.id, r.name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds);
  });
  Json out = battery_json(results);
  if (a.common.timing) {
    Json secs = Json::object();
    for (const auto& r : results) secs[std::to_string(r.id)] = r.seconds;
    out["criterion_seconds"] = secs;
  }
  table.columns = {"hs_norm", "gap", "width", "bound"};
  table.values.assign(4, {});
  for (const auto& r : results) {
    if (!r.summary.contains("gap_vs_hs_norm")) continue;
    for (const auto& row : r.summary["gap_vs_hs_norm"])
      for (std::size_t c = 0; c < 4; ++c) table.values[c].push_back(row[table.columns[c]].get<double>());
  }
  return {out, !out["all_passed"].get<bool>()};
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Numerical experiments on tilted measures, transport and mean-field bounds", "tiltlab"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);
  Args a;
  std::map<std::string, CLI::App*> subs;
  auto sub = [&](const std::string& name, const std::string& help, bool plots = false) {
    CLI::App* s = app.add_subcommand(name, help);
    s->option_defaults()->always_capture_default();
    add_common(s, a.common, plots);
    subs[name] = s;
    return s;
  };
  auto add_p = [&](CLI::App* s) { s->add_option("--p", a.p, "Bernoulli parameter of the reference measure"); };
  auto add_width = [&](CLI::App* s) {
    s->add_option("--mode", a.mode, "Width evaluation: exact or mc");
    s->add_option("--samples", a.samples, "Monte Carlo samples for the width");
  };
  auto add_meanfield = [&](CLI::App* s) {
    s->add_option("--starts", a.starts, "Random mean-field starts");
    s->add_option("--damping", a.damping, "Fixed-point damping");
    s->add_option("--max-iterations", a.max_iterations, "Fixed-point iteration cap");
    s->add_option("--mf-tolerance", a.mf_tolerance, "Fixed-point tolerance");
    s->add_option("--ratio-cap", a.ratio_cap, "Constant in gap <= cap * width");
  };

  CLI::App* s = sub("free-energy", "Exact log partition function and Gibbs means");
  add_potential_options(s, a.pot);
  add_p(s);

  s = sub("meanfield", "Mean-field value, exact log Z and the width bound on the gap");
  add_potential_options(s, a.pot);
  add_p(s);
  add_width(s);
  add_meanfield(s);

  s = sub("ising-gap", "Mean-field gap against ||J||_2 on random Ising couplings", true);
  s->add_option("--n", a.pot.n, "Dimension");
  s->add_option("--hs-min", a.hs_min, "Smallest Hilbert-Schmidt norm");
  s->add_option("--hs-max", a.hs_max, "Largest Hilbert-Schmidt norm");
  s->add_option("--points", a.points, "Number of curve points");
  s->add_option("--field-scale", a.gap_field_scale, "Scale of the random N(0,1) field");
  add_p(s);
  add_width(s);
  add_meanfield(s);

  s = sub("width", "Rademacher (or Gaussian) width of a gradient set");
  add_potential_options(s, a.pot);
  s->add_option("--vectors", a.vectors, "Finite set, one vector per CSV row");
  s->add_flag("--gaussian", a.gaussian, "Gaussian instead of Rademacher width (with --vectors)")->default_str("false");
  add_width(s);

  s = sub("transport-check", "w_p transport cost against relative entropy on {-1,1}^n");
  add_p(s);
  s->add_option("--nu", a.nu, "product:y1,y2 | probs:w0,..,w3 | file:path")->required();
  s->add_option("--grid", a.grid, "Midpoint grid size per coordinate");
  s->add_option("--tolerance", a.tolerance, "Slack allowed for discretization");
  s->add_option("--method", a.transport_mode, "lp or analytic (product measures)");

  s = sub("exp-transport", "Exponential transport against relative entropy on the half line");
  s->add_option("--lambda", a.lambda, "Exponential law with mean lambda");
  s->add_option("--gamma-shape", a.gamma_shape, "Gamma law instead (shape > 0)");
  s->add_option("--gamma-scale", a.gamma_scale, "Gamma scale");
  s->add_option("--atoms", a.atoms, "Atoms of the discretized LP");
  s->add_option("--tolerance", a.exp_tolerance, "Slack for general laws");

  s = sub("strongint", "Exponential integrability of sup-processes under Bernoulli laws");
  s->add_option("--vectors", a.vectors, "Finite set V, one vector per CSV row");
  add_p(s);
  add_width(s);
  s->add_option("--ratio-cap", a.ratio_cap, "Constant in LHS <= cap * b(V)");
  s->add_option("--tolerance", a.strong_tolerance, "Absolute slack");

  s = sub("intexpo", "Exponential integrability for exponential or Gaussian laws");
  s->add_option("--vectors", a.vectors, "Finite set V, one vector per CSV row");
  s->add_option("--law", a.law, "exponential or gaussian");
  s->add_option("--method", a.method, "auto, quadrature (1-D) or mc");
  s->add_option("--samples", a.mc_samples, "Monte Carlo samples");

  s = sub("nld", "Nonlinear large deviation bound against the exact tail");
  add_potential_options(s, a.pot);
  add_p(s);
  add_width(s);
  s->add_option("--t", a.t, "Threshold")->required();
  s->add_option("--delta", a.delta, "Slack delta")->required();
  s->add_option("--C", a.C, "Constant C");
  s->add_option("--kappa", a.kappa, "Gate constant kappa in b(V) <= delta / kappa");
  s->add_option("--rate-starts", a.rate_starts, "Random starts of the rate optimizer");
  s->add_option("--grid-step", a.grid_step, "Grid step for n <= 3 (0 = automatic)");
  s->add_option("--s-grid", a.s_grid, "Points of the monotonicity grid");

  s = sub("logsob", "Log-Sobolev chain and its reverse for nu = e^f mu");
  add_potential_options(s, a.pot);
  add_width(s);
  s->add_option("--ratio-cap", a.ratio_cap, "Constant in the reverse inequality");
  s->add_option("--tolerance", a.logsob_tolerance, "Slack of the ordering checks");

  s = sub("battery", "Full acceptance battery with empirical constants", true);
  auto& b = a.battery;
  s->add_option("--transport-grid", b.transport_grid, "Grid of the Bernoulli transport LP");
  s->add_option("--product-measures", b.product_measures, "Product measures in criterion 2");
  s->add_option("--nonproduct-measures", b.nonproduct_measures, "Non-product measures in criterion 2");
  s->add_option("--exp-lp-atoms", b.exp_lp_atoms, "Atoms of the exponential LP");
  s->add_option("--ising-instances", b.ising_instances, "Ising instances in criteria 4-5");
  s->add_option("--ising-n", b.ising_n, "Ising dimension");
  s->add_option("--tilt-instances", b.tilt_instances, "Linear tilts in criterion 4");
  s->add_option("--strongint-sets", b.strongint_sets, "Sets in criterion 6");
  s->add_option("--intexpo-mc-instances", b.intexpo_mc_instances, "Monte Carlo instances in criterion 7");
  s->add_option("--intexpo-samples", b.intexpo_samples, "Samples per Monte Carlo instance");
  s->add_option("--nld-linear", b.nld_linear, "Linear potentials in criterion 8");
  s->add_option("--nld-ising", b.nld_ising, "Ising potentials in criterion 8");
  s->add_option("--logsob-instances", b.logsob_instances, "Random potentials in criterion 9");
  s->add_option("--logsob-tilts", b.logsob_tilts, "Tilts in criterion 9");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cout, std::cerr);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* chosen_sub = app.get_subcommands().front();
    const std::string name = chosen_sub->get_name();
    if (!a.common.config.empty()) apply_config(chosen_sub, a.common.config);
    set_thread_cap(a.common.threads);
    const auto start = std::chrono::steady_clock::now();
    Table table;
    Outcome outcome;
    if (name == "free-energy") outcome = cmd_free_energy(a);
    else if (name == "meanfield") outcome = cmd_meanfield(a);
    else if (name == "ising-gap") outcome = cmd_ising_gap(a, table);
    else if (name == "width") outcome = cmd_width(a);
    else if (name == "transport-check") outcome = cmd_transport_check(a);
    else if (name == "exp-transport") outcome = cmd_exp_transport(a);
    else if (name == "strongint") outcome = cmd_strongint(a);
    else if (name == "intexpo") outcome = cmd_intexpo(a);
    else if (name == "nld") outcome = cmd_nld(a);
    else if (name == "logsob") outcome = cmd_logsob(a);
    else outcome = cmd_battery(a, table);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    Json report = {{"command", name},
                   {"version", version()},
                   {"seed", a.common.seed},
                   {"config", config_json(chosen_sub)},
                   {"result", outcome.result},
                   {"violated", outcome.violated}};
    if (a.common.timing) report["runtime_seconds"] = seconds;
    const std::string text = dump_json(report);
    if (a.common.out.empty())
      std::cout << text;
    else
      write_text(a.common.out, text);
    if (!table.columns.empty()) {
      if (!a.common.csv.empty()) write_csv(a.common.csv, table);
      if (!a.common.svg.empty()) write_svg(a.common.svg, "mean-field gap vs ||J||_2", table);
    }
    return outcome.violated ? kExitViolation : kExitOk;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.get_subcommands().front()->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace tilt::cli
