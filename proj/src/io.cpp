#include "specvol/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "specvol/errors.hpp"
#include "specvol/matrix_ops.hpp"
#include "specvol/stats.hpp"

namespace specvol {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (trim(s.substr(pos)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("line " + std::to_string(line) + ": cannot parse number '" + s + "'");
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

const char* sampling_name(SamplingScheme::Kind k) {
  switch (k) {
    case SamplingScheme::Kind::identity: return "identity";
    case SamplingScheme::Kind::power: return "power";
    case SamplingScheme::Kind::sine: return "sine";
    case SamplingScheme::Kind::poisson: return "poisson";
  }
  return "?";
}

SamplingScheme::Kind sampling_kind(const std::string& s) {
  if (s == "identity") return SamplingScheme::Kind::identity;
  if (s == "power") return SamplingScheme::Kind::power;
  if (s == "sine") return SamplingScheme::Kind::sine;
  if (s == "poisson") return SamplingScheme::Kind::poisson;
  throw ConfigError("unknown sampling kind '" + s + "'");
}

const char* noise_name(NoiseDistribution d) {
  switch (d) {
    case NoiseDistribution::gaussian: return "gaussian";
    case NoiseDistribution::uniform: return "uniform";
    case NoiseDistribution::two_point: return "two_point";
  }
  return "?";
}

NoiseDistribution noise_kind(const std::string& s) {
  if (s == "gaussian") return NoiseDistribution::gaussian;
  if (s == "uniform") return NoiseDistribution::uniform;
  if (s == "two_point") return NoiseDistribution::two_point;
  throw ConfigError("unknown noise distribution '" + s + "'");
}

const char* volatility_name(VolatilityModel::Kind k) {
  switch (k) {
    case VolatilityModel::Kind::constant: return "constant";
    case VolatilityModel::Kind::stoch_vol_seasonal: return "stoch_vol_seasonal";
    case VolatilityModel::Kind::grid: return "grid";
  }
  return "?";
}

VolatilityModel::Kind volatility_kind(const std::string& s) {
  if (s == "constant") return VolatilityModel::Kind::constant;
  if (s == "stoch_vol_seasonal") return VolatilityModel::Kind::stoch_vol_seasonal;
  if (s == "grid") return VolatilityModel::Kind::grid;
  throw ConfigError("unknown volatility kind '" + s + "'");
}

// Scalars broadcast to one-element vectors.
template <class T>
std::vector<T> as_vector(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

json ci_row(double estimate, double variance, double z) {
  if (variance > 0.0) {
    const double half = z * std::sqrt(variance);
    return json::array({estimate - half, estimate + half});
  }
  return json::array({nullptr, nullptr});
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void write_observations_csv(std::ostream& out, const ObservationSet& obs) {
  out << "component,time,value\n";
  char buf[96];
  for (int p = 0; p < obs.dimension(); ++p) {
    const auto& c = obs[p];
    for (std::size_t i = 0; i < c.times.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", p, c.times[i], c.values[i]);
      out << buf;
    }
  }
}

ObservationSet read_observations_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("observation CSV is empty");
  if (trim(line) != "component,time,value")
    throw ConfigError("observation CSV header must be 'component,time,value'");
  std::map<int, ComponentObservations> comps;
  std::size_t no = 1;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    std::stringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw ConfigError("line " + std::to_string(no) + ": expected three fields");
    const double comp = parse_double(trim(a), no);
    if (comp < 0 || comp != std::floor(comp))
      throw ConfigError("line " + std::to_string(no) + ": component must be a nonnegative integer");
    auto& target = comps[static_cast<int>(comp)];
    target.times.push_back(parse_double(trim(b), no));
    target.values.push_back(parse_double(trim(c), no));
  }
  ObservationSet obs;
  int expected = 0;
  for (auto& [p, c] : comps) {
    if (p != expected++) throw ConfigError("components must be numbered 0..d-1 without gaps");
    obs.components.push_back(std::move(c));
  }
  if (obs.components.empty()) throw ConfigError("observation CSV has no rows");
  try {
    obs.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("invalid observations: ") + e.what());
  }
  return obs;
}

ObservationSet read_observations_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_observations_csv(in);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  try {
    if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
    if (j.is_array()) {
      const auto rows = j.size();
      if (rows == 0) throw ConfigError("matrix must not be empty");
      const auto cols = j[0].size();
      Eigen::MatrixXd m(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError("matrix rows differ in length");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
      }
      return m;
    }
    check_keys(j, {"rows", "cols", "data"}, "matrix");
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw ConfigError("matrix data does not match rows x cols");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad matrix: ") + e.what());
  }
}

json scenario_to_json(const ScenarioConfig& c) {
  json v;
  v["kind"] = volatility_name(c.volatility.kind);
  if (c.volatility.covolatility.size() > 0) v["covolatility"] = matrix_to_json(c.volatility.covolatility);
  v["sigma_tilde"] = c.volatility.sigma_tilde;
  v["leverage"] = c.volatility.leverage;
  if (c.volatility.correlation.size() > 0) v["correlation"] = matrix_to_json(c.volatility.correlation);
  if (!c.volatility.grid_times.empty()) {
    v["grid_times"] = c.volatility.grid_times;
    json values = json::array();
    for (const auto& m : c.volatility.grid_values) values.push_back(matrix_to_json(m));
    v["grid_values"] = values;
  }
  json sampling = json::array();
  for (const auto& s : c.sampling)
    sampling.push_back({{"kind", sampling_name(s.kind)}, {"parameter", s.parameter}});
  json j;
  j["n"] = c.n;
  j["n_per_component"] = c.n_per_component;
  j["d"] = c.d;
  j["h_inv"] = c.h_inv;
  j["drift"] = c.drift;
  j["volatility"] = v;
  j["noise"] = {{"eta", c.noise.eta}, {"distribution", noise_name(c.noise.distribution)}};
  j["sampling"] = sampling;
  j["seed"] = c.seed;
  j["fine_grid_steps"] = c.fine_grid_steps;
  return j;
}

// Non-negative integer field; json would silently wrap negatives.
template <class T>
T count_field(const json& v, const char* name) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string(name) + " must be a non-negative integer");
  return v.get<T>();
}

ScenarioConfig scenario_from_json(const json& j) {
  try {
    check_keys(j, {"n", "n_per_component", "d", "h_inv", "drift", "volatility", "noise", "sampling",
                   "seed", "fine_grid_steps"},
               "scenario");
    ScenarioConfig c;
    if (j.contains("d")) c.d = count_field<int>(j["d"], "d");
    if (j.contains("n")) c.n = count_field<std::size_t>(j["n"], "n");
    if (j.contains("n_per_component"))
      for (const json& e : j["n_per_component"])
        c.n_per_component.push_back(count_field<std::size_t>(e, "n_per_component"));
    if (j.contains("h_inv")) c.h_inv = count_field<int>(j["h_inv"], "h_inv");
    if (j.contains("drift")) c.drift = as_vector<double>(j["drift"]);
    if (j.contains("seed")) c.seed = count_field<std::uint64_t>(j["seed"], "seed");
    if (j.contains("fine_grid_steps")) c.fine_grid_steps = count_field<std::size_t>(j["fine_grid_steps"], "fine_grid_steps");
    c.noise.eta = {0.01};
    if (j.contains("noise")) {
      const json& n = j["noise"];
      check_keys(n, {"eta", "distribution"}, "noise");
      if (n.contains("eta")) c.noise.eta = as_vector<double>(n["eta"]);
      if (n.contains("distribution")) c.noise.distribution = noise_kind(n["distribution"].get<std::string>());
    }
    if (j.contains("sampling")) {
      const json& s = j["sampling"];
      for (const json& e : s.is_array() ? s : json::array({s})) {
        check_keys(e, {"kind", "parameter"}, "sampling");
        SamplingScheme scheme;
        scheme.kind = sampling_kind(e.at("kind").get<std::string>());
        if (e.contains("parameter")) scheme.parameter = e["parameter"].get<double>();
        c.sampling.push_back(scheme);
      }
    }
    VolatilityModel& v = c.volatility;
    v.covolatility = Eigen::MatrixXd::Identity(c.d, c.d);
    if (j.contains("volatility")) {
      const json& vj = j["volatility"];
      check_keys(vj, {"kind", "covolatility", "sigma_tilde", "leverage", "correlation", "grid_times",
                      "grid_values"},
                 "volatility");
      if (vj.contains("kind")) v.kind = volatility_kind(vj["kind"].get<std::string>());
      if (vj.contains("covolatility")) v.covolatility = matrix_from_json(vj["covolatility"]);
      if (vj.contains("sigma_tilde")) v.sigma_tilde = vj["sigma_tilde"].get<double>();
      if (vj.contains("leverage")) v.leverage = vj["leverage"].get<double>();
      if (vj.contains("correlation")) v.correlation = matrix_from_json(vj["correlation"]);
      if (vj.contains("grid_times")) v.grid_times = vj["grid_times"].get<std::vector<double>>();
      if (vj.contains("grid_values"))
        for (const json& m : vj["grid_values"]) v.grid_values.push_back(matrix_from_json(m));
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scenario config: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scenario_from_json(j);
}

void write_paths_csv(std::ostream& out, const PathBundle& paths) {
  const int d = paths.dimension();
  out << "time";
  for (int p = 0; p < d; ++p) out << ",x_" << p;
  for (int p = 0; p < d; ++p)
    for (int q = 0; q < d; ++q) out << ",spot_" << p << q;
  out << '\n';
  const auto& t = paths.times();
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << fmt(t[i]);
    for (int p = 0; p < d; ++p) out << ',' << fmt(paths.signal(p, static_cast<Eigen::Index>(i)));
    const auto& s = paths.volatility.spot[i];
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) out << ',' << fmt(s(p, q));
    out << '\n';
  }
}

json report_to_json(const EstimateReport& r, double level) {
  const double z = normal_quantile(0.5 * (1.0 + level));
  json ci = json::array();
  for (std::size_t i = 0; i < r.estimate.size(); ++i) ci.push_back(ci_row(r.estimate[i], r.variance[i], z));
  json j;
  j["estimator"] = r.estimator;
  j["mode"] = to_string(r.mode);
  j["t"] = r.times;
  j["estimate"] = r.estimate;
  j["variance"] = r.variance;
  j["local"] = r.local;
  j["ci_level"] = level;
  j["ci"] = ci;
  j["noise_variance"] = r.noise_variance;
  j["config"] = r.config_echo.empty() ? json::object() : json::parse(r.config_echo);
  return j;
}

void write_report_csv(std::ostream& out, const EstimateReport& r, double level) {
  const double z = normal_quantile(0.5 * (1.0 + level));
  out << "t,estimate,variance,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < r.estimate.size(); ++i) {
    const double half = r.variance[i] > 0.0 ? z * std::sqrt(r.variance[i]) : 0.0;
    out << fmt(r.times[i]) << ',' << fmt(r.estimate[i]) << ',' << fmt(r.variance[i]) << ','
        << fmt(r.estimate[i] - half) << ',' << fmt(r.estimate[i] + half) << '\n';
  }
}

json lmm_report_to_json(const LmmReport& r) {
  json path = json::array();
  for (std::size_t i = 0; i < r.estimate.size(); ++i)
    path.push_back({{"t", r.times[i]},
                    {"estimate", matrix_to_json(unvec(r.estimate[i]))},
                    {"covariance", matrix_to_json(r.covariance[i])}});
  json j;
  j["estimator"] = "lmm";
  j["mode"] = to_string(r.mode);
  j["d"] = r.d;
  j["path"] = path;
  j["final_estimate"] = matrix_to_json(r.final_matrix());
  j["final_covariance"] = matrix_to_json(r.final_covariance());
  j["noise_variance"] = std::vector<double>(r.noise_variance.data(),
                                            r.noise_variance.data() + r.noise_variance.size());
  j["regularized"] = r.regularized;
  j["config"] = r.config_echo.empty() ? json::object() : json::parse(r.config_echo);
  return j;
}

void write_lmm_report_csv(std::ostream& out, const LmmReport& r, double level) {
  const double z = normal_quantile(0.5 * (1.0 + level));
  const Eigen::MatrixXd zmat = symmetrizer_z(r.d);
  out << "t,p,q,estimate,variance,ci_lo,ci_hi\n";
  for (std::size_t i = 0; i < r.estimate.size(); ++i) {
    const Eigen::MatrixXd cz = r.covariance[i] * zmat;
    for (int q = 0; q < r.d; ++q)
      for (int p = 0; p < r.d; ++p) {
        const int idx = p + r.d * q;
        const double est = r.estimate[i](idx);
        const double var = cz(idx, idx);
        const double half = var > 0.0 ? z * std::sqrt(var) : 0.0;
        out << fmt(r.times[i]) << ',' << p << ',' << q << ',' << fmt(est) << ',' << fmt(var) << ','
            << fmt(est - half) << ',' << fmt(est + half) << '\n';
      }
  }
}

json mc_report_to_json(const McReport& report, bool include_records) {
  json results = json::array();
  for (const auto& res : report.results) {
    const auto& a = res.aggregate;
    json agg = {{"mean", a.mean},
                {"truth", a.truth},
                {"bias", a.bias},
                {"variance", a.variance},
                {"rmse", a.rmse},
                {"mean_variance_estimate", a.mean_variance_estimate},
                {"avar", a.avar},
                {"rate_n", a.rate_n},
                {"re", a.re},
                {"coverage", a.coverage},
                {"coverage_ci", {a.coverage_lo, a.coverage_hi}}};
    if (!a.studentized_variance.empty()) agg["studentized_variance"] = a.studentized_variance;
    json entry = {{"estimator", to_string(res.estimator)}, {"aggregate", agg}};
    if (include_records) {
      json recs = json::array();
      for (const auto& r : res.records) {
        json rec = {{"estimate", r.estimate},
                    {"variance", r.variance},
                    {"truth", r.truth},
                    {"ci_hit", r.ci_hit}};
        if (r.studentized.size() > 0)
          rec["studentized"] = std::vector<double>(r.studentized.data(),
                                                   r.studentized.data() + r.studentized.size());
        recs.push_back(rec);
      }
      entry["records"] = recs;
    }
    results.push_back(entry);
  }
  json j;
  j["scenario"] = scenario_to_json(report.scenario);
  j["reps"] = report.reps;
  j["master_seed"] = report.master_seed;
  j["ci_level"] = report.options.level;
  j["leverage_coupling"] = to_string(report.options.leverage);
  j["wall_seconds"] = report.wall_seconds;
  j["volatility_clamp_count"] = report.clamp_count;
  j["results"] = results;
  return j;
}

void write_mc_summary(std::ostream& out, const McReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %14s %12s %12s %8s %9s\n", "estimator", "mean", "bias",
                "rmse", "RE", "coverage");
  out << buf;
  for (const auto& res : report.results) {
    const auto& a = res.aggregate;
    std::snprintf(buf, sizeof buf, "%-12s %14.6g %12.4g %12.4g %8.3f %9.3f\n",
                  to_string(res.estimator), a.mean, a.bias, a.rmse, a.re, a.coverage);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "reps %zu, seed %llu, %.1f s\n", report.reps,
                static_cast<unsigned long long>(report.master_seed), report.wall_seconds);
  out << buf;
}

namespace {

std::string sigma_label(const Table1Row& row) {
  if (!row.stochastic) {
    std::ostringstream s;
    s << std::sqrt(row.config.volatility.covolatility(0, 0));
    return s.str();
  }
  return "stoch";
}

}  // namespace

json table1_to_json(const std::vector<Table1Result>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    const auto& c = r.row.config;
    json row = {{"n", c.n},
                {"sigma", sigma_label(r.row)},
                {"h_inv", c.h_inv},
                {"eta", c.eta(0)},
                {"re_oracle", r.re_oracle},
                {"re_adaptive", r.re_adaptive},
                {"reference_oracle", r.row.reference_oracle},
                {"reference_adaptive", r.row.reference_adaptive},
                {"reps", r.report.reps},
                {"wall_seconds", r.report.wall_seconds}};
    row["lambda"] = r.row.stochastic ? json(c.volatility.leverage) : json(nullptr);
    out.push_back(row);
  }
  return out;
}

void write_table1(std::ostream& out, const std::vector<Table1Result>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%7s %6s %6s %7s %6s | %9s %9s | %9s %9s\n", "n", "sigma", "h^-1",
                "eta", "lambda", "RE(or)", "ref", "RE(ad)", "ref");
  out << buf;
  for (const auto& r : rows) {
    const auto& c = r.row.config;
    const std::string lambda =
        r.row.stochastic ? std::to_string(c.volatility.leverage).substr(0, 3) : "-";
    std::snprintf(buf, sizeof buf, "%7zu %6s %6d %7.3g %6s | %9.3f %9.2f | %9.3f %9.2f\n", c.n,
                  sigma_label(r.row).c_str(), c.h_inv, c.eta(0), lambda.c_str(), r.re_oracle,
                  r.row.reference_oracle, r.re_adaptive, r.row.reference_adaptive);
    out << buf;
  }
}

void write_table1_csv(std::ostream& out, const std::vector<Table1Result>& rows) {
  out << "n,sigma,h_inv,eta,lambda,re_oracle,reference_oracle,re_adaptive,reference_adaptive\n";
  for (const auto& r : rows) {
    const auto& c = r.row.config;
    out << c.n << ',' << sigma_label(r.row) << ',' << c.h_inv << ',' << fmt(c.eta(0)) << ','
        << (r.row.stochastic ? fmt(c.volatility.leverage) : std::string()) << ','
        << fmt(r.re_oracle) << ',' << fmt(r.row.reference_oracle) << ',' << fmt(r.re_adaptive) << ','
        << fmt(r.row.reference_adaptive) << '\n';
  }
}

}  // namespace specvol
