#include "qenv/experiment.hpp"

#include "qenv/nisio.hpp"
#include "qenv/ode.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace qenv {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a real number, got '" + value + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(key, item));
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "d",   "delta", "t",     "q0",    "q",       "lambda-low", "lambda-high", "payoff",
      "K",   "L",     "method", "steps", "n",      "k",          "refs",        "out",
      "seed", "pmp-trials", "method2", "steps2", "n2", "k2",     "tol",         "matrix",
      "expm-k"};
  return keys;
}

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& value) {
  const std::string key = normalize_key(trim(raw_key));
  const std::string v = trim(value);
  auto positive_int = [&](long long x) {
    if (x < 1) throw ConfigError("key '" + key + "': must be >= 1");
    return x;
  };
  if (key == "d") {
    cfg.d = parse_int(key, v);
    if (cfg.d < 2) throw ConfigError("key 'd': must be >= 2");
  } else if (key == "delta") {
    cfg.delta = parse_double(key, v);
    if (!(cfg.delta > 0.0)) throw ConfigError("key 'delta': must be positive");
  } else if (key == "t") {
    cfg.t = parse_double(key, v);
    if (cfg.t < 0.0) throw ConfigError("key 't': must be >= 0");
  } else if (key == "q0") {
    cfg.q0 = v;
  } else if (key == "q") {
    cfg.q = v;
  } else if (key == "lambda-low") {
    cfg.lambda_low = parse_double(key, v);
  } else if (key == "lambda-high") {
    cfg.lambda_high = parse_double(key, v);
  } else if (key == "payoff") {
    cfg.payoff = v;
  } else if (key == "K") {
    cfg.K = parse_double(key, v);
  } else if (key == "L") {
    cfg.L = parse_double(key, v);
  } else if (key == "method") {
    cfg.method = v;
  } else if (key == "steps") {
    cfg.steps = positive_int(parse_int(key, v));
  } else if (key == "n") {
    cfg.n = static_cast<int>(parse_int(key, v));
    if (cfg.n < 0 || cfg.n > 30) throw ConfigError("key 'n': must be in [0, 30]");
  } else if (key == "k") {
    cfg.k = parse_int(key, v);
    if (cfg.k < 0) throw ConfigError("key 'k': must be >= 0");
  } else if (key == "refs") {
    cfg.refs = parse_list(key, v);
  } else if (key == "out") {
    cfg.out = v;
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
  } else if (key == "pmp-trials") {
    cfg.pmp_trials = static_cast<std::size_t>(positive_int(parse_int(key, v)));
  } else if (key == "method2") {
    cfg.method2 = v;
  } else if (key == "steps2") {
    cfg.steps2 = positive_int(parse_int(key, v));
  } else if (key == "n2") {
    cfg.n2 = static_cast<int>(parse_int(key, v));
    if (cfg.n2 < 0 || cfg.n2 > 30) throw ConfigError("key 'n2': must be in [0, 30]");
  } else if (key == "k2") {
    cfg.k2 = parse_int(key, v);
    if (cfg.k2 < 0) throw ConfigError("key 'k2': must be >= 0");
  } else if (key == "tol") {
    cfg.tol = parse_double(key, v);
    if (cfg.tol < 0.0) throw ConfigError("key 'tol': must be >= 0");
  } else if (key == "matrix") {
    cfg.matrix = v;
  } else if (key == "expm-k") {
    cfg.expm_k = parse_int(key, v);
    if (cfg.expm_k < 0) throw ConfigError("key 'expm-k': must be >= 0");
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

std::map<std::string, std::string> parse_config_text(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = normalize_key(trim(std::string_view(body).substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    entries[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return entries;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  const auto entries = parse_config_text(in);
  for (const char* required : {"d", "delta", "t"}) {
    if (!entries.contains(required)) {
      throw ConfigError("config file '" + path + "': missing required key '" + required + "'");
    }
  }
  ExperimentConfig cfg;
  for (const auto& [key, value] : entries) apply_setting(cfg, key, value);
  return cfg;
}

Matrix build_matrix(const std::string& source, const ExperimentConfig& cfg) {
  if (source.rfind("file:", 0) == 0) return read_matrix_file(source.substr(5));
  const auto parts = split(source, ':');
  if (parts.empty()) throw ConfigError("empty matrix source");
  const std::string& kind = parts[0];
  long long d = cfg.d;
  double delta = cfg.delta;
  if (kind == "zero") {
    if (parts.size() == 2) d = parse_int("matrix size", parts[1]);
    if (parts.size() > 2) throw ConfigError("matrix source 'zero' takes at most one argument");
    if (d < 1) throw ConfigError("matrix source 'zero': size must be >= 1");
    return Matrix::Zero(d, d);
  }
  if (kind != "laplacian" && kind != "drift") {
    throw ConfigError("unknown matrix source '" + source +
                      "' (expected laplacian, drift, zero or file:<path>)");
  }
  if (parts.size() == 3) {
    d = parse_int("matrix size", parts[1]);
    delta = parse_double("matrix spacing", parts[2]);
  } else if (parts.size() != 1) {
    throw ConfigError("matrix source '" + source + "': expected " + kind + ":<d>:<delta>");
  }
  return kind == "laplacian" ? build_laplacian_a(d, delta).matrix()
                             : build_drift_b(d, delta).matrix();
}

Payoff build_payoff(const ExperimentConfig& cfg) {
  const StateGrid grid(cfg.d, cfg.delta);
  if (cfg.payoff == "butterfly") return payoff_butterfly(grid, cfg.K, cfg.L);
  if (cfg.payoff == "bull") return payoff_bull(grid, cfg.K, cfg.L);
  if (cfg.payoff.rfind("file:", 0) == 0) {
    return payoff_custom(grid, read_vector_file(cfg.payoff.substr(5)));
  }
  throw ConfigError("unknown payoff '" + cfg.payoff + "' (expected butterfly, bull or file:<path>)");
}

PricingMethod build_method(const std::string& name, long long steps, int n, long long k) {
  if (name == "ode-euler" || name == "euler") return OdeEuler{steps};
  if (name == "ode-rk4" || name == "rk4") return OdeRk4{steps};
  if (name == "nisio") return NisioMethod{n, k};
  throw ConfigError("unknown method '" + name + "' (expected ode-euler, ode-rk4 or nisio)");
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

struct Column {
  std::string name;
  Vector values;
};

void write_csv(std::ostream& os, const std::vector<Column>& columns) {
  os << "state_index";
  for (const auto& c : columns) os << ',' << c.name;
  os << '\n';
  const Eigen::Index rows = columns.empty() ? 0 : columns.front().values.size();
  for (Eigen::Index i = 0; i < rows; ++i) {
    os << i;
    for (const auto& c : columns) os << ',' << format_value(c.values(i));
    os << '\n';
  }
}

bool write_csv_file(const std::string& path, const std::vector<Column>& columns,
                    std::ostream& err) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    err << "error: cannot write output file '" << path << "'\n";
    return false;
  }
  write_csv(file, columns);
  file.flush();
  if (!file) {
    err << "error: failed writing output file '" << path << "'\n";
    return false;
  }
  return true;
}

GeneratorFamily build_family(const ExperimentConfig& cfg, const Matrix& q0, const Matrix& q) {
  if (q0.rows() != cfg.d || q.rows() != cfg.d) {
    throw DimensionMismatch("matrix dimension (" + std::to_string(q0.rows()) + ", " +
                            std::to_string(q.rows()) + ") differs from grid size d = " +
                            std::to_string(cfg.d));
  }
  return interval_generator(q0, q, cfg.lambda_low, cfg.lambda_high);
}

void warn_about_step_size(const GeneratorFamily& fam, double t, const PricingMethod& method,
                          std::ostream& err) {
  double ratio = 0.0;
  std::string what;
  if (const auto* e = std::get_if<OdeEuler>(&method)) {
    ratio = euler_step_ratio(fam, t, e->steps);
    what = "Euler step";
  } else if (const auto* r = std::get_if<OdeRk4>(&method)) {
    ratio = euler_step_ratio(fam, t, r->steps);
    what = "RK4 step";
  } else if (const auto* m = std::get_if<NisioMethod>(&method); m && m->k > 0) {
    ratio = std::ldexp(t, -m->n) / static_cast<double>(m->k) * fam.max_rate_norm();
    what = "Euler-product factor";
  }
  if (ratio > 1.0) {
    err << "warning: " << what << " times max rate norm is " << ratio
        << " > 1; the discrete map is no longer a kernel\n";
  }
}

std::string lambda_label(double lambda) {
  std::ostringstream os;
  os << lambda;
  return "ref_" + os.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void print_curve(std::ostream& out, const std::string& name, const Vector& v) {
  out << "  " << std::left << std::setw(12) << name << " min " << format_value(v.minCoeff())
      << "  max " << format_value(v.maxCoeff()) << '\n';
}

}  // namespace

int cmd_validate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  (void)err;
  const Matrix q0 = build_matrix(cfg.q0, cfg);
  const Matrix q = build_matrix(cfg.q, cfg);
  if (q0.rows() != q.rows() || q0.cols() != q.cols()) {
    throw DimensionMismatch("q0 and q differ in shape");
  }
  if (!(cfg.lambda_low <= cfg.lambda_high)) {
    throw InvalidInput("lambda-low must not exceed lambda-high");
  }

  bool all_ok = true;
  auto row = [&out](const std::string& check, bool ok, const std::string& detail) {
    out << std::left << std::setw(52) << check << (ok ? "PASS" : "FAIL");
    if (!detail.empty()) out << "  " << detail;
    out << '\n';
  };
  out << std::left << std::setw(52) << "check" << "result\n";

  std::vector<GeneratorFamily::Member> members;
  int idx = 0;
  for (double lambda : {cfg.lambda_low, cfg.lambda_high}) {
    Matrix rates = q0 + lambda * q;
    const auto check = validate_q_matrix(rates);
    std::string detail;
    for (std::size_t v = 0; v < check.violations.size() && v < 3; ++v) {
      detail += (v ? "; " : "") + check.violations[v].describe();
    }
    if (check.violations.size() > 3) {
      detail += "; ... (" + std::to_string(check.violations.size()) + " violations)";
    }
    std::ostringstream label;
    label << "member " << idx++ << " (q0 + " << lambda << " q) is a Q-matrix";
    row(label.str(), check.ok(), detail);
    all_ok = all_ok && check.ok();
    members.push_back({std::move(rates), Vector::Zero(q.rows())});
  }

  const auto fam = GeneratorFamily::unchecked(std::move(members));
  const auto report = check_pmp(fam, cfg.pmp_trials, cfg.seed);
  for (const auto& entry : report.entries) {
    std::string detail = std::to_string(entry.checks) + " checks";
    if (entry.failures) {
      detail += ", " + std::to_string(entry.failures) + " failed; e.g. " + *entry.counterexample;
    }
    row("pmp: " + entry.name, entry.failures == 0, detail);
  }
  all_ok = all_ok && report.passed();
  out << (all_ok ? "all checks passed" : "validation failed") << '\n';
  return all_ok ? kExitOk : kExitFailure;
}

int cmd_price(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const Matrix q0 = build_matrix(cfg.q0, cfg);
  const Matrix q = build_matrix(cfg.q, cfg);
  const PricingMethod method = build_method(cfg.method, cfg.steps, cfg.n, cfg.k);
  const Payoff payoff = build_payoff(cfg);
  const auto fam = build_family(cfg, q0, q);
  warn_about_step_size(fam, cfg.t, method, err);

  const PriceBounds bounds = price_bounds(fam, payoff, cfg.t, method);
  std::vector<Column> columns = {{"x", payoff.grid.points()},
                                 {"payoff", payoff.values},
                                 {"upper", bounds.upper},
                                 {"lower", bounds.lower}};
  for (double lambda : cfg.refs) {
    columns.push_back({lambda_label(lambda), linear_reference(q0 + lambda * q, payoff, cfg.t)});
  }
  if (!write_csv_file(cfg.out, columns, err)) return kExitFailure;

  out << "method " << describe(method) << ", t = " << cfg.t << ", lambda in [" << cfg.lambda_low
      << ", " << cfg.lambda_high << "], d = " << cfg.d << '\n';
  for (std::size_t c = 1; c < columns.size(); ++c) print_curve(out, columns[c].name, columns[c].values);
  out << "wrote " << cfg.out << " (" << cfg.d << " rows)\n";
  out << "wall time " << std::fixed << std::setprecision(3) << seconds_since(start) << " s\n";
  out.unsetf(std::ios::fixed);
  return kExitOk;
}

int cmd_compare(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const Matrix q0 = build_matrix(cfg.q0, cfg);
  const Matrix q = build_matrix(cfg.q, cfg);
  const PricingMethod first = build_method(cfg.method, cfg.steps, cfg.n, cfg.k);
  const PricingMethod second = build_method(cfg.method2, cfg.steps2, cfg.n2, cfg.k2);
  const Payoff payoff = build_payoff(cfg);
  const auto fam = build_family(cfg, q0, q);
  warn_about_step_size(fam, cfg.t, first, err);
  warn_about_step_size(fam, cfg.t, second, err);

  const auto report = compare_methods(price_bounds(fam, payoff, cfg.t, first),
                                      price_bounds(fam, payoff, cfg.t, second));
  const std::vector<Column> columns = {{"x", payoff.grid.points()},
                                       {"payoff", payoff.values},
                                       {"upper_1", report.first.upper},
                                       {"lower_1", report.first.lower},
                                       {"upper_2", report.second.upper},
                                       {"lower_2", report.second.lower},
                                       {"diff_upper", report.diff_upper},
                                       {"diff_lower", report.diff_lower}};
  if (!write_csv_file(cfg.out, columns, err)) return kExitFailure;

  const bool ok = report.max_abs_diff() <= cfg.tol;
  out << "method 1: " << describe(first) << '\n'
      << "method 2: " << describe(second) << '\n'
      << "max |upper_1 - upper_2| = " << format_value(report.max_abs_diff_upper) << '\n'
      << "max |lower_1 - lower_2| = " << format_value(report.max_abs_diff_lower) << '\n'
      << "tolerance " << format_value(cfg.tol) << ": " << (ok ? "PASS" : "FAIL") << '\n'
      << "wrote " << cfg.out << '\n';
  out << "wall time " << std::fixed << std::setprecision(3) << seconds_since(start) << " s\n";
  out.unsetf(std::ios::fixed);
  return ok ? kExitOk : kExitFailure;
}

int cmd_expm(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  (void)err;
  const Matrix m = build_matrix(cfg.matrix, cfg);
  const Matrix e = cfg.expm_k > 0 ? euler_product_exp(m, cfg.t, cfg.expm_k) : mat_exp(m, cfg.t);
  out << "# d = " << m.rows() << ", t = " << format_value(cfg.t) << ", "
      << (cfg.expm_k > 0 ? "(I + (t/k) q)^k, k = " + std::to_string(cfg.expm_k)
                         : std::string("exact exponential"))
      << "; last column is the row sum\n";
  char buf[40];
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", e(i, j));
      out << (j ? " " : "") << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", e.row(i).sum());
    out << " | " << buf << '\n';
  }
  return kExitOk;
}

namespace {

const std::map<std::string, std::string> kFlagHelp = {
    {"d", "grid points"},
    {"delta", "grid spacing"},
    {"t", "maturity"},
    {"q0", "base generator: laplacian[:d:delta] | drift[:d:delta] | zero[:d] | file:<path>"},
    {"q", "uncertain direction, same sources as --q0"},
    {"lambda-low", "lower end of the lambda interval"},
    {"lambda-high", "upper end of the lambda interval"},
    {"payoff", "butterfly | bull | file:<path>"},
    {"K", "lower strike"},
    {"L", "upper strike"},
    {"method", "ode-euler | ode-rk4 | nisio"},
    {"steps", "ODE steps"},
    {"n", "dyadic refinement level (nisio)"},
    {"k", "Euler factors per step, 0 for exact exponentials (nisio)"},
    {"refs", "comma-separated lambdas for linear reference curves"},
    {"out", "CSV output path"},
    {"seed", "random seed"},
    {"pmp-trials", "random vectors for the maximum principle check"},
    {"method2", "second method for compare"},
    {"steps2", "ODE steps of the second method"},
    {"n2", "refinement level of the second method"},
    {"k2", "Euler factors of the second method"},
    {"tol", "max-abs difference accepted by compare"},
    {"matrix", "matrix source, as for --q0"},
    {"expm-k", "Euler factors; 0 or absent for the exact exponential"},
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Price bounds for Markov chains under convex expectations"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* app;
    int (*run)(const ExperimentConfig&, std::ostream&, std::ostream&);
    std::string config_path;
    CLI::Option* config_opt = nullptr;
    std::map<std::string, std::pair<CLI::Option*, std::shared_ptr<std::string>>> flags;
  };
  std::vector<Sub> subs;
  subs.reserve(4);
  subs.push_back({app.add_subcommand("validate", "Check the generator family and the maximum principle"),
                  &cmd_validate, {}, nullptr, {}});
  subs.push_back({app.add_subcommand("price", "Compute upper/lower price curves and write CSV"),
                  &cmd_price, {}, nullptr, {}});
  subs.push_back({app.add_subcommand("compare", "Compare two pricing methods"), &cmd_compare, {}, nullptr, {}});
  subs.push_back({app.add_subcommand("expm", "Print a matrix exponential"), &cmd_expm, {}, nullptr, {}});

  for (auto& sub : subs) {
    sub.config_opt = sub.app->add_option("--config", sub.config_path, "key = value config file");
    const bool expm = sub.app->get_name() == "expm";
    const std::vector<std::string> keys =
        expm ? std::vector<std::string>{"d", "delta", "t", "matrix", "k"} : config_keys();
    for (const auto& key : keys) {
      if (!expm && (key == "matrix" || key == "expm-k")) continue;
      auto holder = std::make_shared<std::string>();
      std::string flag = "--" + key;
      if (key == "out") flag = "-o,--out";
      const auto help = kFlagHelp.find(expm && key == "k" ? "expm-k" : key);
      auto* opt = sub.app->add_option(flag, *holder,
                                      help == kFlagHelp.end() ? std::string() : help->second);
      sub.flags[expm && key == "k" ? "expm-k" : key] = {opt, holder};
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  for (auto& sub : subs) {
    if (!sub.app->parsed()) continue;
    try {
      ExperimentConfig cfg =
          sub.config_opt->count() ? load_config_file(sub.config_path) : ExperimentConfig{};
      for (const auto& [key, flag] : sub.flags) {
        if (flag.first->count()) apply_setting(cfg, key, *flag.second);
      }
      return sub.run(cfg, out, err);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitUsage;
}

Vector CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InvalidInput("CSV has no column '" + name + "'");
  const auto c = static_cast<std::size_t>(it - header.begin());
  Vector v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) v(static_cast<Eigen::Index>(r)) = rows[r].at(c);
  return v;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("read_csv: empty input");
  table.header = split(line, ',');
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size()) throw InvalidInput("read_csv: ragged row");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw InvalidInput("read_csv: bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open CSV file " + path);
  return read_csv(in);
}

}  // namespace qenv
