#pragma once

#include "qenv/generator.hpp"
#include "qenv/pricing.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace qenv {

/// Bad or missing configuration key. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/// One experiment. Defaults reproduce the drift-uncertainty butterfly run on
/// 101 grid points over [0, 10] with maturity 1.
struct ExperimentConfig {
  long long d = 101;
  double delta = 0.1;
  double t = 1.0;
  // Matrix sources: laplacian[:d:delta] | drift[:d:delta] | zero[:d] | file:<path>
  std::string q0 = "laplacian";
  std::string q = "drift";
  double lambda_low = -1.0;
  double lambda_high = 1.0;
  std::string payoff = "butterfly";  // butterfly | bull | file:<path>
  double K = 4.0;
  double L = 5.0;
  std::string method = "ode-euler";  // ode-euler | ode-rk4 | nisio
  long long steps = 1000;
  int n = 10;
  long long k = 10;  // 0: exact exponentials
  std::vector<double> refs;
  std::string out = "prices.csv";
  std::uint64_t seed = 42;
  std::size_t pmp_trials = 1000;
  // Second method for `compare`.
  std::string method2 = "nisio";
  long long steps2 = 1000;
  int n2 = 10;
  long long k2 = 10;
  double tol = 5e-2;
  // `expm` only.
  std::string matrix = "laplacian";
  long long expm_k = 0;
};

/// Keys accepted in config files and (prefixed with --) as flags.
[[nodiscard]] const std::vector<std::string>& config_keys();

/// Sets one key from its textual value; throws ConfigError naming the key.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines with `#` comments.
[[nodiscard]] std::map<std::string, std::string> parse_config_text(std::istream& in);

/// Loads a config file over the defaults. The grid keys d, delta and t are
/// required in a file.
[[nodiscard]] ExperimentConfig load_config_file(const std::string& path);

[[nodiscard]] Matrix build_matrix(const std::string& source, const ExperimentConfig& cfg);
[[nodiscard]] Payoff build_payoff(const ExperimentConfig& cfg);
[[nodiscard]] PricingMethod build_method(const std::string& name, long long steps, int n,
                                         long long k);

// Subcommands; each returns an ExitCode.
int cmd_validate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_price(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_expm(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

/// Full command line: `<prog> <subcommand> [--config path] [--key value ...]`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Nine significant digits, the CSV number format.
[[nodiscard]] std::string format_value(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  [[nodiscard]] Vector column(const std::string& name) const;
};

[[nodiscard]] CsvTable read_csv(std::istream& in);
[[nodiscard]] CsvTable read_csv_file(const std::string& path);

}  // namespace qenv
