#pragma once

#include "qenv/generator.hpp"
#include "qenv/linalg.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace qenv {

/// How the per-member flows e^{hq} are evaluated inside a step.
enum class ExpMode {
  exact,          ///< mat_exp (Pade scaling and squaring)
  euler_product,  ///< (I + (h/k) q)^k
};

struct FlowOptions {
  ExpMode mode = ExpMode::exact;
  long long k = 10;  ///< factor count for ExpMode::euler_product
};

/// Finite time grid 0 = t_0 < t_1 < ... < t_m.
class Partition {
 public:
  explicit Partition(std::vector<double> times);

  static Partition uniform(double t, std::size_t steps);
  /// {k t 2^-n : k = 0..2^n}
  static Partition dyadic(double t, int n);

  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] double end() const { return times_.back(); }
  [[nodiscard]] double mesh() const;
  /// Same grid with one extra interior point (no-op if already present).
  [[nodiscard]] Partition refine_with(double point) const;

 private:
  std::vector<double> times_;
};

/// One piece of a space-time discrete control: state i follows member
/// selection[i] for `duration`.
struct ControlStep {
  std::vector<std::size_t> selection;
  double duration;
};

/// theta = (step_1, ..., step_m); evaluation applies step_m first.
struct Control {
  std::vector<ControlStep> steps;

  [[nodiscard]] double total() const;
};

struct EnvelopeLevel {
  int n;
  Vector value;
  double max_abs_increment;  ///< vs previous level; 0 for the first level
  double min_increment;      ///< smallest directed change vs previous level
};

struct EnvelopeDiagnostics {
  std::vector<EnvelopeLevel> levels;
  bool converged = false;
  int final_level = 0;
};

/// Thread-safe cache of per-member flows keyed by (member, bit pattern of h).
class FlowCache {
 public:
  explicit FlowCache(FlowOptions options) : options_(options) {}

  /// Flow of `fam`'s member over h. A cache must only ever see one family.
  const AffineFlow& get(const GeneratorFamily& fam, std::size_t member, double h);
  [[nodiscard]] std::size_t size() const;

 private:
  FlowOptions options_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::unique_ptr<AffineFlow>> flows_;
};

/// Semigroup envelope of a generator family, evaluated through iterated
/// one-step envelopes E_h u = opt_k S_k(h) u.
class Envelope {
 public:
  explicit Envelope(GeneratorFamily fam, FlowOptions options = {});

  [[nodiscard]] const GeneratorFamily& family() const { return fam_; }
  [[nodiscard]] const FlowOptions& options() const { return options_; }

  /// Flow of member k over h under the configured ExpMode, with the
  /// direction's penalty sign. Cached.
  [[nodiscard]] const AffineFlow& flow(std::size_t member, double h) const;

  /// E_h u. When `argopt` is given it receives the lowest attaining member per
  /// state.
  [[nodiscard]] Vector one_step(double h, const Vector& u,
                                std::vector<std::size_t>* argopt = nullptr) const;

  /// E_pi u, applying the last subinterval first.
  [[nodiscard]] Vector iterate(const Partition& pi, const Vector& u) const;

  /// E_{t 2^-n}^{2^n} u.
  [[nodiscard]] Vector at_level(double t, int n, const Vector& u) const;

  /// Raises n from 0 until consecutive levels differ by at most `tol` in the
  /// sup-norm, or n_max is reached.
  [[nodiscard]] std::pair<Vector, EnvelopeDiagnostics> refined(double t, const Vector& u,
                                                               double tol, int n_max) const;

  /// S_theta u for a space-time discrete control.
  [[nodiscard]] Vector evaluate(const Control& theta, const Vector& u) const;

  /// Control realizing at_level(t, n, u): per step and state, the member
  /// attaining the step optimum.
  [[nodiscard]] Control worst_case_control(double t, int n, const Vector& u) const;

 private:
  void check_dim(const Vector& u, const char* who) const;

  GeneratorFamily fam_;
  FlowOptions options_;
  std::unique_ptr<FlowCache> cache_;
};

// Free-function forms; each builds a throwaway Envelope.
[[nodiscard]] Vector one_step(const GeneratorFamily& fam, double h, const Vector& u,
                              FlowOptions options = {});
[[nodiscard]] Vector iterate_partition(const GeneratorFamily& fam, const Partition& pi,
                                       const Vector& u, FlowOptions options = {});
[[nodiscard]] Vector envelope(const GeneratorFamily& fam, double t, int n, const Vector& u,
                              FlowOptions options = {});
[[nodiscard]] std::pair<Vector, EnvelopeDiagnostics> envelope_refined(
    const GeneratorFamily& fam, double t, const Vector& u, double tol, int n_max,
    FlowOptions options = {});
[[nodiscard]] Vector control_evaluate(const GeneratorFamily& fam, const Control& theta,
                                      const Vector& u, FlowOptions options = {});
[[nodiscard]] Control extract_worst_case_control(const GeneratorFamily& fam, double t, int n,
                                                 const Vector& u, FlowOptions options = {});

}  // namespace qenv
