#include "qenv/ode.hpp"

#include <cmath>
#include <string>

namespace qenv {

namespace {

// Indices of the steps whose state is stored.
class SnapshotPlan {
 public:
  SnapshotPlan(long long steps, std::size_t snapshots) : steps_(steps), count_(snapshots) {
    if (count_ != 0 && count_ < 2) count_ = 2;
    if (count_ != 0 && static_cast<long long>(count_) > steps_ + 1) count_ = 0;
  }

  // Whether step j (0..steps) is stored.
  [[nodiscard]] bool keeps(long long j) const {
    if (count_ == 0 || j == 0 || j == steps_) return true;
    return j == target(next_);
  }
  void advance(long long j) {
    if (count_ != 0 && j == target(next_)) ++next_;
  }

 private:
  [[nodiscard]] long long target(std::size_t slot) const {
    return static_cast<long long>(std::llround(static_cast<double>(slot) *
                                               static_cast<double>(steps_) /
                                               static_cast<double>(count_ - 1)));
  }

  long long steps_;
  std::size_t count_;
  std::size_t next_ = 1;
};

void check_args(const GeneratorFamily& fam, const Vector& u0, double t, long long steps,
                const char* who) {
  if (u0.size() != fam.dim()) {
    throw DimensionMismatch(std::string(who) + ": initial vector has dimension " +
                            std::to_string(u0.size()) + ", family has " +
                            std::to_string(fam.dim()));
  }
  if (!std::isfinite(t) || t < 0.0) throw InvalidInput(std::string(who) + ": t must be >= 0");
  if (steps < 1) throw InvalidInput(std::string(who) + ": steps must be >= 1");
  require_finite(u0, who);
}

template <typename Step>
Trajectory integrate(const Vector& u0, double t, long long steps, OdeOptions options,
                     const char* who, Step&& step) {
  const double h = t / static_cast<double>(steps);
  SnapshotPlan plan(steps, options.snapshots);
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.values.push_back(u0);
  Vector u = u0;
  for (long long j = 1; j <= steps; ++j) {
    u = step(u, h);
    if (!u.allFinite()) {
      throw IntegrationDiverged(std::string(who) + ": non-finite state at step " +
                                    std::to_string(j),
                                j);
    }
    if (plan.keeps(j)) {
      traj.times.push_back(j == steps ? t : static_cast<double>(j) * h);
      traj.values.push_back(u);
    }
    plan.advance(j);
  }
  return traj;
}

}  // namespace

Trajectory solve_euler(const GeneratorFamily& fam, const Vector& u0, double t, long long steps,
                       OdeOptions options) {
  check_args(fam, u0, t, steps, "solve_euler");
  return integrate(u0, t, steps, options, "solve_euler", [&](const Vector& u, double h) {
    return Vector(u + h * apply_q_operator(fam, u));
  });
}

Trajectory solve_rk4(const GeneratorFamily& fam, const Vector& u0, double t, long long steps,
                     OdeOptions options) {
  check_args(fam, u0, t, steps, "solve_rk4");
  return integrate(u0, t, steps, options, "solve_rk4", [&](const Vector& u, double h) {
    const Vector k1 = apply_q_operator(fam, u);
    const Vector k2 = apply_q_operator(fam, u + (h / 2) * k1);
    const Vector k3 = apply_q_operator(fam, u + (h / 2) * k2);
    const Vector k4 = apply_q_operator(fam, u + h * k3);
    return Vector(u + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  });
}

double euler_step_ratio(const GeneratorFamily& fam, double t, long long steps) {
  if (steps < 1) throw InvalidInput("euler_step_ratio: steps must be >= 1");
  return t / static_cast<double>(steps) * fam.max_rate_norm();
}

}  // namespace qenv
