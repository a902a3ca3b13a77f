#include "qenv/nisio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace qenv {

Partition::Partition(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty() || times_.front() != 0.0) {
    throw InvalidInput("Partition: grid must start at 0");
  }
  for (std::size_t j = 1; j < times_.size(); ++j) {
    if (!std::isfinite(times_[j]) || !(times_[j] > times_[j - 1])) {
      throw InvalidInput("Partition: grid must be strictly increasing (index " +
                         std::to_string(j) + ")");
    }
  }
}

Partition Partition::uniform(double t, std::size_t steps) {
  if (!(t >= 0.0)) throw InvalidInput("Partition::uniform: t must be >= 0");
  if (t == 0.0 || steps == 0) return Partition({0.0});
  std::vector<double> times(steps + 1);
  const double h = t / static_cast<double>(steps);
  for (std::size_t j = 0; j < steps; ++j) times[j] = static_cast<double>(j) * h;
  times[steps] = t;
  return Partition(std::move(times));
}

Partition Partition::dyadic(double t, int n) {
  if (n < 0 || n > 40) throw InvalidInput("Partition::dyadic: level must be in [0, 40]");
  return uniform(t, std::size_t{1} << n);
}

double Partition::mesh() const {
  double mesh = 0.0;
  for (std::size_t j = 1; j < times_.size(); ++j) mesh = std::max(mesh, times_[j] - times_[j - 1]);
  return mesh;
}

Partition Partition::refine_with(double point) const {
  if (!(point > 0.0) || !(point < end())) {
    throw InvalidInput("Partition::refine_with: point must lie strictly inside (0, end)");
  }
  std::vector<double> times = times_;
  auto it = std::lower_bound(times.begin(), times.end(), point);
  if (it == times.end() || *it != point) times.insert(it, point);
  return Partition(std::move(times));
}

double Control::total() const {
  return std::accumulate(steps.begin(), steps.end(), 0.0,
                         [](double acc, const ControlStep& s) { return acc + s.duration; });
}

const AffineFlow& FlowCache::get(const GeneratorFamily& fam, std::size_t member, double h) {
  const auto key = std::make_pair(member, std::bit_cast<std::uint64_t>(h));
  std::lock_guard lock(mutex_);
  auto it = flows_.find(key);
  if (it != flows_.end()) return *it->second;
  const Matrix& q = fam.member(member).rates;
  const Vector f = fam.signed_penalty(member);
  auto flow = std::make_unique<AffineFlow>(options_.mode == ExpMode::exact
                                               ? affine_flow(q, f, h)
                                               : affine_flow_euler(q, f, h, options_.k));
  return *flows_.emplace(key, std::move(flow)).first->second;
}

std::size_t FlowCache::size() const {
  std::lock_guard lock(mutex_);
  return flows_.size();
}

Envelope::Envelope(GeneratorFamily fam, FlowOptions options)
    : fam_(std::move(fam)), options_(options), cache_(std::make_unique<FlowCache>(options)) {
  if (options_.mode == ExpMode::euler_product && options_.k < 1) {
    throw InvalidInput("Envelope: euler-product factor count k must be >= 1");
  }
}

void Envelope::check_dim(const Vector& u, const char* who) const {
  if (u.size() != fam_.dim()) {
    throw DimensionMismatch(std::string(who) + ": vector has dimension " +
                            std::to_string(u.size()) + ", family has " +
                            std::to_string(fam_.dim()));
  }
}

const AffineFlow& Envelope::flow(std::size_t member, double h) const {
  return cache_->get(fam_, member, h);
}

Vector Envelope::one_step(double h, const Vector& u, std::vector<std::size_t>* argopt) const {
  check_dim(u, "one_step");
  if (!std::isfinite(h) || h < 0.0) throw InvalidInput("one_step: h must be >= 0");
  if (argopt) argopt->assign(static_cast<std::size_t>(u.size()), 0);
  if (h == 0.0) return u;

  const Direction dir = fam_.direction();
  Vector best = flow(0, h).apply(u);
  for (std::size_t k = 1; k < fam_.size(); ++k) {
    const Vector value = flow(k, h).apply(u);
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      if (improves(dir, value(i), best(i))) {
        best(i) = value(i);
        if (argopt) (*argopt)[static_cast<std::size_t>(i)] = k;
      }
    }
  }
  return best;
}

Vector Envelope::iterate(const Partition& pi, const Vector& u) const {
  check_dim(u, "iterate_partition");
  const auto& times = pi.times();
  Vector v = u;
  for (std::size_t j = times.size() - 1; j >= 1; --j) v = one_step(times[j] - times[j - 1], v);
  return v;
}

Vector Envelope::at_level(double t, int n, const Vector& u) const {
  check_dim(u, "envelope");
  if (!std::isfinite(t) || t < 0.0) throw InvalidInput("envelope: t must be >= 0");
  if (n < 0 || n > 40) throw InvalidInput("envelope: level must be in [0, 40]");
  if (t == 0.0) return u;
  const double h = std::ldexp(t, -n);
  const long long steps = 1LL << n;
  Vector v = u;
  for (long long j = 0; j < steps; ++j) v = one_step(h, v);
  return v;
}

std::pair<Vector, EnvelopeDiagnostics> Envelope::refined(double t, const Vector& u, double tol,
                                                         int n_max) const {
  if (!(tol > 0.0)) throw InvalidInput("envelope_refined: tol must be positive");
  if (n_max < 0) throw InvalidInput("envelope_refined: n_max must be >= 0");
  EnvelopeDiagnostics diag;
  Vector current = at_level(t, 0, u);
  diag.levels.push_back({0, current, 0.0, 0.0});
  if (t == 0.0) {
    diag.converged = true;
    return {current, diag};
  }
  const double sign = fam_.direction() == Direction::upper ? 1.0 : -1.0;
  for (int n = 1; n <= n_max; ++n) {
    Vector next = at_level(t, n, u);
    const Vector diff = next - current;
    const double increment = norm_inf(diff);
    diag.levels.push_back({n, next, increment, (sign * diff).minCoeff()});
    diag.final_level = n;
    current = std::move(next);
    if (increment <= tol) {
      diag.converged = true;
      break;
    }
  }
  return {current, diag};
}

Vector Envelope::evaluate(const Control& theta, const Vector& u) const {
  check_dim(u, "control_evaluate");
  const auto d = static_cast<std::size_t>(fam_.dim());
  for (std::size_t s = 0; s < theta.steps.size(); ++s) {
    const auto& step = theta.steps[s];
    if (!(step.duration > 0.0) || !std::isfinite(step.duration)) {
      throw InvalidInput("control_evaluate: step " + std::to_string(s) +
                         " has a non-positive duration");
    }
    if (step.selection.size() != d) {
      throw DimensionMismatch("control_evaluate: step " + std::to_string(s) +
                              " selects for the wrong number of states");
    }
    for (std::size_t k : step.selection) {
      if (k >= fam_.size()) {
        throw std::out_of_range("control_evaluate: member index " + std::to_string(k) +
                                " out of range in step " + std::to_string(s));
      }
    }
  }

  Vector v = u;
  for (auto step = theta.steps.rbegin(); step != theta.steps.rend(); ++step) {
    // Row-wise mixed flow: state i moves with its selected member's row.
    Vector next(v.size());
    for (std::size_t i = 0; i < d; ++i) {
      const AffineFlow& f = flow(step->selection[i], step->duration);
      const auto row = static_cast<Eigen::Index>(i);
      next(row) = f.linear_part.row(row).dot(v) + f.offset(row);
    }
    v = std::move(next);
  }
  return v;
}

Control Envelope::worst_case_control(double t, int n, const Vector& u) const {
  check_dim(u, "extract_worst_case_control");
  if (!std::isfinite(t) || !(t > 0.0)) {
    throw InvalidInput("extract_worst_case_control: t must be positive");
  }
  if (n < 0 || n > 30) throw InvalidInput("extract_worst_case_control: level must be in [0, 30]");
  const double h = std::ldexp(t, -n);
  const long long steps = 1LL << n;
  Control theta;
  theta.steps.resize(static_cast<std::size_t>(steps));
  Vector v = u;
  // The k-th application acts at position steps-1-k of theta.
  for (long long j = 0; j < steps; ++j) {
    auto& step = theta.steps[static_cast<std::size_t>(steps - 1 - j)];
    step.duration = h;
    v = one_step(h, v, &step.selection);
  }
  return theta;
}

Vector one_step(const GeneratorFamily& fam, double h, const Vector& u, FlowOptions options) {
  return Envelope(fam, options).one_step(h, u);
}

Vector iterate_partition(const GeneratorFamily& fam, const Partition& pi, const Vector& u,
                         FlowOptions options) {
  return Envelope(fam, options).iterate(pi, u);
}

Vector envelope(const GeneratorFamily& fam, double t, int n, const Vector& u,
                FlowOptions options) {
  return Envelope(fam, options).at_level(t, n, u);
}

std::pair<Vector, EnvelopeDiagnostics> envelope_refined(const GeneratorFamily& fam, double t,
                                                        const Vector& u, double tol, int n_max,
                                                        FlowOptions options) {
  return Envelope(fam, options).refined(t, u, tol, n_max);
}

Vector control_evaluate(const GeneratorFamily& fam, const Control& theta, const Vector& u,
                        FlowOptions options) {
  return Envelope(fam, options).evaluate(theta, u);
}

Control extract_worst_case_control(const GeneratorFamily& fam, double t, int n, const Vector& u,
                                   FlowOptions options) {
  return Envelope(fam, options).worst_case_control(t, n, u);
}

}  // namespace qenv
