#include "kcrec/learner_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kcrec/error.hpp"

namespace kcrec {

namespace {

constexpr double kSigmaFloor = 1e-4;

// Resource profile read by the engagement model.
struct Profile {
  std::vector<KcId> ids;
  std::vector<double> weight;  // sums to 1
  std::vector<double> depth;
};

Profile profile_of(const Resource& r) {
  if (r.aggregate.empty()) throw Error("resource '" + r.id + "' has an empty aggregate");
  Profile p;
  const double total = r.aggregate.sum();
  for (const auto& [k, w] : r.aggregate) {
    p.ids.push_back(k);
    p.weight.push_back(w / total);
    p.depth.push_back(r.depth.get(k));
  }
  return p;
}

// phi(x) / (1 - Phi(x)), stable for large x.
double upper_mills(double x) {
  if (x < 25.0) {
    const double tail = 0.5 * std::erfc(x / std::numbers::sqrt2);
    return normal_pdf(x) / tail;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // asymptotic expansion of the inverse Mills ratio
  return x / (1.0 - inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2);
}

// Moments of N(0,1) truncated to [a, inf).
TruncatedMoments std_lower_truncated(double a) {
  const double lambda = upper_mills(a);
  const double mean = lambda;
  const double variance = std::max(0.0, 1.0 + a * lambda - lambda * lambda);
  return {mean, variance};
}

}  // namespace

void EngagementParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error("beta must be positive");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error("gamma must be positive");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error("tau must be nonnegative");
  if (!std::isfinite(prior_mu)) throw Error("prior_mu must be finite");
  if (!(prior_sigma > 0.0) || !std::isfinite(prior_sigma)) throw Error("prior_sigma must be positive");
}

SkillBelief LearnerState::belief(KcId id) const {
  auto it = skills_.find(id);
  return it == skills_.end() ? prior_ : it->second;
}

void LearnerState::set(KcId id, SkillBelief belief) {
  if (!std::isfinite(belief.mu) || !std::isfinite(belief.sigma) || belief.sigma < 0.0) {
    throw Error("skill belief must have finite mean and nonnegative standard deviation");
  }
  skills_[id] = belief;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

TruncatedMoments truncated_normal_moments(double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0)) throw Error("truncated normal needs a positive standard deviation");
  if (!(lo < hi)) throw Error("truncation interval is empty");
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;

  if (std::isinf(hi)) {
    const auto m = std_lower_truncated(a);
    return {mean + sd * m.mean, sd * sd * m.variance};
  }
  if (std::isinf(lo)) {
    const auto m = std_lower_truncated(-b);
    return {mean - sd * m.mean, sd * sd * m.variance};
  }

  // Evaluate on the side of the interval that keeps the CDF differences
  // away from cancellation.
  const bool mirror = a > 0.0 ? false : (b < 0.0 ? true : false);
  const double aa = mirror ? -b : a;
  const double bb = mirror ? -a : b;
  // Upper-tail masses of aa and bb; aa < bb.
  const double qa = 0.5 * std::erfc(aa / std::numbers::sqrt2);
  const double qb = 0.5 * std::erfc(bb / std::numbers::sqrt2);
  double z = qa - qb;
  if (aa <= 0.0) z = normal_cdf(bb) - normal_cdf(aa);

  if (!(z > 1e-280)) {
    // Interval lies deep in one tail: the mass concentrates at the near edge.
    const auto m = std_lower_truncated(aa);
    const double std_mean = std::min(m.mean, bb);
    const double std_var = m.variance;
    const double out_mean = mirror ? -std_mean : std_mean;
    return {mean + sd * out_mean, sd * sd * std_var};
  }
  const double pa = normal_pdf(aa), pb = normal_pdf(bb);
  double std_mean = (pa - pb) / z;
  double std_var = 1.0 + (aa * pa - bb * pb) / z - std_mean * std_mean;
  std_var = std::max(std_var, 0.0);
  if (mirror) std_mean = -std_mean;
  return {mean + sd * std_mean, sd * sd * std_var};
}

double predict_engagement(const LearnerState& state, const Resource& r, const EngagementParams& p) {
  const Profile prof = profile_of(r);
  double m = 0.0;
  double c2 = p.beta * p.beta;
  for (std::size_t i = 0; i < prof.ids.size(); ++i) {
    const auto b = state.belief(prof.ids[i]);
    m += prof.weight[i] * (b.mu - prof.depth[i]);
    c2 += prof.weight[i] * prof.weight[i] * b.sigma * b.sigma;
  }
  const double c = std::sqrt(c2);
  const double hi = (p.gamma - m) / c;
  const double lo = (-p.gamma - m) / c;
  // Difference of upper tails when the interval sits above zero.
  double prob = lo > 0.0 ? 0.5 * std::erfc(lo / std::numbers::sqrt2) - 0.5 * std::erfc(hi / std::numbers::sqrt2)
                         : normal_cdf(hi) - normal_cdf(lo);
  constexpr double tiny = std::numeric_limits<double>::min();
  return std::clamp(prob, tiny, std::nextafter(1.0, 0.0));
}

LearnerState update_on_outcome(const LearnerState& state, const Resource& r, const EngagementOutcome& outcome,
                               const EngagementParams& p) {
  const Profile prof = profile_of(r);
  const std::size_t n = prof.ids.size();
  std::vector<double> mu(n), var(n);
  double m = 0.0;
  double c2 = p.beta * p.beta;
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = state.belief(prof.ids[i]);
    mu[i] = b.mu;
    var[i] = b.sigma * b.sigma + p.tau * p.tau;
    m += prof.weight[i] * (mu[i] - prof.depth[i]);
    c2 += prof.weight[i] * prof.weight[i] * var[i];
  }
  const double c = std::sqrt(c2);
  constexpr double inf = std::numeric_limits<double>::infinity();
  TruncatedMoments post{};
  if (outcome.engaged) {
    post = truncated_normal_moments(m, c, -p.gamma, p.gamma);
  } else if (m >= 0.0) {
    post = truncated_normal_moments(m, c, p.gamma, inf);  // content too easy
  } else {
    post = truncated_normal_moments(m, c, -inf, -p.gamma);  // content too hard
  }

  LearnerState next = state;
  const double shrink = 1.0 - post.variance / c2;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = prof.weight[i];
    const double new_mu = mu[i] + w * var[i] * (post.mean - m) / c2;
    double new_var = var[i] * (1.0 - (w * w * var[i] / c2) * shrink);
    new_var = std::max(new_var, 0.0);
    double sigma = std::sqrt(new_var);
    if (var[i] > 0.0) sigma = std::max(sigma, std::min(kSigmaFloor, std::sqrt(var[i])));
    next.set(prof.ids[i], {new_mu, sigma});
  }
  next.set_engagement_count(state.engagement_count() + 1);
  return next;
}

std::vector<double> sample_kc_vector(const LearnerState& state, const KcUniverse& universe, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(universe.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto b = state.belief(kc(k));
    const double z = normal(rng);
    out[k] = b.sigma == 0.0 ? b.mu : b.mu + b.sigma * z;
  }
  return out;
}

std::vector<double> mean_kc_vector(const LearnerState& state, const KcUniverse& universe) {
  std::vector<double> out(universe.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = state.belief(kc(k)).mu;
  return out;
}

}  // namespace kcrec
