#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "kcrec/content.hpp"
#include "kcrec/kc_space.hpp"

namespace kcrec {

using Rng = std::mt19937_64;

struct SkillBelief {
  double mu = 0.0;
  double sigma = 1.0;

  bool operator==(const SkillBelief&) const = default;
};

/// Novelty-classifier parameters. A learner engages with a resource when the
/// performance difference t ~ N(m, c^2) falls inside [-gamma, gamma].
struct EngagementParams {
  double beta = 0.5;    // performance noise
  double gamma = 0.5;   // engagement margin
  double tau = 0.01;    // dynamics noise added to each touched belief per update
  double prior_mu = 0.0;
  double prior_sigma = 1.0;

  SkillBelief prior() const { return {prior_mu, prior_sigma}; }
  void validate() const;
};

struct EngagementOutcome {
  bool engaged = false;
  double probability = 0.5;
};

/// Per-KC Gaussian skill beliefs. KCs without an entry carry `prior`.
class LearnerState {
 public:
  LearnerState() = default;
  explicit LearnerState(SkillBelief prior) : prior_(prior) {}

  SkillBelief belief(KcId id) const;
  void set(KcId id, SkillBelief belief);

  const SkillBelief& prior() const { return prior_; }
  const std::map<KcId, SkillBelief>& skills() const { return skills_; }
  std::uint64_t engagement_count() const { return engagement_count_; }
  void set_engagement_count(std::uint64_t n) { engagement_count_ = n; }

  bool operator==(const LearnerState&) const = default;

 private:
  SkillBelief prior_;
  std::map<KcId, SkillBelief> skills_;
  std::uint64_t engagement_count_ = 0;
};

/// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

/// Mean and variance of N(mean, sd^2) truncated to [lo, hi]. Either bound may
/// be infinite. Handles intervals far out in the tails.
struct TruncatedMoments {
  double mean;
  double variance;
};
TruncatedMoments truncated_normal_moments(double mean, double sd, double lo, double hi);

/// P(engaged) = Phi((gamma - m)/c) - Phi((-gamma - m)/c), with
/// m = sum_k w_k (mu_k - d_k) and c^2 = beta^2 + sum_k w_k^2 sigma_k^2, where
/// w is the resource aggregate normalised to sum 1 and d its per-KC depth.
/// The result is clamped strictly inside (0, 1).
double predict_engagement(const LearnerState& state, const Resource& r, const EngagementParams& p);

/// Moment-matched posterior after observing `outcome` on `r`. Each touched
/// variance is first inflated by tau^2. Returns the updated copy.
LearnerState update_on_outcome(const LearnerState& state, const Resource& r, const EngagementOutcome& outcome,
                               const EngagementParams& p);

/// Independent draw per KC from N(mu_k, sigma_k^2), length K.
std::vector<double> sample_kc_vector(const LearnerState& state, const KcUniverse& universe, Rng& rng);

/// Mean skill per KC, length K.
std::vector<double> mean_kc_vector(const LearnerState& state, const KcUniverse& universe);

}  // namespace kcrec
