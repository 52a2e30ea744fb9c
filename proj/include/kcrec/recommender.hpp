#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kcrec/content.hpp"
#include "kcrec/learner_model.hpp"

namespace kcrec {

enum class RecommendationMode { cold_start, engagement_model, policy };

std::string_view mode_name(RecommendationMode mode);

/// Picks the resource whose aggregate has the highest cosine similarity to
/// the action coverage. Ties, including the all-zero action, go to the
/// lexicographically smallest id. Throws on an empty index.
const Resource& map_action_to_resource(const KcVector& action_coverage, const ContentIndex& index);
/// Dense coverage overload (length K, nonnegative).
const Resource& map_action_to_resource(std::span<const double> coverage, const ContentIndex& index);

/// One learner's recommendation session.
class SessionState {
 public:
  SessionState(LearnerState learner, std::vector<KcId> interests, std::size_t switch_threshold = 20);

  const LearnerState& learner() const { return learner_; }
  const std::vector<KcId>& interests() const { return interests_; }
  const std::vector<std::string>& history() const { return history_; }
  bool seen(const std::string& id) const { return seen_.count(id) != 0; }
  std::size_t engagement_events() const { return engagement_events_; }
  std::size_t switch_threshold() const { return switch_threshold_; }

  /// Records the outcome for a recommended resource: appends it to the
  /// history, counts one engagement event and updates the learner model,
  /// whatever mode produced the recommendation.
  void record(const Resource& r, const EngagementOutcome& outcome, const EngagementParams& params);

 private:
  LearnerState learner_;
  std::vector<KcId> interests_;
  std::vector<std::string> history_;
  std::set<std::string> seen_;
  std::size_t engagement_events_ = 0;
  std::size_t switch_threshold_;
};

/// Unseen resource with the largest summed aggregate weight on interest KCs;
/// ties by number of interest KCs covered, then smallest id.
const Resource& cold_start_recommend(const SessionState& session, const ContentIndex& index);

/// Unseen resource with the highest predicted engagement; ties by smallest id.
const Resource& engagement_model_recommend(const SessionState& session, const ContentIndex& index,
                                           const EngagementParams& params);

/// cold_start until `switch_threshold` engagement events, then engagement_model.
std::pair<const Resource*, RecommendationMode> switching_recommend(const SessionState& session,
                                                                   const ContentIndex& index,
                                                                   const EngagementParams& params);

}  // namespace kcrec
