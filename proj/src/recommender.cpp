#include "kcrec/recommender.hpp"

#include <algorithm>

#include "kcrec/error.hpp"

namespace kcrec {

std::string_view mode_name(RecommendationMode mode) {
  switch (mode) {
    case RecommendationMode::cold_start: return "cold_start";
    case RecommendationMode::engagement_model: return "engagement_model";
    case RecommendationMode::policy: return "policy";
  }
  return "unknown";
}

const Resource& map_action_to_resource(std::span<const double> coverage, const ContentIndex& index) {
  if (index.size() == 0) throw Error("cannot map an action onto an empty content index");
  const Resource* best = &index.resources().front();
  double best_score = -1.0;
  // resources are sorted by id, so strict improvement keeps the smallest id on ties
  for (const auto& r : index.resources()) {
    const double s = cosine_similarity(coverage, r.aggregate);
    if (s > best_score) {
      best_score = s;
      best = &r;
    }
  }
  return *best;
}

const Resource& map_action_to_resource(const KcVector& action_coverage, const ContentIndex& index) {
  const auto dense = action_coverage.to_dense(index.universe().size());
  return map_action_to_resource(std::span<const double>(dense), index);
}

SessionState::SessionState(LearnerState learner, std::vector<KcId> interests, std::size_t switch_threshold)
    : learner_(std::move(learner)), interests_(std::move(interests)), switch_threshold_(switch_threshold) {
  std::sort(interests_.begin(), interests_.end());
  interests_.erase(std::unique(interests_.begin(), interests_.end()), interests_.end());
}

void SessionState::record(const Resource& r, const EngagementOutcome& outcome, const EngagementParams& params) {
  if (!seen_.insert(r.id).second) throw Error("resource '" + r.id + "' was already recommended in this session");
  history_.push_back(r.id);
  ++engagement_events_;
  learner_ = update_on_outcome(learner_, r, outcome, params);
}

const Resource& cold_start_recommend(const SessionState& session, const ContentIndex& index) {
  if (session.interests().empty()) throw Error("cold-start recommendation needs at least one interest");
  const Resource* best = nullptr;
  double best_weight = -1.0;
  std::size_t best_count = 0;
  for (const auto& r : index.resources()) {
    if (session.seen(r.id)) continue;
    double weight = 0.0;
    std::size_t count = 0;
    for (KcId k : session.interests()) {
      const double w = r.aggregate.get(k);
      weight += w;
      if (w > 0.0) ++count;
    }
    if (best == nullptr || weight > best_weight || (weight == best_weight && count > best_count)) {
      best = &r;
      best_weight = weight;
      best_count = count;
    }
  }
  if (best == nullptr) throw Error("no unseen resources");
  return *best;
}

const Resource& engagement_model_recommend(const SessionState& session, const ContentIndex& index,
                                           const EngagementParams& params) {
  const Resource* best = nullptr;
  double best_p = -1.0;
  for (const auto& r : index.resources()) {
    if (session.seen(r.id)) continue;
    const double p = predict_engagement(session.learner(), r, params);
    if (p > best_p) {
      best = &r;
      best_p = p;
    }
  }
  if (best == nullptr) throw Error("no unseen resources");
  return *best;
}

std::pair<const Resource*, RecommendationMode> switching_recommend(const SessionState& session,
                                                                   const ContentIndex& index,
                                                                   const EngagementParams& params) {
  if (session.engagement_events() < session.switch_threshold()) {
    return {&cold_start_recommend(session, index), RecommendationMode::cold_start};
  }
  return {&engagement_model_recommend(session, index, params), RecommendationMode::engagement_model};
}

}  // namespace kcrec
