#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "consensus/errors.hpp"
#include "consensus/model.hpp"
#include "consensus/plantnet.hpp"

namespace consensus {

enum class AiModeKind {
  None,          // plain run, predictions ignored
  AsUser,        // AI joins as one more user and earns trust like anyone else
  FixedWeight,   // AI votes with a fixed weight in label and score
  Invalidating,  // AI's weight joins confidence/accuracy only; labels untouched
  Confident,     // FixedWeight gated on the prediction probability
};

inline const char* ai_mode_name(AiModeKind k) {
  switch (k) {
    case AiModeKind::None: return "none";
    case AiModeKind::AsUser: return "as-user";
    case AiModeKind::FixedWeight: return "fixed";
    case AiModeKind::Invalidating: return "invalidating";
    case AiModeKind::Confident: return "confident";
  }
  return "none";
}

struct AiMode {
  AiModeKind kind = AiModeKind::None;
  double ai_weight = 1.70;   // default sits inside the admissible interval
  double theta_score = 0.7;  // Confident gate on the prediction probability

  static AiMode none() { return {}; }
  static AiMode as_user() { return {AiModeKind::AsUser, 1.70, 0.7}; }
  static AiMode fixed_weight(double w = 1.70) { return {AiModeKind::FixedWeight, w, 0.7}; }
  static AiMode invalidating(double w = 1.70) { return {AiModeKind::Invalidating, w, 0.7}; }
  static AiMode confident(double theta_score, double w = 1.70) {
    return {AiModeKind::Confident, w, theta_score};
  }
};

// Admissible fixed AI weight (strict open interval):
//   theta_conf * (1 - theta_acc) / theta_acc  <  w_AI  <  theta_conf
// Below the lower bound the AI cannot invalidate an otherwise self-validating
// vote pair; at or above theta_conf the AI would self-validate observations.
inline bool validate_ai_weight(double w_ai, const StrategyConfig& cfg) {
  const double lower = cfg.theta_conf * (1.0 - cfg.theta_acc) / cfg.theta_acc;
  return w_ai > lower && w_ai < cfg.theta_conf;
}

// Participation gate. FixedWeight and Invalidating always vote; Confident
// votes where the prediction probability reaches theta_score, except that
// theta_score = 1 turns the AI off entirely (so Confident(1) is the plain
// strategy even for probability-1 predictions).
inline bool ai_participates(const AiMode& mode, double prob) {
  switch (mode.kind) {
    case AiModeKind::FixedWeight:
    case AiModeKind::Invalidating:
      return true;
    case AiModeKind::Confident:
      return mode.theta_score >= 1.0 ? false : prob >= mode.theta_score;
    default:
      return false;
  }
}

// Table copy with the AI appended as a synthetic user (id = n_users()) that
// votes its top-1 prediction everywhere it has one and authors nothing.
inline VoteTable augment_with_ai_user(const VoteTable& t, const AiPredictionSet& ai) {
  if (ai.n_obs() != t.n_obs())
    throw error(errc::index_error, "prediction set does not match the table");
  return t.with_appended_user(ai.species_view(), "@ai");
}

// Run the iterative strategy fused with AI predictions.
//
// AsUser reruns the plain strategy on the augmented table (the extra weight
// slot in the result belongs to the AI). The fixed-weight family validates
// ai_weight first; w_AI = 0 is accepted as "AI disabled". Invalidating runs
// the plain strategy to its fixed point and then rescores every observation
// with the AI's weight in confidence and total only, so labels are the plain
// run's labels by construction.
inline AggregationResult run_with_ai(const VoteTable& t, const AiPredictionSet& ai,
                                     const AiMode& mode, const StrategyConfig& cfg,
                                     const IterationObserver& observer = {}) {
  if (mode.kind == AiModeKind::None) return run_plantnet(t, cfg, observer);
  if (ai.n_obs() != t.n_obs())
    throw error(errc::index_error, "prediction set does not match the table");
  if (ai.count() == 0)
    throw error(errc::invalid_config, "AI fusion requested with an empty prediction set");

  if (mode.kind == AiModeKind::AsUser)
    return run_plantnet(augment_with_ai_user(t, ai), cfg, observer);

  if (mode.ai_weight != 0.0 && !validate_ai_weight(mode.ai_weight, cfg))
    throw error(errc::invalid_ai_weight,
                "fixed AI weight " + std::to_string(mode.ai_weight) +
                    " outside the admissible open interval");

  std::vector<SpeciesId> gated(t.n_obs(), kNoId);
  for (ObsId i = 0; i < t.n_obs(); ++i)
    if (ai.has(i) && ai_participates(mode, ai.prob(i))) gated[i] = ai.species(i);
  detail::AiVotes votes{gated, mode.ai_weight, mode.kind != AiModeKind::Invalidating};

  if (mode.kind == AiModeKind::Invalidating) {
    AggregationResult res = run_plantnet(t, cfg, observer);
    detail::score_given_labels(t, res.user_weights, res.labels, &votes, cfg, res.confidence,
                               res.accuracy_ratio, res.valid);
    return res;
  }
  return detail::run_engine(t, cfg, &votes, observer);
}

}  // namespace consensus
