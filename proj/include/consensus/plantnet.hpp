#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "consensus/detail/tally.hpp"
#include "consensus/errors.hpp"
#include "consensus/model.hpp"
#include "consensus/parallel.hpp"

namespace consensus {

// Trust score of a user credited with n distinct species:
//   f(n) = n^alpha - n^beta + gamma
// f(0) = f(1) = gamma, and f is non-decreasing from n = 1 on whenever
// alpha > beta > 0.
inline double weight_fn(std::int64_t n, const StrategyConfig& cfg) {
  if (n <= 0) return cfg.gamma;
  const double x = static_cast<double>(n);
  return std::pow(x, cfg.alpha) - std::pow(x, cfg.beta) + cfg.gamma;
}

// A lone vote from such a user validates its observation on its own: the
// accuracy ratio of a single vote is 1 and its confidence is the weight.
inline bool is_self_validating(double weight, const StrategyConfig& cfg) {
  return weight >= cfg.theta_conf;
}

struct ObservationScore {
  double confidence = 0.0;
  double accuracy_ratio = 0.0;
  bool valid = false;
};

// Score one observation for a given label. votes must be in ascending user
// order (voter_set provides that); weights is indexed by user id. The
// optional AI vote joins confidence and total only — label choice already
// happened.
inline ObservationScore score_observation_with_ai(
    std::span<const std::pair<UserId, SpeciesId>> votes, std::span<const double> weights,
    SpeciesId label, SpeciesId ai_species, double ai_weight, const StrategyConfig& cfg) {
  double conf = 0.0, total = 0.0;
  for (const auto& [user, species] : votes) {
    const double w = weights[user];
    total += w;
    if (species == label) conf += w;
  }
  if (ai_species != kNoId && ai_weight != 0.0) {
    total += ai_weight;
    if (ai_species == label) conf += ai_weight;
  }
  if (!(total > 0.0))
    throw error(errc::internal, "zero total weight on an observation");
  ObservationScore s;
  s.confidence = conf;
  s.accuracy_ratio = conf / total;
  s.valid = s.accuracy_ratio >= cfg.theta_acc && conf >= cfg.theta_conf;
  return s;
}

inline ObservationScore score_observation(std::span<const std::pair<UserId, SpeciesId>> votes,
                                          std::span<const double> weights, SpeciesId label,
                                          const StrategyConfig& cfg) {
  return score_observation_with_ai(votes, weights, label, kNoId, 0.0, cfg);
}

// Snapshot handed to an observer after each iteration's recount. Spans point
// into engine state and are only valid during the call.
struct IterationSnapshot {
  int iteration = 0;
  std::span<const double> weights;
  std::span<const SpeciesId> labels;
  std::span<const std::uint8_t> valid;
};
using IterationObserver = std::function<void(const IterationSnapshot&)>;

namespace detail {

// Pre-gated AI participation for the fixed-weight family: species[i] == kNoId
// where the AI does not vote.
struct AiVotes {
  std::span<const SpeciesId> species;
  double weight = 0.0;
  bool in_label = true;
};

// One labeling + scoring sweep over all observations.
inline void label_and_score_pass(const VoteTable& t, std::span<const double> weights,
                                 const AiVotes* ai, const StrategyConfig& cfg,
                                 std::span<SpeciesId> labels, std::span<double> confidence,
                                 std::span<double> accuracy, std::span<std::uint8_t> valid) {
  par::for_blocks(t.n_obs(), 4096, [&](std::size_t lo, std::size_t hi) {
    TallyScratch scratch;
    for (std::size_t i = lo; i < hi; ++i) {
      const ObsId obs = static_cast<ObsId>(i);
      const PickResult pick = weighted_pick(
          t.voters(obs), t.votes_on(obs), [&](UserId u) { return weights[u]; },
          ai ? ai->species[i] : kNoId, ai ? ai->weight : 0.0, ai ? ai->in_label : true,
          cfg.seed, obs, scratch);
      labels[i] = pick.label;
      confidence[i] = pick.confidence;
      accuracy[i] = pick.total > 0.0 ? pick.confidence / pick.total : 0.0;
      valid[i] = accuracy[i] >= cfg.theta_acc && pick.confidence >= cfg.theta_conf ? 1 : 0;
    }
  });
}

// Confidence/accuracy/validity for labels that are already fixed. Used by the
// invalidating AI overlay; accumulation order matches label_and_score_pass
// bit for bit.
inline void score_given_labels(const VoteTable& t, std::span<const double> weights,
                               std::span<const SpeciesId> labels, const AiVotes* ai,
                               const StrategyConfig& cfg, std::span<double> confidence,
                               std::span<double> accuracy, std::span<std::uint8_t> valid) {
  par::for_blocks(t.n_obs(), 4096, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const ObsId obs = static_cast<ObsId>(i);
      auto users = t.voters(obs);
      auto species = t.votes_on(obs);
      double conf = 0.0, total = 0.0;
      for (std::size_t v = 0; v < users.size(); ++v) {
        const double w = weights[users[v]];
        total += w;
        if (species[v] == labels[i]) conf += w;
      }
      if (ai && ai->species[i] != kNoId && ai->weight != 0.0) {
        total += ai->weight;
        if (ai->species[i] == labels[i]) conf += ai->weight;
      }
      confidence[i] = conf;
      accuracy[i] = total > 0.0 ? conf / total : 0.0;
      valid[i] = accuracy[i] >= cfg.theta_acc && conf >= cfg.theta_conf ? 1 : 0;
    }
  });
}

// Per-user recount against the current labels/valid flags. The optional set
// outputs exist for invariant tests (disjointness of the two species sets).
inline void recount_users(const VoteTable& t, std::span<const SpeciesId> labels,
                          std::span<const std::uint8_t> valid, const StrategyConfig& cfg,
                          std::span<UserStats> stats,
                          std::vector<std::vector<SpeciesId>>* author_sets = nullptr,
                          std::vector<std::vector<SpeciesId>>* vote_sets = nullptr) {
  par::for_blocks(t.n_users(), 256, [&](std::size_t lo, std::size_t hi) {
    std::vector<SpeciesId> authored, clicked;
    for (std::size_t uu = lo; uu < hi; ++uu) {
      const UserId u = static_cast<UserId>(uu);
      authored.clear();
      clicked.clear();
      auto obs = t.observations_of(u);
      auto species = t.votes_of(u);
      for (std::size_t v = 0; v < obs.size(); ++v) {
        if (species[v] != labels[obs[v]]) continue;  // only votes matching the estimate count
        if (t.author(obs[v]) == u) {
          if (valid[obs[v]]) authored.push_back(species[v]);  // authored species need validity
        } else {
          clicked.push_back(species[v]);  // click votes do not
        }
      }
      std::sort(authored.begin(), authored.end());
      authored.erase(std::unique(authored.begin(), authored.end()), authored.end());
      std::sort(clicked.begin(), clicked.end());
      clicked.erase(std::unique(clicked.begin(), clicked.end()), clicked.end());
      // Author precedence: species already counted as authored never count again.
      std::uint32_t n_vote = 0;
      {
        std::size_t a = 0;
        std::vector<SpeciesId> exclusive;
        for (SpeciesId s : clicked) {
          while (a < authored.size() && authored[a] < s) ++a;
          if (a < authored.size() && authored[a] == s) continue;
          ++n_vote;
          if (vote_sets) exclusive.push_back(s);
        }
        if (vote_sets) (*vote_sets)[uu] = std::move(exclusive);
      }
      UserStats& st = stats[uu];
      st.n_author = static_cast<std::uint32_t>(authored.size());
      st.n_vote = n_vote;
      st.n_u = std::llround(static_cast<double>(st.n_author) +
                            cfg.vote_discount * static_cast<double>(st.n_vote));
      st.weight = weight_fn(st.n_u, cfg);
      if (author_sets) (*author_sets)[uu] = std::move(authored);
    }
  });
}

// Iterative weighted majority vote. Fixed point over (labels, valid flags,
// per-user integer counts); max_iterations caps the loop and non-convergence
// is a warning carried in the result, not an error.
inline AggregationResult run_engine(const VoteTable& t, const StrategyConfig& cfg,
                                    const AiVotes* ai, const IterationObserver& observer) {
  const std::size_t n = t.n_obs();
  const std::size_t m = t.n_users();
  AggregationResult res;
  res.labels.resize(n);
  res.confidence.resize(n);
  res.accuracy_ratio.resize(n);
  res.valid.resize(n);
  res.user_weights.assign(m, cfg.gamma);  // everyone starts at the newcomer weight

  std::vector<UserStats> stats(m);
  std::vector<SpeciesId> prev_labels;
  std::vector<std::uint8_t> prev_valid;
  std::vector<std::int64_t> prev_n(m), cur_n(m);

  const int max_iters = std::max(1, cfg.max_iterations);
  int iter = 0;
  bool converged = false;
  while (iter < max_iters) {
    ++iter;
    label_and_score_pass(t, res.user_weights, ai, cfg, res.labels, res.confidence,
                         res.accuracy_ratio, res.valid);
    recount_users(t, res.labels, res.valid, cfg, stats);
    for (std::size_t u = 0; u < m; ++u) {
      cur_n[u] = stats[u].n_u;
      res.user_weights[u] = stats[u].weight;
    }
    if (observer)
      observer({iter, res.user_weights, res.labels, res.valid});
    if (iter > 1 && res.labels == prev_labels && res.valid == prev_valid && cur_n == prev_n) {
      converged = true;
      break;
    }
    prev_labels = res.labels;
    prev_valid = res.valid;
    prev_n = cur_n;
  }
  res.iterations_run = iter;
  res.converged = converged;
  return res;
}

}  // namespace detail

// Weighted majority labels for externally supplied weights (one per user).
inline std::vector<SpeciesId> weighted_labels(const VoteTable& t,
                                              std::span<const double> weights,
                                              std::uint64_t seed) {
  if (weights.size() != t.n_users())
    throw error(errc::index_error, "weight vector does not match the user count");
  StrategyConfig cfg;
  cfg.theta_acc = 0.0;
  cfg.theta_conf = 0.0;
  cfg.seed = seed;
  std::vector<SpeciesId> labels(t.n_obs());
  std::vector<double> conf(t.n_obs()), acc(t.n_obs());
  std::vector<std::uint8_t> valid(t.n_obs());
  detail::label_and_score_pass(t, weights, nullptr, cfg, labels, conf, acc, valid);
  return labels;
}

// Recount of every user against fixed labels/valid flags.
inline std::vector<UserStats> user_species_counts(const VoteTable& t,
                                                  std::span<const SpeciesId> labels,
                                                  std::span<const std::uint8_t> valid,
                                                  const StrategyConfig& cfg) {
  if (labels.size() != t.n_obs() || valid.size() != t.n_obs())
    throw error(errc::index_error, "labels/valid do not match the observation count");
  std::vector<UserStats> stats(t.n_users());
  detail::recount_users(t, labels, valid, cfg, stats);
  return stats;
}

inline AggregationResult run_plantnet(const VoteTable& t, const StrategyConfig& cfg,
                                      const IterationObserver& observer = {}) {
  return detail::run_engine(t, cfg, nullptr, observer);
}

}  // namespace consensus
