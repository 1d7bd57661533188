#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "consensus/model.hpp"
#include "consensus/parallel.hpp"
#include "consensus/plantnet.hpp"

namespace consensus {

namespace detail {

// Baselines report confidence = weight behind the winning label and
// accuracy_ratio = confidence / total vote weight, with no validity
// thresholds of their own.
inline StrategyConfig baseline_pass_config(std::uint64_t seed) {
  StrategyConfig cfg;
  cfg.theta_acc = 0.0;
  cfg.theta_conf = 0.0;
  cfg.seed = seed;
  return cfg;
}

inline AggregationResult weighted_one_pass(const VoteTable& t, std::vector<double> weights,
                                           std::uint64_t seed) {
  const StrategyConfig cfg = baseline_pass_config(seed);
  AggregationResult res;
  res.labels.resize(t.n_obs());
  res.confidence.resize(t.n_obs());
  res.accuracy_ratio.resize(t.n_obs());
  res.valid.resize(t.n_obs());
  label_and_score_pass(t, weights, nullptr, cfg, res.labels, res.confidence,
                       res.accuracy_ratio, res.valid);
  res.user_weights = std::move(weights);
  res.iterations_run = 1;
  res.converged = true;
  return res;
}

}  // namespace detail

// Plain majority vote. Every vote weighs 1, ties break on the shared
// per-observation stream, everything is valid.
inline AggregationResult aggregate_mv(const VoteTable& t, std::uint64_t seed = 0) {
  return detail::weighted_one_pass(t, std::vector<double>(t.n_users(), 1.0), seed);
}

// Worker Agreement With Aggregate: each user is reweighted by their agreement
// rate with the majority-vote labels (over all of their votes, singleton
// observations included), then one weighted pass re-estimates the labels.
inline AggregationResult aggregate_wawa(const VoteTable& t, std::uint64_t seed = 0) {
  AggregationResult mv = aggregate_mv(t, seed);
  std::vector<double> weights(t.n_users(), 0.0);
  par::for_blocks(t.n_users(), 1024, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t uu = lo; uu < hi; ++uu) {
      auto obs = t.observations_of(static_cast<UserId>(uu));
      auto species = t.votes_of(static_cast<UserId>(uu));
      std::uint64_t agree = 0;
      for (std::size_t v = 0; v < obs.size(); ++v) agree += species[v] == mv.labels[obs[v]];
      weights[uu] = obs.empty() ? 0.0
                                : static_cast<double>(agree) / static_cast<double>(obs.size());
    }
  });
  return detail::weighted_one_pass(t, std::move(weights), seed);
}

// Conservative baseline: the majority-vote label, valid only when at least
// two users voted and the top species holds at least two thirds of the votes.
// The threshold compares in exact integer arithmetic.
inline AggregationResult aggregate_twothird(const VoteTable& t, std::uint64_t seed = 0) {
  AggregationResult res = aggregate_mv(t, seed);
  par::for_blocks(t.n_obs(), 4096, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const std::uint64_t n_votes = t.voters(static_cast<ObsId>(i)).size();
      const std::uint64_t top = static_cast<std::uint64_t>(std::llround(res.confidence[i]));
      res.valid[i] = (n_votes >= 2 && 3 * top >= 2 * n_votes) ? 1 : 0;
    }
  });
  return res;
}

}  // namespace consensus
