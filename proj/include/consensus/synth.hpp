#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "consensus/errors.hpp"
#include "consensus/model.hpp"
#include "consensus/rng.hpp"

namespace consensus {

// Three activity/skill tiers. Experts rarely misidentify and vote a lot;
// single-time users are the long tail of the activity distribution.
enum class SkillTier : int { Expert = 0, Average = 1, SingleTime = 2 };

struct SynthConfig {
  std::uint32_t n_obs = 1000;
  std::uint32_t n_users = 100;
  std::uint32_t k_species = 20;

  // Proportions of the user population per tier; must sum to 1.
  double expert_fraction = 0.05;
  double average_fraction = 0.55;
  double single_fraction = 0.40;

  // Probability that a voter of the tier picks a wrong species (uniform over
  // the other K-1) instead of the true one.
  double expert_noise = 0.02;
  double average_noise = 0.20;
  double single_noise = 0.45;

  // Relative chance of being drawn as a voter; makes a few users account for
  // most of the votes, as in the real activity distribution.
  double expert_activity = 20.0;
  double average_activity = 5.0;
  double single_activity = 1.0;

  // Votes per observation follow P(v) proportional to v^-exponent on
  // [1, max_votes_per_obs].
  double votes_exponent = 2.0;
  std::uint32_t max_votes_per_obs = 30;

  std::uint64_t seed = 1;

  void validate() const {
    if (n_obs == 0 || n_users == 0) throw error(errc::invalid_config, "need users and observations");
    if (k_species < 2) throw error(errc::invalid_config, "need at least two species");
    const double mix = expert_fraction + average_fraction + single_fraction;
    if (!(std::abs(mix - 1.0) < 1e-9) || expert_fraction < 0 || average_fraction < 0 ||
        single_fraction < 0)
      throw error(errc::invalid_config, "skill mix proportions must be >= 0 and sum to 1");
    for (double r : {expert_noise, average_noise, single_noise})
      if (!(r >= 0.0 && r <= 1.0)) throw error(errc::invalid_config, "noise rate outside [0,1]");
    for (double a : {expert_activity, average_activity, single_activity})
      if (!(a > 0.0)) throw error(errc::invalid_config, "activity multipliers must be positive");
    if (max_votes_per_obs == 0) throw error(errc::invalid_config, "max_votes_per_obs must be >= 1");
    if (!(votes_exponent >= 0.0)) throw error(errc::invalid_config, "votes exponent must be >= 0");
  }
};

struct SynthDataset {
  VoteTable table;
  std::vector<SpeciesId> truth;  // true species per observation, table ids
  std::vector<UserId> experts;   // expert-tier users that cast a vote, table ids
};

namespace detail {

// Tier boundaries by user id: [0, e) experts, [e, e+a) average, rest single.
struct TierSplit {
  std::uint32_t experts, averages;
  SkillTier tier_of(UserId u) const {
    if (u < experts) return SkillTier::Expert;
    if (u < experts + averages) return SkillTier::Average;
    return SkillTier::SingleTime;
  }
};

inline TierSplit tier_split(const SynthConfig& cfg) {
  auto part = [&](double f) {
    return static_cast<std::uint32_t>(std::llround(f * static_cast<double>(cfg.n_users)));
  };
  TierSplit s{part(cfg.expert_fraction), part(cfg.average_fraction)};
  s.experts = std::min(s.experts, cfg.n_users);
  s.averages = std::min(s.averages, cfg.n_users - s.experts);
  return s;
}

}  // namespace detail

// Deterministic sampler of a population of noisy users voting on observations
// with known true species. Output ids are canonical VoteTable ids, so the
// truth and expert lists line up with the returned table directly.
inline SynthDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const auto split = detail::tier_split(cfg);
  SplitMix rng(cfg.seed);

  const double noise[3] = {cfg.expert_noise, cfg.average_noise, cfg.single_noise};

  // Inverse-CDF table for the votes-per-observation law.
  const std::uint32_t vmax = std::min(cfg.max_votes_per_obs, cfg.n_users);
  std::vector<double> cdf(vmax);
  double acc = 0.0;
  for (std::uint32_t v = 1; v <= vmax; ++v) {
    acc += std::pow(static_cast<double>(v), -cfg.votes_exponent);
    cdf[v - 1] = acc;
  }
  for (double& c : cdf) c /= acc;

  // Tier-weighted user draw: uniform inside a tier, activity-weighted across.
  const std::uint32_t count[3] = {split.experts, split.averages,
                                  cfg.n_users - split.experts - split.averages};
  const double act[3] = {cfg.expert_activity, cfg.average_activity, cfg.single_activity};
  double cum[3];
  double w_total = 0.0;
  for (int k = 0; k < 3; ++k) w_total = cum[k] = w_total + act[k] * count[k];
  auto draw_user = [&]() -> UserId {
    const double r = rng.uniform() * w_total;
    int k = r < cum[0] ? 0 : (r < cum[1] ? 1 : 2);
    while (count[k] == 0) k = (k + 2) % 3;  // rounding pushed r into an empty tier
    const std::uint32_t base = (k > 0 ? count[0] : 0u) + (k > 1 ? count[1] : 0u);
    return base + rng.below(count[k]);
  };

  VoteTable::DenseInput in;
  in.n_species = cfg.k_species;
  in.author.resize(cfg.n_obs);
  std::vector<SpeciesId> truth(cfg.n_obs);
  std::vector<UserId> obs_voters;

  auto cast_vote = [&](ObsId i, UserId u) {
    const SpeciesId t = truth[i];
    const double miss = noise[static_cast<int>(split.tier_of(u))];
    SpeciesId s = t;
    if (rng.uniform() < miss) {
      s = static_cast<SpeciesId>(rng.below(cfg.k_species - 1));
      if (s >= t) ++s;  // uniform over the K-1 wrong species
    }
    in.votes.push_back(Vote{i, u, s});
  };

  for (ObsId i = 0; i < cfg.n_obs; ++i) {
    truth[i] = static_cast<SpeciesId>(rng.below(cfg.k_species));
    const double r = rng.uniform();
    const std::uint32_t n_votes =
        1 + static_cast<std::uint32_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());

    // The author shares the observation and always votes on it first.
    const UserId author = draw_user();
    in.author[i] = author;
    obs_voters.assign(1, author);
    cast_vote(i, author);

    while (obs_voters.size() < n_votes) {
      const UserId u = draw_user();
      if (std::find(obs_voters.begin(), obs_voters.end(), u) != obs_voters.end()) continue;
      obs_voters.push_back(u);
      cast_vote(i, u);
    }
  }

  VoteTable::DensePerms perms;
  SynthDataset out{VoteTable::build_dense(std::move(in), &perms), std::move(truth), {}};
  for (SpeciesId& t : out.truth) t = perms.species_map[t];
  const auto mapped = static_cast<UserId>(perms.user_map.size());
  for (UserId u = 0; u < std::min(split.experts, mapped); ++u)
    if (perms.user_map[u] != kNoId) out.experts.push_back(perms.user_map[u]);
  std::sort(out.experts.begin(), out.experts.end());
  return out;
}

}  // namespace consensus
