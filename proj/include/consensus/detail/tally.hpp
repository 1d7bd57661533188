#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "consensus/model.hpp"
#include "consensus/rng.hpp"

namespace consensus::detail {

// Reusable per-observation scratch. Slots stay a flat vector: observations
// carry few distinct species in practice, and insertion order is irrelevant
// because every per-species sum and the running total accumulate in the
// caller's vote order (ascending user id), which pins the floating point
// results regardless of container.
struct TallyScratch {
  std::vector<std::pair<SpeciesId, double>> slots;
  std::vector<SpeciesId> tied;
};

struct PickResult {
  SpeciesId label = kNoId;
  double confidence = 0.0;  // weight behind the picked label (incl. AI when it scores)
  double total = 0.0;       // total vote weight on the observation (incl. AI)
};

// One observation: weighted tally, argmax with the seeded per-observation tie
// draw, and the confidence/total needed for scoring.
//
// ai_species == kNoId means no AI contribution. With ai_in_label the AI weight
// enters the tally before the argmax (it can move the label); otherwise it is
// added after the argmax and affects only confidence/total. An AI weight of
// exactly 0 is skipped entirely, which keeps the "AI disabled" runs
// bit-identical to plain runs.
template <class WeightOf>
PickResult weighted_pick(std::span<const UserId> users, std::span<const SpeciesId> species,
                         WeightOf&& weight_of, SpeciesId ai_species, double ai_weight,
                         bool ai_in_label, std::uint64_t seed, ObsId obs, TallyScratch& s) {
  s.slots.clear();
  double total = 0.0;
  auto add = [&s](SpeciesId k, double w) {
    for (auto& slot : s.slots) {
      if (slot.first == k) {
        slot.second += w;
        return;
      }
    }
    s.slots.emplace_back(k, w);
  };
  for (std::size_t v = 0; v < users.size(); ++v) {
    const double w = weight_of(users[v]);
    add(species[v], w);
    total += w;
  }
  const bool ai_present = ai_species != kNoId && ai_weight != 0.0;
  if (ai_present && ai_in_label) {
    add(ai_species, ai_weight);
    total += ai_weight;
  }

  PickResult r;
  if (s.slots.empty()) return r;
  double best = s.slots[0].second;
  for (const auto& slot : s.slots) best = std::max(best, slot.second);
  s.tied.clear();
  for (const auto& slot : s.slots)
    if (slot.second == best) s.tied.push_back(slot.first);
  std::sort(s.tied.begin(), s.tied.end());
  r.label = s.tied[tie_pick(seed, obs, s.tied.size())];

  if (ai_present && !ai_in_label) {
    add(ai_species, ai_weight);
    total += ai_weight;
  }
  for (const auto& slot : s.slots) {
    if (slot.first == r.label) {
      r.confidence = slot.second;
      break;
    }
  }
  r.total = total;
  return r;
}

}  // namespace consensus::detail
