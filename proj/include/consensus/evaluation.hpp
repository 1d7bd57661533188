#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "consensus/errors.hpp"
#include "consensus/model.hpp"

namespace consensus {

// Expert-derived ground truth. An observation enters the truth map when at
// least one expert voted on it and all expert votes agree; observations where
// experts contradict each other are dropped and counted.
struct ExpertTruth {
  std::vector<UserId> experts;   // sorted, unique
  std::vector<SpeciesId> truth;  // per observation, kNoId = no expert truth
  std::uint32_t dropped_contradictions = 0;

  bool has(ObsId i) const { return i < truth.size() && truth[i] != kNoId; }
};

enum class SubsetKind { Expert, MultipleVotes, Disagreement };

inline const char* subset_name(SubsetKind k) {
  switch (k) {
    case SubsetKind::Expert: return "expert";
    case SubsetKind::MultipleVotes: return "multiple";
    case SubsetKind::Disagreement: return "disagreement";
  }
  return "expert";
}

struct EvalSubset {
  SubsetKind kind = SubsetKind::Expert;
  std::vector<ObsId> members;  // ascending
};

struct EvalSubsets {
  ExpertTruth truth;
  EvalSubset expert;          // >= 1 expert vote, no expert contradiction
  EvalSubset multiple_votes;  // expert subset with >= 2 votes in total
  EvalSubset disagreement;    // multiple-votes subset with >= 2 distinct species voted
};

inline EvalSubsets build_subsets(const VoteTable& t, std::span<const UserId> experts) {
  if (experts.empty()) throw error(errc::empty_expert_set, "no expert users supplied");
  std::vector<std::uint8_t> is_expert(t.n_users(), 0);
  for (UserId u : experts) {
    if (u >= t.n_users()) throw error(errc::index_error, "expert user id out of range");
    is_expert[u] = 1;
  }

  EvalSubsets out;
  out.truth.experts.assign(experts.begin(), experts.end());
  std::sort(out.truth.experts.begin(), out.truth.experts.end());
  out.truth.experts.erase(std::unique(out.truth.experts.begin(), out.truth.experts.end()),
                          out.truth.experts.end());
  out.truth.truth.assign(t.n_obs(), kNoId);
  out.expert.kind = SubsetKind::Expert;
  out.multiple_votes.kind = SubsetKind::MultipleVotes;
  out.disagreement.kind = SubsetKind::Disagreement;

  std::vector<SpeciesId> distinct;
  for (ObsId i = 0; i < t.n_obs(); ++i) {
    auto users = t.voters(i);
    auto species = t.votes_on(i);
    SpeciesId expert_species = kNoId;
    bool contradiction = false;
    distinct.clear();
    for (std::size_t v = 0; v < users.size(); ++v) {
      if (std::find(distinct.begin(), distinct.end(), species[v]) == distinct.end())
        distinct.push_back(species[v]);
      if (is_expert[users[v]]) {
        if (expert_species == kNoId) expert_species = species[v];
        else if (expert_species != species[v]) contradiction = true;
      }
    }
    if (expert_species == kNoId) continue;  // no expert looked at it
    if (contradiction) {
      ++out.truth.dropped_contradictions;
      continue;
    }
    out.truth.truth[i] = expert_species;
    out.expert.members.push_back(i);
    if (users.size() >= 2) {
      out.multiple_votes.members.push_back(i);
      if (distinct.size() >= 2) out.disagreement.members.push_back(i);
    }
  }
  return out;
}

// Share of subset observations whose estimated label matches the truth AND is
// valid; an invalid estimate counts as wrong no matter its label.
inline double label_accuracy(const AggregationResult& r, const ExpertTruth& truth,
                             const EvalSubset& subset) {
  if (subset.members.empty()) throw error(errc::empty_subset, "empty evaluation subset");
  std::size_t hits = 0;
  for (ObsId i : subset.members) {
    if (!truth.has(i)) throw error(errc::internal, "subset member without a truth entry");
    hits += (r.valid[i] && r.labels[i] == truth.truth[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(subset.members.size());
}

enum class MacroDomain {
  Subset,  // species seen in the subset (truth or valid prediction)
  All,     // every species id in [0, K): absent species dilute the average
};

// Macro precision / recall over the subset. An invalid estimate is "no
// prediction": a false negative for the true species and never a true/false
// positive. Per-species precision averages over species with at least one
// prediction; per-species recall averages over species with at least one
// truth instance. With MacroDomain::All both sums divide by K instead.
inline std::pair<double, double> macro_precision_recall(const AggregationResult& r,
                                                        const ExpertTruth& truth,
                                                        const EvalSubset& subset,
                                                        std::uint32_t k_species,
                                                        MacroDomain domain = MacroDomain::Subset) {
  if (subset.members.empty()) throw error(errc::empty_subset, "empty evaluation subset");
  struct Cell {
    std::uint64_t tp = 0, fp = 0, fn = 0;
  };
  std::vector<Cell> cells(k_species);
  for (ObsId i : subset.members) {
    const SpeciesId tr = truth.truth[i];
    if (tr == kNoId) throw error(errc::internal, "subset member without a truth entry");
    if (r.valid[i]) {
      const SpeciesId p = r.labels[i];
      if (p == tr) {
        ++cells[tr].tp;
      } else {
        ++cells[p].fp;
        ++cells[tr].fn;
      }
    } else {
      ++cells[tr].fn;
    }
  }
  double precision_sum = 0.0, recall_sum = 0.0;
  std::uint64_t predicted_species = 0, truth_species = 0;
  for (const Cell& c : cells) {
    if (c.tp + c.fp > 0) {
      precision_sum += static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
      ++predicted_species;
    }
    if (c.tp + c.fn > 0) {
      recall_sum += static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
      ++truth_species;
    }
  }
  if (domain == MacroDomain::All) {
    const double k = static_cast<double>(k_species);
    return {k > 0 ? precision_sum / k : 0.0, k > 0 ? recall_sum / k : 0.0};
  }
  return {predicted_species ? precision_sum / static_cast<double>(predicted_species) : 0.0,
          truth_species ? recall_sum / static_cast<double>(truth_species) : 0.0};
}

// Share of valid observations over the FULL table, whatever subset the other
// metrics use.
inline double valid_fraction(const AggregationResult& r) {
  return r.valid.empty()
             ? 0.0
             : static_cast<double>(r.valid_count()) / static_cast<double>(r.valid.size());
}

// |species recovered by a valid, correct prediction| / |species in the truth|
// within the subset.
inline double species_coverage(const AggregationResult& r, const ExpertTruth& truth,
                               const EvalSubset& subset) {
  if (subset.members.empty()) throw error(errc::empty_subset, "empty evaluation subset");
  std::unordered_set<SpeciesId> in_truth, recovered;
  for (ObsId i : subset.members) {
    in_truth.insert(truth.truth[i]);
    if (r.valid[i] && r.labels[i] == truth.truth[i]) recovered.insert(truth.truth[i]);
  }
  return in_truth.empty()
             ? 0.0
             : static_cast<double>(recovered.size()) / static_cast<double>(in_truth.size());
}

// Equal-width calibration bins over [0, 1]. A probability p lands in bin
// floor(p * n_bins), with p = 1 clamped into the last bin. Empty bins carry
// count 0 and NaN for the undefined statistics.
struct ReliabilityBin {
  double low = 0.0, high = 0.0;
  double mean_prob = 0.0;
  double accuracy = 0.0;
  std::uint64_t count = 0;
};

inline std::vector<ReliabilityBin> reliability_bins(
    std::span<const std::pair<double, bool>> predictions, int n_bins = 10) {
  if (n_bins < 1) throw error(errc::invalid_config, "n_bins must be at least 1");
  std::vector<double> prob_sum(n_bins, 0.0);
  std::vector<std::uint64_t> hits(n_bins, 0), counts(n_bins, 0);
  for (const auto& [p, correct] : predictions) {
    if (!(p >= 0.0 && p <= 1.0))
      throw error(errc::range_error, "prediction probability outside [0, 1]");
    int b = static_cast<int>(p * n_bins);
    if (b >= n_bins) b = n_bins - 1;  // p == 1.0
    prob_sum[b] += p;
    hits[b] += correct ? 1 : 0;
    ++counts[b];
  }
  std::vector<ReliabilityBin> bins(n_bins);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b < n_bins; ++b) {
    bins[b].low = static_cast<double>(b) / n_bins;
    bins[b].high = static_cast<double>(b + 1) / n_bins;
    bins[b].count = counts[b];
    bins[b].mean_prob = counts[b] ? prob_sum[b] / static_cast<double>(counts[b]) : nan;
    bins[b].accuracy =
        counts[b] ? static_cast<double>(hits[b]) / static_cast<double>(counts[b]) : nan;
  }
  return bins;
}

struct EvaluationReport {
  SubsetKind subset = SubsetKind::Expert;
  MacroDomain macro_domain = MacroDomain::Subset;
  std::size_t subset_size = 0;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double valid_fraction_full = 0.0;
  double species_coverage = 0.0;
  std::vector<ReliabilityBin> reliability;  // present when AI predictions were given
};

// Every metric for one (result, subset) pair; reliability of the AI
// predictions themselves is included when a prediction set is supplied.
inline EvaluationReport evaluate_on_subset(const AggregationResult& r, const ExpertTruth& truth,
                                           const EvalSubset& subset, std::uint32_t k_species,
                                           MacroDomain domain = MacroDomain::Subset,
                                           const AiPredictionSet* ai = nullptr,
                                           int n_bins = 10) {
  EvaluationReport rep;
  rep.subset = subset.kind;
  rep.macro_domain = domain;
  rep.subset_size = subset.members.size();
  rep.accuracy = label_accuracy(r, truth, subset);
  auto [p, rc] = macro_precision_recall(r, truth, subset, k_species, domain);
  rep.macro_precision = p;
  rep.macro_recall = rc;
  rep.valid_fraction_full = valid_fraction(r);
  rep.species_coverage = species_coverage(r, truth, subset);
  if (ai) {
    std::vector<std::pair<double, bool>> preds;
    preds.reserve(subset.members.size());
    for (ObsId i : subset.members)
      if (ai->has(i)) preds.emplace_back(ai->prob(i), ai->species(i) == truth.truth[i]);
    rep.reliability = reliability_bins(preds, n_bins);
  }
  return rep;
}

}  // namespace consensus
