#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "consensus/errors.hpp"

namespace consensus {

using ObsId = std::uint32_t;
using UserId = std::uint32_t;
using SpeciesId = std::uint32_t;

// Sentinel for "no id" (absent AI vote, unset author, unmapped permutation slot).
inline constexpr std::uint32_t kNoId = 0xffffffffu;

struct Vote {
  ObsId obs;
  UserId user;
  SpeciesId species;
};

// Knobs of the iterative weighted majority vote. Defaults are the production
// values; gamma is kept in closed form, not as a rounded literal.
struct StrategyConfig {
  double theta_acc = 0.7;        // threshold on the accuracy ratio
  double theta_conf = 2.0;       // threshold on the label confidence
  double alpha = 0.5;            // exponents of the trust curve, alpha > beta
  double beta = 0.2;
  double gamma = std::log(2.1);  // newcomer weight, f(0) = f(1) = gamma
  double vote_discount = 0.1;    // non-author identifications count at this rate
  int max_iterations = 50;
  std::uint64_t seed = 0;

  // Production invariants. The engine itself tolerates degenerate settings
  // (zeroed thresholds, alpha == beta) used by equivalence checks; user-facing
  // paths call validate() first.
  void validate() const {
    if (!(theta_acc > 0.0 && theta_acc <= 1.0))
      throw error(errc::invalid_config, "theta_acc must lie in (0, 1]");
    if (!(theta_conf > 0.0)) throw error(errc::invalid_config, "theta_conf must be positive");
    if (!(alpha > beta && beta > 0.0))
      throw error(errc::invalid_config, "alpha > beta > 0 is required");
    if (!(gamma > 0.0)) throw error(errc::invalid_config, "gamma must be positive");
    if (!(vote_discount > 0.0))
      throw error(errc::invalid_config, "vote_discount must be positive");
    if (max_iterations < 1)
      throw error(errc::invalid_config, "max_iterations must be at least 1");
  }
};

// Per-user recount of one iteration.
struct UserStats {
  std::uint32_t n_author = 0;  // distinct species confirmed on own valid observations
  std::uint32_t n_vote = 0;    // distinct species confirmed on others' observations,
                               // excluding species already counted in n_author
  std::int64_t n_u = 0;        // Round(n_author + vote_discount * n_vote), half away from zero
  double weight = 0.0;
};

struct AggregationResult {
  std::vector<SpeciesId> labels;         // per observation
  std::vector<double> confidence;        // weight behind the estimated label
  std::vector<double> accuracy_ratio;    // confidence / total vote weight on the observation
  std::vector<std::uint8_t> valid;       // s_i
  std::vector<double> user_weights;      // per user (plus the appended AI user when present)
  int iterations_run = 0;
  bool converged = true;

  std::size_t valid_count() const {
    std::size_t c = 0;
    for (auto v : valid) c += v;
    return c;
  }
};

// Top-1 model prediction per observation with its output probability.
// At most one entry per observation; a later set() overwrites.
class AiPredictionSet {
 public:
  explicit AiPredictionSet(std::uint32_t n_obs)
      : species_(n_obs, kNoId), prob_(n_obs, 0.0) {}

  void set(ObsId obs, SpeciesId species, double prob) {
    if (obs >= species_.size()) throw error(errc::index_error, "observation id out of range");
    if (!(prob >= 0.0 && prob <= 1.0))
      throw error(errc::range_error, "prediction score outside [0, 1]");
    species_[obs] = species;
    prob_[obs] = prob;
  }

  bool has(ObsId obs) const { return obs < species_.size() && species_[obs] != kNoId; }
  SpeciesId species(ObsId obs) const { return species_[obs]; }
  double prob(ObsId obs) const { return prob_[obs]; }
  std::uint32_t n_obs() const { return static_cast<std::uint32_t>(species_.size()); }
  std::span<const SpeciesId> species_view() const { return species_; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto s : species_) c += (s != kNoId);
    return c;
  }

 private:
  std::vector<SpeciesId> species_;
  std::vector<double> prob_;
};

// External-token rows for ingestion. Tokens are opaque byte strings (commas
// and newlines excluded by the file format).
struct VoteRecord {
  std::string obs, user, species;
};

// species may be empty: the authorship row then carries no determination of
// its own, and the author must appear in the vote rows.
struct AuthorRecord {
  std::string obs, user, species;
};

// Immutable vote store.
//
// Layout: votes grouped by observation, ordered by ascending user id inside
// each observation (tallies later accumulate in exactly that order, which
// pins down floating-point sums bit-for-bit); a user-major view is kept for
// per-user sweeps. Duplicate (observation, user) pairs collapse to the last
// occurrence of the input. Every observation has an author, and the author
// always has a vote on it.
//
// Dense ids: observations in input first-appearance order; users and species
// in first-appearance order of the canonical vote stream (observation-major,
// user-ascending). That choice makes export -> import the identity on dense
// ids. A closed species dictionary overrides species order with dictionary
// order and fixes the species count.
class VoteTable {
 public:
  VoteTable() = default;

  std::uint32_t n_obs() const { return static_cast<std::uint32_t>(author_.size()); }
  std::uint32_t n_users() const { return n_users_; }
  std::uint32_t n_species() const { return n_species_; }
  std::uint64_t n_votes() const { return static_cast<std::uint64_t>(obs_user_.size()); }

  std::span<const UserId> voters(ObsId i) const {
    return {obs_user_.data() + obs_offsets_[i],
            static_cast<std::size_t>(obs_offsets_[i + 1] - obs_offsets_[i])};
  }
  std::span<const SpeciesId> votes_on(ObsId i) const {
    return {obs_species_.data() + obs_offsets_[i],
            static_cast<std::size_t>(obs_offsets_[i + 1] - obs_offsets_[i])};
  }
  UserId author(ObsId i) const { return author_[i]; }

  std::span<const ObsId> observations_of(UserId u) const {
    return {user_obs_.data() + user_offsets_[u],
            static_cast<std::size_t>(user_offsets_[u + 1] - user_offsets_[u])};
  }
  std::span<const SpeciesId> votes_of(UserId u) const {
    return {user_species_.data() + user_offsets_[u],
            static_cast<std::size_t>(user_offsets_[u + 1] - user_offsets_[u])};
  }

  // Token accessors fall back to the decimal dense id for tables built
  // without external tokens (synthetic data).
  std::string obs_token(ObsId i) const {
    return obs_tokens_.empty() ? std::to_string(i) : obs_tokens_[i];
  }
  std::string user_token(UserId u) const {
    return user_tokens_.empty() ? std::to_string(u) : user_tokens_[u];
  }
  std::string species_token(SpeciesId k) const {
    return species_tokens_.empty() ? std::to_string(k) : species_tokens_[k];
  }

  std::optional<ObsId> find_obs(const std::string& token) const {
    return find_in(obs_lookup_, obs_tokens_, token, n_obs());
  }
  std::optional<UserId> find_user(const std::string& token) const {
    return find_in(user_lookup_, user_tokens_, token, n_users_);
  }
  std::optional<SpeciesId> find_species(const std::string& token) const {
    return find_in(species_lookup_, species_tokens_, token, n_species_);
  }

  // --- construction ---------------------------------------------------------

  static VoteTable build(std::span<const VoteRecord> votes,
                         std::span<const AuthorRecord> authorship,
                         std::span<const std::string> species_dictionary = {});

  struct DenseInput {
    std::vector<Vote> votes;
    std::vector<UserId> author;     // one entry per observation, ids 0..n_obs-1
    std::uint32_t n_species = 0;    // 0 = derive from the votes
  };
  // Old id -> new id; kNoId marks a user that cast no vote (dropped).
  struct DensePerms {
    std::vector<UserId> user_map;
    std::vector<SpeciesId> species_map;
  };
  static VoteTable build_dense(DenseInput in, DensePerms* perms = nullptr);

  // Copy of the table with one appended user (id = n_users()) voting
  // per_obs_species[i] on every observation where that entry is not kNoId.
  // The appended user authors nothing; its id sorts after every real user,
  // so per-observation ordering is preserved.
  VoteTable with_appended_user(std::span<const SpeciesId> per_obs_species,
                               const std::string& token) const;

 private:
  struct RowRec {
    ObsId obs;
    UserId user;
    SpeciesId species;
    std::uint64_t idx;  // input position; last occurrence wins on duplicates
  };

  static VoteTable finalize(std::vector<RowRec> rows, std::vector<UserId> author,
                            std::vector<SpeciesId> author_species,
                            std::vector<std::string> obs_tokens,
                            std::vector<std::string> user_tokens,
                            std::vector<std::string> species_tokens,
                            std::unordered_map<std::string, std::uint32_t> obs_lookup,
                            std::unordered_map<std::string, std::uint32_t> user_lookup,
                            std::unordered_map<std::string, std::uint32_t> species_lookup,
                            std::uint32_t n_users_prelim, std::uint32_t n_species_prelim,
                            bool remap_species, bool keep_unvoted_species,
                            DensePerms* perms_out);

  static std::optional<std::uint32_t> find_in(
      const std::unordered_map<std::string, std::uint32_t>& lookup,
      const std::vector<std::string>& tokens, const std::string& token, std::uint32_t bound) {
    if (!tokens.empty()) {
      auto it = lookup.find(token);
      if (it == lookup.end()) return std::nullopt;
      return it->second;
    }
    // Dense table: tokens are the decimal ids themselves.
    std::uint32_t v = 0;
    const char* b = token.data();
    const char* e = b + token.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || v >= bound) return std::nullopt;
    return v;
  }

  void build_user_view();

  std::vector<std::uint64_t> obs_offsets_{0};
  std::vector<UserId> obs_user_;
  std::vector<SpeciesId> obs_species_;
  std::vector<UserId> author_;

  std::vector<std::uint64_t> user_offsets_{0};
  std::vector<ObsId> user_obs_;
  std::vector<SpeciesId> user_species_;

  std::uint32_t n_users_ = 0;
  std::uint32_t n_species_ = 0;

  std::vector<std::string> obs_tokens_, user_tokens_, species_tokens_;
  std::unordered_map<std::string, std::uint32_t> obs_lookup_, user_lookup_, species_lookup_;
};

// --- implementation ----------------------------------------------------------

inline VoteTable VoteTable::finalize(
    std::vector<RowRec> rows, std::vector<UserId> author,
    std::vector<SpeciesId> author_species, std::vector<std::string> obs_tokens,
    std::vector<std::string> user_tokens, std::vector<std::string> species_tokens,
    std::unordered_map<std::string, std::uint32_t> obs_lookup,
    std::unordered_map<std::string, std::uint32_t> user_lookup,
    std::unordered_map<std::string, std::uint32_t> species_lookup,
    std::uint32_t n_users_prelim, std::uint32_t n_species_prelim, bool remap_species,
    bool keep_unvoted_species, DensePerms* perms_out) {
  const std::uint32_t n_obs = static_cast<std::uint32_t>(author.size());
  auto obs_name = [&](ObsId i) {
    return obs_tokens.empty() ? std::to_string(i) : obs_tokens[i];
  };

  for (ObsId i = 0; i < n_obs; ++i) {
    if (author[i] == kNoId)
      throw error(errc::missing_author, "no authorship for observation '" + obs_name(i) + "'");
  }

  // Duplicate (observation, user) pairs: keep the last input occurrence.
  std::sort(rows.begin(), rows.end(), [](const RowRec& a, const RowRec& b) {
    return std::tie(a.obs, a.user, a.idx) < std::tie(b.obs, b.user, b.idx);
  });
  {
    std::size_t out = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i + 1 < rows.size() && rows[i + 1].obs == rows[i].obs && rows[i + 1].user == rows[i].user)
        continue;
      rows[out++] = rows[i];
    }
    rows.resize(out);
  }

  // Guarantee the author's vote. If it is absent and the authorship row
  // carried a species, materialize it; otherwise the observation is rejected.
  {
    std::vector<RowRec> appended;
    std::size_t cursor = 0;
    for (ObsId i = 0; i < n_obs; ++i) {
      bool found = false;
      while (cursor < rows.size() && rows[cursor].obs == i) {
        if (rows[cursor].user == author[i]) found = true;
        ++cursor;
      }
      if (!found) {
        if (author_species[i] == kNoId)
          throw error(errc::missing_author_vote,
                      "author of observation '" + obs_name(i) + "' cast no species vote");
        appended.push_back({i, author[i], author_species[i], 0});
      }
    }
    if (!appended.empty()) {
      rows.insert(rows.end(), appended.begin(), appended.end());
      std::sort(rows.begin(), rows.end(), [](const RowRec& a, const RowRec& b) {
        return std::tie(a.obs, a.user) < std::tie(b.obs, b.user);
      });
    }
  }

  // Canonical remap: walk the (observation-major, user-ascending) stream and
  // hand out final ids in first-appearance order. Users that never vote are
  // dropped. Unvoted species are kept (appended in ascending old-id order)
  // only when the caller forced a species space; otherwise they are dropped
  // along with their tokens.
  std::vector<UserId> user_map(n_users_prelim, kNoId);
  std::vector<SpeciesId> species_map(remap_species ? n_species_prelim : 0, kNoId);
  std::uint32_t next_user = 0, next_species = 0;
  for (const RowRec& r : rows) {
    if (user_map[r.user] == kNoId) user_map[r.user] = next_user++;
    if (remap_species && species_map[r.species] == kNoId) species_map[r.species] = next_species++;
  }
  if (remap_species && keep_unvoted_species) {
    for (std::uint32_t s = 0; s < n_species_prelim; ++s)
      if (species_map[s] == kNoId) species_map[s] = next_species++;
  }
  for (RowRec& r : rows) {
    r.user = user_map[r.user];
    if (remap_species) r.species = species_map[r.species];
  }
  for (ObsId i = 0; i < n_obs; ++i) author[i] = user_map[author[i]];

  std::sort(rows.begin(), rows.end(), [](const RowRec& a, const RowRec& b) {
    return std::tie(a.obs, a.user) < std::tie(b.obs, b.user);
  });

  VoteTable t;
  t.n_users_ = next_user;
  t.n_species_ = remap_species ? next_species : n_species_prelim;
  t.author_ = std::move(author);
  t.obs_offsets_.assign(n_obs + 1, 0);
  t.obs_user_.resize(rows.size());
  t.obs_species_.resize(rows.size());
  for (const RowRec& r : rows) ++t.obs_offsets_[r.obs + 1];
  for (ObsId i = 0; i < n_obs; ++i) t.obs_offsets_[i + 1] += t.obs_offsets_[i];
  for (std::size_t v = 0; v < rows.size(); ++v) {
    t.obs_user_[v] = rows[v].user;
    t.obs_species_[v] = rows[v].species;
  }

  // Permute tokens and lookups to the final id order.
  if (!user_tokens.empty()) {
    std::vector<std::string> permuted(next_user);
    for (std::uint32_t u = 0; u < n_users_prelim; ++u)
      if (user_map[u] != kNoId) permuted[user_map[u]] = std::move(user_tokens[u]);
    t.user_tokens_ = std::move(permuted);
    for (auto& [tok, id] : user_lookup) id = user_map[id];
    t.user_lookup_ = std::move(user_lookup);
  }
  if (!species_tokens.empty()) {
    if (remap_species) {
      std::vector<std::string> permuted(t.n_species_);
      for (std::uint32_t s = 0; s < n_species_prelim; ++s)
        if (species_map[s] != kNoId) permuted[species_map[s]] = std::move(species_tokens[s]);
      t.species_tokens_ = std::move(permuted);
      for (auto it = species_lookup.begin(); it != species_lookup.end();) {
        if (species_map[it->second] == kNoId) {
          it = species_lookup.erase(it);  // species mentioned only by an ignored authorship row
        } else {
          it->second = species_map[it->second];
          ++it;
        }
      }
    } else {
      t.species_tokens_ = std::move(species_tokens);
    }
    t.species_lookup_ = std::move(species_lookup);
  }
  if (!obs_tokens.empty()) {
    t.obs_tokens_ = std::move(obs_tokens);
    t.obs_lookup_ = std::move(obs_lookup);
  }

  if (perms_out) {
    perms_out->user_map = std::move(user_map);
    perms_out->species_map = std::move(species_map);
  }

  t.build_user_view();
  return t;
}

inline void VoteTable::build_user_view() {
  user_offsets_.assign(static_cast<std::size_t>(n_users_) + 1, 0);
  user_obs_.resize(obs_user_.size());
  user_species_.resize(obs_user_.size());
  for (UserId u : obs_user_) ++user_offsets_[u + 1];
  for (std::uint32_t u = 0; u < n_users_; ++u) user_offsets_[u + 1] += user_offsets_[u];
  std::vector<std::uint64_t> cursor(user_offsets_.begin(), user_offsets_.end() - 1);
  const std::uint32_t n = n_obs();
  for (ObsId i = 0; i < n; ++i) {
    for (std::uint64_t v = obs_offsets_[i]; v < obs_offsets_[i + 1]; ++v) {
      const UserId u = obs_user_[v];
      user_obs_[cursor[u]] = i;
      user_species_[cursor[u]] = obs_species_[v];
      ++cursor[u];
    }
  }
}

inline VoteTable VoteTable::build(std::span<const VoteRecord> votes,
                                  std::span<const AuthorRecord> authorship,
                                  std::span<const std::string> species_dictionary) {
  std::unordered_map<std::string, std::uint32_t> obs_lookup, user_lookup, species_lookup;
  std::vector<std::string> obs_tokens, user_tokens, species_tokens;
  const bool closed_species = !species_dictionary.empty();

  auto intern = [](std::unordered_map<std::string, std::uint32_t>& lookup,
                   std::vector<std::string>& tokens, const std::string& tok) {
    auto [it, inserted] = lookup.try_emplace(tok, static_cast<std::uint32_t>(tokens.size()));
    if (inserted) tokens.push_back(tok);
    return it->second;
  };

  if (closed_species) {
    for (const std::string& tok : species_dictionary) {
      auto [it, inserted] =
          species_lookup.try_emplace(tok, static_cast<std::uint32_t>(species_tokens.size()));
      if (!inserted)
        throw error(errc::invalid_config, "duplicate species token '" + tok + "' in dictionary");
      species_tokens.push_back(tok);
    }
  }
  auto intern_species = [&](const std::string& tok) -> SpeciesId {
    if (closed_species) {
      auto it = species_lookup.find(tok);
      if (it == species_lookup.end())
        throw error(errc::unknown_species, "species token '" + tok + "' not in the dictionary");
      return it->second;
    }
    return intern(species_lookup, species_tokens, tok);
  };

  std::vector<RowRec> rows;
  rows.reserve(votes.size());
  std::vector<UserId> author;
  std::vector<SpeciesId> author_species;
  auto ensure_obs = [&](const std::string& tok) -> ObsId {
    ObsId i = intern(obs_lookup, obs_tokens, tok);
    if (i >= author.size()) {
      author.resize(i + 1, kNoId);
      author_species.resize(i + 1, kNoId);
    }
    return i;
  };

  std::uint64_t idx = 0;
  for (const VoteRecord& v : votes) {
    rows.push_back({ensure_obs(v.obs), intern(user_lookup, user_tokens, v.user),
                    intern_species(v.species), idx++});
  }
  for (const AuthorRecord& a : authorship) {
    const ObsId i = ensure_obs(a.obs);
    author[i] = intern(user_lookup, user_tokens, a.user);
    if (!a.species.empty()) author_species[i] = intern_species(a.species);
  }

  const auto n_users_prelim = static_cast<std::uint32_t>(user_tokens.size());
  const auto n_species_prelim = static_cast<std::uint32_t>(species_tokens.size());
  return finalize(std::move(rows), std::move(author), std::move(author_species),
                  std::move(obs_tokens), std::move(user_tokens), std::move(species_tokens),
                  std::move(obs_lookup), std::move(user_lookup), std::move(species_lookup),
                  n_users_prelim, n_species_prelim,
                  /*remap_species=*/!closed_species, /*keep_unvoted_species=*/false, nullptr);
}

inline VoteTable VoteTable::build_dense(DenseInput in, DensePerms* perms) {
  const std::uint32_t n_obs = static_cast<std::uint32_t>(in.author.size());
  std::uint32_t max_user = 0, max_species = 0;
  for (const Vote& v : in.votes) {
    if (v.obs >= n_obs) throw error(errc::index_error, "vote references an unknown observation");
    max_user = std::max(max_user, v.user);
    max_species = std::max(max_species, v.species);
  }
  for (UserId u : in.author) {
    if (u == kNoId) throw error(errc::missing_author, "unset author entry");
    max_user = std::max(max_user, u);
  }
  if (in.n_species && max_species >= in.n_species)
    throw error(errc::index_error, "species id outside the declared species space");

  std::vector<RowRec> rows;
  rows.reserve(in.votes.size());
  std::uint64_t idx = 0;
  for (const Vote& v : in.votes) rows.push_back({v.obs, v.user, v.species, idx++});

  const std::uint32_t n_species_prelim =
      in.n_species ? in.n_species : (in.votes.empty() ? 0 : max_species + 1);
  return finalize(std::move(rows), std::move(in.author),
                  std::vector<SpeciesId>(n_obs, kNoId), {}, {}, {}, {}, {}, {},
                  in.votes.empty() ? 0 : max_user + 1, n_species_prelim,
                  /*remap_species=*/true, /*keep_unvoted_species=*/in.n_species != 0, perms);
}

inline VoteTable VoteTable::with_appended_user(std::span<const SpeciesId> per_obs_species,
                                               const std::string& token) const {
  if (per_obs_species.size() != n_obs())
    throw error(errc::index_error, "per-observation vote list does not match the table");
  VoteTable t;
  const UserId new_user = n_users_;
  t.n_users_ = n_users_ + 1;
  t.n_species_ = n_species_;
  t.author_ = author_;

  std::uint64_t extra = 0;
  for (SpeciesId s : per_obs_species) {
    if (s != kNoId) {
      if (s >= n_species_) throw error(errc::index_error, "appended vote species out of range");
      ++extra;
    }
  }
  const std::uint32_t n = n_obs();
  t.obs_offsets_.assign(n + 1, 0);
  t.obs_user_.reserve(obs_user_.size() + extra);
  t.obs_species_.reserve(obs_user_.size() + extra);
  for (ObsId i = 0; i < n; ++i) {
    for (std::uint64_t v = obs_offsets_[i]; v < obs_offsets_[i + 1]; ++v) {
      t.obs_user_.push_back(obs_user_[v]);
      t.obs_species_.push_back(obs_species_[v]);
    }
    if (per_obs_species[i] != kNoId) {
      t.obs_user_.push_back(new_user);  // largest id: keeps ascending order
      t.obs_species_.push_back(per_obs_species[i]);
    }
    t.obs_offsets_[i + 1] = t.obs_user_.size();
  }

  if (!user_tokens_.empty()) {
    t.user_tokens_ = user_tokens_;
    t.user_lookup_ = user_lookup_;
    std::string tok = token;
    while (t.user_lookup_.count(tok)) tok += "'";  // dodge collisions with real tokens
    t.user_tokens_.push_back(tok);
    t.user_lookup_.emplace(tok, new_user);
  }
  t.obs_tokens_ = obs_tokens_;
  t.obs_lookup_ = obs_lookup_;
  t.species_tokens_ = species_tokens_;
  t.species_lookup_ = species_lookup_;

  t.build_user_view();
  return t;
}

// Votes on one observation as (user, species) pairs in ascending user order.
inline std::vector<std::pair<UserId, SpeciesId>> voter_set(const VoteTable& t, ObsId i) {
  if (i >= t.n_obs()) throw error(errc::index_error, "observation id out of range");
  auto users = t.voters(i);
  auto species = t.votes_on(i);
  std::vector<std::pair<UserId, SpeciesId>> out;
  out.reserve(users.size());
  for (std::size_t v = 0; v < users.size(); ++v) out.emplace_back(users[v], species[v]);
  return out;
}

// Token-level equality: same dimensions, same vote multiset, same author map.
// Intended for round-trip tests, not hot paths.
inline bool same_content(const VoteTable& a, const VoteTable& b) {
  if (a.n_obs() != b.n_obs() || a.n_users() != b.n_users() ||
      a.n_species() != b.n_species() || a.n_votes() != b.n_votes())
    return false;
  using Triple = std::array<std::string, 3>;
  auto triples = [](const VoteTable& t) {
    std::vector<Triple> out;
    out.reserve(t.n_votes());
    for (ObsId i = 0; i < t.n_obs(); ++i) {
      auto users = t.voters(i);
      auto species = t.votes_on(i);
      for (std::size_t v = 0; v < users.size(); ++v)
        out.push_back({t.obs_token(i), t.user_token(users[v]), t.species_token(species[v])});
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto authors = [](const VoteTable& t) {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(t.n_obs());
    for (ObsId i = 0; i < t.n_obs(); ++i)
      out.emplace_back(t.obs_token(i), t.user_token(t.author(i)));
    std::sort(out.begin(), out.end());
    return out;
  };
  return triples(a) == triples(b) && authors(a) == authors(b);
}

inline VoteTable build_vote_table(std::span<const VoteRecord> votes,
                                  std::span<const AuthorRecord> authorship,
                                  std::span<const std::string> species_dictionary = {}) {
  return VoteTable::build(votes, authorship, species_dictionary);
}

}  // namespace consensus
