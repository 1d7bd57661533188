#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "consensus/errors.hpp"
#include "consensus/evaluation.hpp"
#include "consensus/model.hpp"

namespace consensus::io {

// ---------------------------------------------------------------------------
// Delimited-text plumbing. Files are UTF-8, LF or CRLF, comma-separated, no
// quoting; a field therefore cannot contain a comma. Row numbers in errors are
// 1-based and count the header.
// ---------------------------------------------------------------------------

class LineReader {
 public:
  explicit LineReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw error(errc::parse_error, "cannot open '" + path + "'");
  }

  // Strips a trailing '\r'; returns false at end of file.
  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row_;
    return true;
  }

  std::uint32_t row() const { return row_; }
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::uint32_t row_ = 0;
};

inline void split_fields(const std::string& line, std::size_t n_fields,
                         std::span<std::string> out, const LineReader& r) {
  std::size_t start = 0, field = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      if (field == n_fields)
        throw error(errc::parse_error, "expected " + std::to_string(n_fields) +
                        " fields in " + r.path(), r.row());
      if (i == start)
        throw error(errc::parse_error, "empty field in " + r.path(), r.row());
      out[field++].assign(line, start, i - start);
      start = i + 1;
    }
  }
  if (field != n_fields)
    throw error(errc::parse_error,
                "expected " + std::to_string(n_fields) + " fields in " + r.path(), r.row());
}

inline void expect_header(LineReader& r, const std::string& header) {
  std::string line;
  if (!r.next(line) || line != header)
    throw error(errc::parse_error, "expected header '" + header + "' in " + r.path(),
                r.row() ? r.row() : 1);
}

inline double parse_score(const std::string& field, const LineReader& r) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw error(errc::parse_error, "bad decimal score '" + field + "' in " + r.path(), r.row());
  if (!(value >= 0.0 && value <= 1.0))
    throw error(errc::range_error, "score " + field + " outside [0, 1] in " + r.path(), r.row());
  return value;
}

// ---------------------------------------------------------------------------
// Canonical input schemas.
// ---------------------------------------------------------------------------

inline std::vector<VoteRecord> load_votes_csv(const std::string& path) {
  LineReader r(path);
  expect_header(r, "obs_id,user_id,species_id");
  std::vector<VoteRecord> rows;
  std::string line, f[3];
  while (r.next(line)) {
    split_fields(line, 3, f, r);
    rows.push_back(VoteRecord{std::move(f[0]), std::move(f[1]), std::move(f[2])});
  }
  return rows;
}

inline std::vector<AuthorRecord> load_observations_csv(const std::string& path) {
  LineReader r(path);
  expect_header(r, "obs_id,author_user_id");
  std::vector<AuthorRecord> rows;
  std::string line, f[2];
  while (r.next(line)) {
    split_fields(line, 2, f, r);
    rows.push_back(AuthorRecord{std::move(f[0]), std::move(f[1]), {}});
  }
  return rows;
}

inline std::vector<std::string> load_species_dictionary(const std::string& path) {
  LineReader r(path);
  expect_header(r, "species_id");
  std::vector<std::string> rows;
  std::string line, f[1];
  while (r.next(line)) {
    split_fields(line, 1, f, r);
    rows.push_back(std::move(f[0]));
  }
  return rows;
}

// Rows referencing observations or species the table does not know are
// reference errors; a repeated obs_id keeps the last row, like repeated votes.
inline AiPredictionSet load_ai_csv(const std::string& path, const VoteTable& t) {
  LineReader r(path);
  expect_header(r, "obs_id,species_id,score");
  AiPredictionSet ai(t.n_obs());
  std::string line, f[3];
  while (r.next(line)) {
    split_fields(line, 3, f, r);
    const double score = parse_score(f[2], r);
    auto obs = t.find_obs(f[0]);
    if (!obs) throw error(errc::reference_error, "unknown observation '" + f[0] + "'", r.row());
    auto species = t.find_species(f[1]);
    if (!species) throw error(errc::reference_error, "unknown species '" + f[1] + "'", r.row());
    ai.set(*obs, *species, score);
  }
  return ai;
}

inline std::vector<UserId> load_experts_csv(const std::string& path, const VoteTable& t) {
  LineReader r(path);
  expect_header(r, "user_id");
  std::vector<UserId> experts;
  std::string line, f[1];
  while (r.next(line)) {
    split_fields(line, 1, f, r);
    auto user = t.find_user(f[0]);
    if (!user) throw error(errc::reference_error, "unknown user '" + f[0] + "'", r.row());
    experts.push_back(*user);
  }
  return experts;
}

// Ground-truth file as written by the synthesizer: obs_id,species_id.
inline std::vector<SpeciesId> load_truth_csv(const std::string& path, const VoteTable& t) {
  LineReader r(path);
  expect_header(r, "obs_id,species_id");
  std::vector<SpeciesId> truth(t.n_obs(), kNoId);
  std::string line, f[2];
  while (r.next(line)) {
    split_fields(line, 2, f, r);
    auto obs = t.find_obs(f[0]);
    if (!obs) throw error(errc::reference_error, "unknown observation '" + f[0] + "'", r.row());
    auto species = t.find_species(f[1]);
    if (!species) throw error(errc::reference_error, "unknown species '" + f[1] + "'", r.row());
    truth[*obs] = *species;
  }
  return truth;
}

struct DatasetManifest {
  std::string votes_path;
  std::string observations_path;
  std::string ai_predictions_path;     // "" = absent
  std::string experts_path;            // "" = absent
  std::string species_dictionary_path; // "" = absent
};

struct Dataset {
  VoteTable table;
  std::optional<AiPredictionSet> ai;
  std::optional<std::vector<UserId>> experts;
};

inline Dataset load_dataset(const DatasetManifest& m) {
  std::vector<std::string> dictionary;
  if (!m.species_dictionary_path.empty())
    dictionary = load_species_dictionary(m.species_dictionary_path);
  const auto votes = load_votes_csv(m.votes_path);
  const auto authorship = load_observations_csv(m.observations_path);
  Dataset d{VoteTable::build(votes, authorship, dictionary), std::nullopt, std::nullopt};
  if (!m.ai_predictions_path.empty()) d.ai = load_ai_csv(m.ai_predictions_path, d.table);
  if (!m.experts_path.empty()) d.experts = load_experts_csv(m.experts_path, d.table);
  return d;
}

// ---------------------------------------------------------------------------
// Writers. Everything goes out with LF endings and the exact header the
// loaders expect, so a written table reloads bit-identically.
// ---------------------------------------------------------------------------

class FileWriter {
 public:
  explicit FileWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw error(errc::write_error, "cannot open '" + path + "' for writing");
  }
  void write(const std::string& s) { out_ << s; }
  void close() {
    out_.flush();
    if (!out_) throw error(errc::write_error, "failed writing '" + path_ + "'");
    out_.close();
  }

 private:
  std::ofstream out_;
  std::string path_;
};

// Shortest-width decimal that still round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline void write_votes_csv(const VoteTable& t, const std::string& path) {
  FileWriter w(path);
  std::string chunk = "obs_id,user_id,species_id\n";
  for (ObsId i = 0; i < t.n_obs(); ++i) {
    const auto users = t.voters(i);
    const auto species = t.votes_on(i);
    for (std::size_t v = 0; v < users.size(); ++v) {
      chunk += t.obs_token(i);
      chunk += ',';
      chunk += t.user_token(users[v]);
      chunk += ',';
      chunk += t.species_token(species[v]);
      chunk += '\n';
      if (chunk.size() > (1u << 20)) {
        w.write(chunk);
        chunk.clear();
      }
    }
  }
  w.write(chunk);
  w.close();
}

inline void write_observations_csv(const VoteTable& t, const std::string& path) {
  FileWriter w(path);
  std::string chunk = "obs_id,author_user_id\n";
  for (ObsId i = 0; i < t.n_obs(); ++i) {
    chunk += t.obs_token(i);
    chunk += ',';
    chunk += t.user_token(t.author(i));
    chunk += '\n';
    if (chunk.size() > (1u << 20)) {
      w.write(chunk);
      chunk.clear();
    }
  }
  w.write(chunk);
  w.close();
}

inline void write_species_dictionary(const VoteTable& t, const std::string& path) {
  FileWriter w(path);
  std::string chunk = "species_id\n";
  for (SpeciesId k = 0; k < t.n_species(); ++k) {
    chunk += t.species_token(k);
    chunk += '\n';
  }
  w.write(chunk);
  w.close();
}

inline void write_experts_csv(const VoteTable& t, std::span<const UserId> experts,
                              const std::string& path) {
  FileWriter w(path);
  std::string chunk = "user_id\n";
  for (UserId u : experts) {
    chunk += t.user_token(u);
    chunk += '\n';
  }
  w.write(chunk);
  w.close();
}

inline void write_truth_csv(const VoteTable& t, std::span<const SpeciesId> truth,
                            const std::string& path) {
  FileWriter w(path);
  std::string chunk = "obs_id,species_id\n";
  for (ObsId i = 0; i < truth.size() && i < t.n_obs(); ++i) {
    if (truth[i] == kNoId) continue;
    chunk += t.obs_token(i);
    chunk += ',';
    chunk += t.species_token(truth[i]);
    chunk += '\n';
  }
  w.write(chunk);
  w.close();
}

// Flat per-observation table for downstream plotting: one row per observation.
inline void write_observation_export(const VoteTable& t, const AggregationResult& r,
                                     const std::string& path) {
  if (r.labels.size() != t.n_obs())
    throw error(errc::index_error, "result does not match the table");
  FileWriter w(path);
  std::string chunk = "obs_id,label,confidence,accuracy_ratio,valid\n";
  for (ObsId i = 0; i < t.n_obs(); ++i) {
    chunk += t.obs_token(i);
    chunk += ',';
    chunk += t.species_token(r.labels[i]);
    chunk += ',';
    chunk += format_double(r.confidence[i]);
    chunk += ',';
    chunk += format_double(r.accuracy_ratio[i]);
    chunk += ',';
    chunk += r.valid[i] ? '1' : '0';
    chunk += '\n';
    if (chunk.size() > (1u << 20)) {
      w.write(chunk);
      chunk.clear();
    }
  }
  w.write(chunk);
  w.close();
}

// ---------------------------------------------------------------------------
// Structured run report (JSON).
// ---------------------------------------------------------------------------

struct RunInfo {
  std::string strategy = "plantnet";
  std::string ai_mode = "none";
  double ai_weight = 0.0;    // only meaningful when an AI vote carries weight
  double theta_score = 0.0;  // only meaningful for the confidence-gated mode
  StrategyConfig config;
};

inline nlohmann::json reliability_to_json(const std::vector<ReliabilityBin>& bins) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ReliabilityBin& b : bins) {
    nlohmann::json j{{"low", b.low}, {"high", b.high}, {"count", b.count}};
    // NaN is not representable in JSON; empty bins carry null instead.
    if (b.count > 0) {
      j["mean_prob"] = b.mean_prob;
      j["accuracy"] = b.accuracy;
    } else {
      j["mean_prob"] = nullptr;
      j["accuracy"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

inline nlohmann::json report_to_json(const AggregationResult& r, const RunInfo& info,
                                     const EvaluationReport* eval = nullptr) {
  nlohmann::json doc;
  doc["run"] = {
      {"strategy", info.strategy},
      {"ai_mode", info.ai_mode},
      {"iterations_run", r.iterations_run},
      {"converged", r.converged},
      {"n_obs", r.labels.size()},
      {"n_users", r.user_weights.size()},
      {"valid_count", r.valid_count()},
      {"valid_fraction", valid_fraction(r)},
  };
  if (info.ai_mode != "none") {
    doc["run"]["ai_weight"] = info.ai_weight;
    if (info.ai_mode == "confident") doc["run"]["theta_score"] = info.theta_score;
  }
  doc["config"] = {
      {"theta_acc", info.config.theta_acc},   {"theta_conf", info.config.theta_conf},
      {"alpha", info.config.alpha},           {"beta", info.config.beta},
      {"gamma", info.config.gamma},           {"vote_discount", info.config.vote_discount},
      {"max_iterations", info.config.max_iterations}, {"seed", info.config.seed},
  };
  if (eval) {
    doc["metrics"] = {
        {"subset", subset_name(eval->subset)},
        {"subset_size", eval->subset_size},
        {"macro_domain", eval->macro_domain == MacroDomain::All ? "all" : "subset"},
        {"accuracy", eval->accuracy},
        {"macro_precision", eval->macro_precision},
        {"macro_recall", eval->macro_recall},
        {"valid_fraction", eval->valid_fraction_full},
        {"species_coverage", eval->species_coverage},
    };
    // always present; an empty array means no predictions were supplied
    doc["metrics"]["reliability"] = reliability_to_json(eval->reliability);
  }
  return doc;
}

inline void write_report_json(const nlohmann::json& doc, const std::string& path) {
  FileWriter w(path);
  w.write(doc.dump(2));
  w.write("\n");
  w.close();
}

inline void write_report(const EvaluationReport& report, const AggregationResult& result,
                         const RunInfo& info, const std::string& path) {
  write_report_json(report_to_json(result, info, &report), path);
}

inline void write_report(const AggregationResult& result, const RunInfo& info,
                         const std::string& path) {
  write_report_json(report_to_json(result, info, nullptr), path);
}

}  // namespace consensus::io
