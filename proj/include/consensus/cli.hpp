#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "CLI11.hpp"

#include "consensus/ai.hpp"
#include "consensus/baselines.hpp"
#include "consensus/errors.hpp"
#include "consensus/evaluation.hpp"
#include "consensus/io.hpp"
#include "consensus/plantnet.hpp"
#include "consensus/synth.hpp"

namespace consensus::cli {

namespace detail {

struct AggregateOpts {
  std::string votes, observations, species, ai_predictions;
  std::string strategy = "plantnet";
  std::string ai = "none";
  double ai_weight = 1.70;
  double theta_score = 0.7;
  StrategyConfig cfg;
  std::string out;
  std::string export_observations;

  // evaluate extras
  std::string experts;
  std::string subset = "expert";
  std::string macro_domain = "subset";
  int bins = 10;
};

inline void add_config_flags(CLI::App* sub, AggregateOpts& o) {
  sub->add_option("--votes", o.votes, "votes csv (obs_id,user_id,species_id)")->required();
  sub->add_option("--observations", o.observations, "authorship csv (obs_id,author_user_id)")
      ->required();
  sub->add_option("--species", o.species, "closed species dictionary csv (optional)");
  sub->add_option("--ai-predictions", o.ai_predictions, "model top-1 csv (obs_id,species_id,score)");
  sub->add_option("--strategy", o.strategy, "aggregation strategy")
      ->check(CLI::IsMember({"mv", "wawa", "twothird", "plantnet"}))
      ->capture_default_str();
  sub->add_option("--ai", o.ai, "how the model vote enters the plantnet strategy")
      ->check(CLI::IsMember({"none", "as-user", "fixed", "invalidating", "confident"}))
      ->capture_default_str();
  sub->add_option("--ai-weight", o.ai_weight, "fixed model vote weight")->capture_default_str();
  sub->add_option("--theta-score", o.theta_score, "confidence gate for --ai confident")
      ->capture_default_str();
  sub->add_option("--theta-acc", o.cfg.theta_acc, "accuracy-ratio validity threshold")
      ->capture_default_str();
  sub->add_option("--theta-conf", o.cfg.theta_conf, "confidence validity threshold")
      ->capture_default_str();
  sub->add_option("--alpha", o.cfg.alpha, "trust curve exponent (reward)")->capture_default_str();
  sub->add_option("--beta", o.cfg.beta, "trust curve exponent (penalty)")->capture_default_str();
  sub->add_option("--gamma", o.cfg.gamma, "newcomer weight")->capture_default_str();
  sub->add_option("--vote-discount", o.cfg.vote_discount, "weight of non-author identifications")
      ->capture_default_str();
  sub->add_option("--seed", o.cfg.seed, "tie-breaking seed")->capture_default_str();
  sub->add_option("--max-iters", o.cfg.max_iterations, "iteration cap")->capture_default_str();
  sub->add_option("--out", o.out, "write the run report (json) here instead of stdout");
  sub->add_option("--export-observations", o.export_observations,
                  "write per-observation label/confidence/accuracy/valid csv");
}

inline AiModeKind ai_kind(const std::string& name) {
  if (name == "as-user") return AiModeKind::AsUser;
  if (name == "fixed") return AiModeKind::FixedWeight;
  if (name == "invalidating") return AiModeKind::Invalidating;
  if (name == "confident") return AiModeKind::Confident;
  return AiModeKind::None;
}

inline AggregationResult run_strategy(const VoteTable& t, const io::Dataset& d,
                                      const AggregateOpts& o) {
  o.cfg.validate();
  if (o.strategy == "mv") {
    if (o.ai != "none") throw error(errc::invalid_config, "--ai requires --strategy plantnet");
    return aggregate_mv(t, o.cfg.seed);
  }
  if (o.strategy == "wawa") {
    if (o.ai != "none") throw error(errc::invalid_config, "--ai requires --strategy plantnet");
    return aggregate_wawa(t, o.cfg.seed);
  }
  if (o.strategy == "twothird") {
    if (o.ai != "none") throw error(errc::invalid_config, "--ai requires --strategy plantnet");
    return aggregate_twothird(t, o.cfg.seed);
  }
  if (o.ai == "none") return run_plantnet(t, o.cfg);
  if (!d.ai)
    throw error(errc::invalid_config, "--ai " + o.ai + " needs --ai-predictions");
  AiMode mode{ai_kind(o.ai), o.ai_weight, o.theta_score};
  return run_with_ai(t, *d.ai, mode, o.cfg);
}

inline io::RunInfo run_info(const AggregateOpts& o) {
  io::RunInfo info;
  info.strategy = o.strategy;
  info.ai_mode = o.strategy == "plantnet" ? o.ai : "none";
  info.ai_weight = o.ai_weight;
  info.theta_score = o.theta_score;
  info.config = o.cfg;
  return info;
}

inline void warn_if_not_converged(const AggregationResult& r) {
  if (!r.converged)
    std::cerr << "warning: no fixed point after " << r.iterations_run
              << " iterations; reporting the last state\n";
}

inline void emit(const nlohmann::json& doc, const std::string& out) {
  if (out.empty())
    std::cout << doc.dump(2) << '\n';
  else
    io::write_report_json(doc, out);
}

inline int cmd_aggregate(const AggregateOpts& o) {
  io::Dataset d = io::load_dataset(
      {o.votes, o.observations, o.ai_predictions, /*experts=*/"", o.species});
  AggregationResult res = run_strategy(d.table, d, o);
  warn_if_not_converged(res);
  emit(io::report_to_json(res, run_info(o)), o.out);
  if (!o.export_observations.empty())
    io::write_observation_export(d.table, res, o.export_observations);
  return 0;
}

inline int cmd_evaluate(const AggregateOpts& o) {
  io::Dataset d = io::load_dataset(
      {o.votes, o.observations, o.ai_predictions, o.experts, o.species});
  AggregationResult res = run_strategy(d.table, d, o);
  warn_if_not_converged(res);

  EvalSubsets subsets = build_subsets(d.table, *d.experts);
  const EvalSubset& subset = o.subset == "multiple"      ? subsets.multiple_votes
                             : o.subset == "disagreement" ? subsets.disagreement
                                                          : subsets.expert;
  const MacroDomain domain =
      o.macro_domain == "all" ? MacroDomain::All : MacroDomain::Subset;
  const AiPredictionSet* ai = d.ai ? &*d.ai : nullptr;
  EvaluationReport rep = evaluate_on_subset(res, subsets.truth, subset, d.table.n_species(),
                                            domain, ai, o.bins);
  emit(io::report_to_json(res, run_info(o), &rep), o.out);
  if (!o.export_observations.empty())
    io::write_observation_export(d.table, res, o.export_observations);
  return 0;
}

struct SynthOpts {
  SynthConfig cfg;
  std::string out_dir;
};

inline int cmd_synth(const SynthOpts& o) {
  SynthDataset d = generate_synthetic(o.cfg);
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) throw error(errc::write_error, "cannot create '" + o.out_dir + "': " + ec.message());
  const auto p = [&](const char* name) { return (std::filesystem::path(o.out_dir) / name).string(); };
  io::write_votes_csv(d.table, p("votes.csv"));
  io::write_observations_csv(d.table, p("observations.csv"));
  io::write_species_dictionary(d.table, p("species.csv"));
  io::write_experts_csv(d.table, d.experts, p("experts.csv"));
  io::write_truth_csv(d.table, d.truth, p("truth.csv"));
  std::cout << "wrote " << d.table.n_obs() << " observations, " << d.table.n_votes()
            << " votes, " << d.table.n_users() << " users, " << d.table.n_species()
            << " species to " << o.out_dir << '\n';
  return 0;
}

struct BenchOpts {
  AggregateOpts agg;
  int repeat = 1;
};

inline int cmd_bench(const BenchOpts& o) {
  io::Dataset d = io::load_dataset(
      {o.agg.votes, o.agg.observations, o.agg.ai_predictions, "", o.agg.species});
  for (int r = 0; r < o.repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    AggregationResult res = run_strategy(d.table, d, o.agg);
    const auto t1 = std::chrono::steady_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
    std::cout << "strategy=" << o.agg.strategy << " votes=" << d.table.n_votes()
              << " obs=" << d.table.n_obs() << " users=" << d.table.n_users()
              << " iterations=" << res.iterations_run << " converged=" << res.converged
              << " wall_ms=" << ms << '\n';
  }
  return 0;
}

struct ConvertOpts {
  std::string input;
  std::string delimiter = ",";
  std::string obs_col, user_col, species_col;
  std::string author_col;  // flag column marking the author's own vote row
  std::string authors_input, authors_obs_col, authors_user_col;
  std::string out_dir;
};

inline std::vector<std::string> split_on(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      fields.emplace_back(line, start, i - start);
      start = i + 1;
    }
  }
  return fields;
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                                const io::LineReader& r) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw error(errc::parse_error, "no column '" + name + "' in " + r.path(), 1);
}

inline bool truthy(std::string v) {
  for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return v == "1" || v == "true" || v == "t" || v == "yes" || v == "y";
}

// Maps a foreign vote dump (arbitrary column names/positions, optional
// separate authorship table) onto the canonical schemas. The author is taken
// either from a boolean column on the vote rows or from the second input.
inline int cmd_convert(const ConvertOpts& o) {
  if (o.delimiter.size() != 1)
    throw error(errc::invalid_config, "--delimiter must be a single character");
  const char delim = o.delimiter[0];
  const bool flag_mode = !o.author_col.empty();
  const bool table_mode = !o.authors_input.empty();
  if (flag_mode == table_mode)
    throw error(errc::invalid_config,
                "authorship comes from exactly one of --author-col or --authors-input");
  if (table_mode && (o.authors_obs_col.empty() || o.authors_user_col.empty()))
    throw error(errc::invalid_config,
                "--authors-input needs --authors-obs-col and --authors-user-col");

  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) throw error(errc::write_error, "cannot create '" + o.out_dir + "': " + ec.message());
  const auto out = [&](const char* name) {
    return (std::filesystem::path(o.out_dir) / name).string();
  };

  std::vector<std::string> first_seen;  // observation order of appearance
  std::unordered_map<std::string, std::string> author_of;

  // First pass: authorship only. Votes are written on a second pass, once
  // every observation's author is known — an observation that ends up
  // authorless cannot be represented in the output schema, and emitting its
  // votes would leave a file pair that fails to load back.
  {
    io::LineReader r(o.input);
    std::string line;
    if (!r.next(line)) throw error(errc::parse_error, "empty input " + r.path(), 1);
    const auto header = split_on(line, delim);
    const std::size_t c_obs = column_index(header, o.obs_col, r);
    const std::size_t c_user = column_index(header, o.user_col, r);
    column_index(header, o.species_col, r);  // fail on a bad name before writing anything
    const std::size_t c_author =
        flag_mode ? column_index(header, o.author_col, r) : std::size_t(0);

    while (r.next(line)) {
      const auto fields = split_on(line, delim);
      if (fields.size() != header.size())
        throw error(errc::parse_error,
                    "expected " + std::to_string(header.size()) + " fields in " + r.path(),
                    r.row());
      if (author_of.emplace(fields[c_obs], std::string()).second)
        first_seen.push_back(fields[c_obs]);
      if (flag_mode && truthy(fields[c_author])) author_of[fields[c_obs]] = fields[c_user];
    }
  }

  if (table_mode) {
    io::LineReader r(o.authors_input);
    std::string line;
    if (!r.next(line)) throw error(errc::parse_error, "empty input " + r.path(), 1);
    const auto header = split_on(line, delim);
    const std::size_t c_obs = column_index(header, o.authors_obs_col, r);
    const std::size_t c_user = column_index(header, o.authors_user_col, r);
    while (r.next(line)) {
      const auto fields = split_on(line, delim);
      if (fields.size() != header.size())
        throw error(errc::parse_error,
                    "expected " + std::to_string(header.size()) + " fields in " + r.path(),
                    r.row());
      auto it = author_of.find(fields[c_obs]);
      // an authorship row for an observation with no votes at all cannot be
      // represented (the author would have no determination) — leave it out
      if (it != author_of.end()) it->second = fields[c_user];
    }
  }

  std::size_t missing = 0;
  {
    io::FileWriter obs(out("observations.csv"));
    std::string chunk = "obs_id,author_user_id\n";
    for (const std::string& token : first_seen) {
      const std::string& author = author_of[token];
      if (author.empty()) {
        ++missing;
        continue;
      }
      chunk += token;
      chunk += ',';
      chunk += author;
      chunk += '\n';
      if (chunk.size() > (1u << 20)) {
        obs.write(chunk);
        chunk.clear();
      }
    }
    obs.write(chunk);
    obs.close();
  }

  // Second pass: the votes, minus those of dropped observations.
  {
    io::LineReader r(o.input);
    std::string line;
    r.next(line);
    const auto header = split_on(line, delim);
    const std::size_t c_obs = column_index(header, o.obs_col, r);
    const std::size_t c_user = column_index(header, o.user_col, r);
    const std::size_t c_species = column_index(header, o.species_col, r);

    io::FileWriter votes(out("votes.csv"));
    std::string chunk = "obs_id,user_id,species_id\n";
    while (r.next(line)) {
      const auto fields = split_on(line, delim);
      if (fields.size() != header.size())
        throw error(errc::parse_error,
                    "expected " + std::to_string(header.size()) + " fields in " + r.path(),
                    r.row());
      if (author_of.find(fields[c_obs])->second.empty()) continue;
      chunk += fields[c_obs];
      chunk += ',';
      chunk += fields[c_user];
      chunk += ',';
      chunk += fields[c_species];
      chunk += '\n';
      if (chunk.size() > (1u << 20)) {
        votes.write(chunk);
        chunk.clear();
      }
    }
    votes.write(chunk);
    votes.close();
  }

  if (missing > 0)
    std::cerr << "warning: " << missing
              << " observation(s) had no author and were dropped, votes included\n";
  std::cout << "wrote " << (first_seen.size() - missing) << " observations to " << o.out_dir
            << '\n';
  return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  CLI::App app{"crowdsourced species-label aggregation"};
  app.require_subcommand(1);

  detail::AggregateOpts agg;
  CLI::App* c_agg = app.add_subcommand("aggregate", "estimate labels for a vote table");
  detail::add_config_flags(c_agg, agg);

  detail::AggregateOpts eva;
  CLI::App* c_eval = app.add_subcommand("evaluate", "aggregate and score against expert votes");
  detail::add_config_flags(c_eval, eva);
  c_eval->add_option("--experts", eva.experts, "expert user list csv")->required();
  c_eval->add_option("--subset", eva.subset, "evaluation subset")
      ->check(CLI::IsMember({"expert", "multiple", "disagreement"}))
      ->capture_default_str();
  c_eval->add_option("--macro-domain", eva.macro_domain, "species set for macro averages")
      ->check(CLI::IsMember({"subset", "all"}))
      ->capture_default_str();
  c_eval->add_option("--bins", eva.bins, "reliability diagram bin count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  detail::SynthOpts synth;
  CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  c_synth->add_option("--obs", synth.cfg.n_obs, "observations")->capture_default_str();
  c_synth->add_option("--users", synth.cfg.n_users, "users")->capture_default_str();
  c_synth->add_option("--species", synth.cfg.k_species, "species")->capture_default_str();
  c_synth->add_option("--expert-frac", synth.cfg.expert_fraction, "expert share of users")
      ->capture_default_str();
  c_synth->add_option("--average-frac", synth.cfg.average_fraction, "average share of users")
      ->capture_default_str();
  c_synth->add_option("--single-frac", synth.cfg.single_fraction, "single-time share of users")
      ->capture_default_str();
  c_synth->add_option("--expert-noise", synth.cfg.expert_noise, "expert wrong-vote rate")
      ->capture_default_str();
  c_synth->add_option("--average-noise", synth.cfg.average_noise, "average wrong-vote rate")
      ->capture_default_str();
  c_synth->add_option("--single-noise", synth.cfg.single_noise, "single-time wrong-vote rate")
      ->capture_default_str();
  c_synth->add_option("--votes-exponent", synth.cfg.votes_exponent,
                      "votes-per-observation power-law exponent")
      ->capture_default_str();
  c_synth->add_option("--max-votes", synth.cfg.max_votes_per_obs, "votes-per-observation cap")
      ->capture_default_str();
  c_synth->add_option("--seed", synth.cfg.seed, "generator seed")->capture_default_str();
  c_synth->add_option("--out-dir", synth.out_dir, "directory for the csv files")->required();

  detail::BenchOpts bench;
  CLI::App* c_bench = app.add_subcommand("bench", "time the aggregation on a loaded table");
  detail::add_config_flags(c_bench, bench.agg);
  c_bench->add_option("--repeat", bench.repeat, "number of timed runs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  detail::ConvertOpts conv;
  CLI::App* c_conv = app.add_subcommand("convert", "map a foreign vote dump onto the canonical schema");
  c_conv->add_option("--input", conv.input, "delimited vote dump with a header row")->required();
  c_conv->add_option("--delimiter", conv.delimiter, "field separator")->capture_default_str();
  c_conv->add_option("--obs-col", conv.obs_col, "observation id column name")->required();
  c_conv->add_option("--user-col", conv.user_col, "user id column name")->required();
  c_conv->add_option("--species-col", conv.species_col, "species id column name")->required();
  c_conv->add_option("--author-col", conv.author_col,
                     "boolean column marking the author's own vote row");
  c_conv->add_option("--authors-input", conv.authors_input, "separate authorship table");
  c_conv->add_option("--authors-obs-col", conv.authors_obs_col,
                     "observation id column in --authors-input");
  c_conv->add_option("--authors-user-col", conv.authors_user_col,
                     "author user id column in --authors-input");
  c_conv->add_option("--out-dir", conv.out_dir, "directory for votes.csv and observations.csv")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // 0 covers --help and --version
  }

  try {
    if (app.got_subcommand(c_agg)) return detail::cmd_aggregate(agg);
    if (app.got_subcommand(c_eval)) return detail::cmd_evaluate(eva);
    if (app.got_subcommand(c_synth)) return detail::cmd_synth(synth);
    if (app.got_subcommand(c_bench)) return detail::cmd_bench(bench);
    if (app.got_subcommand(c_conv)) return detail::cmd_convert(conv);
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return (e.code() == errc::invalid_config || e.code() == errc::invalid_ai_weight) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace consensus::cli
