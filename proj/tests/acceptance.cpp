// Release gate. Each numbered check prints exactly one PASS/FAIL/SKIP line;
// the process exits nonzero if anything failed. Runs without a test framework
// so the output stays a plain, greppable checklist.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "consensus/ai.hpp"
#include "consensus/baselines.hpp"
#include "consensus/evaluation.hpp"
#include "consensus/io.hpp"
#include "consensus/model.hpp"
#include "consensus/parallel.hpp"
#include "consensus/plantnet.hpp"
#include "consensus/synth.hpp"
#include "reference_impl.hpp"
#include "test_support.hpp"

namespace {

using namespace consensus;

int failures = 0;

void report(int idx, bool ok, const std::string& what) {
  std::printf("%s  %2d  %s\n", ok ? "PASS" : "FAIL", idx, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void skip(int idx, const std::string& why) {
  std::printf("SKIP  %2d  %s\n", idx, why.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double peak_rss_gib() {
  std::ifstream f("/proc/self/status");
  std::string line;
  while (std::getline(f, line))
    if (line.rfind("VmHWM:", 0) == 0) {
      long kb = 0;
      std::sscanf(line.c_str() + 6, "%ld", &kb);
      return static_cast<double>(kb) / (1024.0 * 1024.0);
    }
  return -1.0;
}

// The trust curve's fixed points, used by several checks below.
const double kGamma = std::log(2.1);
double trust(int n) { return weight_fn(static_cast<double>(n), StrategyConfig{}); }

// --- 1 -----------------------------------------------------------------
// Every production strategy agrees field-for-field with the naive reference
// implementation on a thousand small random instances, quickly.
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  int checked = 0;
  std::optional<std::string> diff;
  std::uint64_t bad_seed = 0;
  for (std::uint64_t seed = 1; seed <= 1000 && !diff; ++seed) {
    support::RandomInstance inst = support::random_instance(seed);
    StrategyConfig cfg;
    cfg.seed = seed % 11;
    ref::Config rcfg = support::to_ref(cfg);
    const std::pair<const char*, std::optional<std::string>> runs[] = {
        {"mv", support::mismatch(aggregate_mv(inst.table, cfg.seed),
                                 ref::mv(inst.ref_in, cfg.seed))},
        {"wawa", support::mismatch(aggregate_wawa(inst.table, cfg.seed),
                                   ref::wawa(inst.ref_in, cfg.seed))},
        {"twothird", support::mismatch(aggregate_twothird(inst.table, cfg.seed),
                                       ref::twothird(inst.ref_in, cfg.seed))},
        {"plantnet", support::mismatch(run_plantnet(inst.table, cfg),
                                       ref::plantnet(inst.ref_in, rcfg))},
    };
    for (const auto& [name, d] : runs)
      if (d && !diff) diff = std::string(name) + ": " + *d, bad_seed = seed;
    ++checked;
  }
  const double secs = seconds_since(t0);
  const bool ok = !diff && checked == 1000 && secs < 30.0;
  std::string what = "reference equivalence on 1000 random instances, 4 strategies (" +
                     fmt("%.1f", secs) + "s)";
  if (diff) what += " — seed " + std::to_string(bad_seed) + ": " + *diff;
  report(1, ok, what);
}

// --- 2 -----------------------------------------------------------------
// A prolific author with two confirmers ends with nine valid observations
// and the trust score of nine distinct authored species, within three rounds.
void criterion_2() {
  std::vector<VoteRecord> votes;
  std::vector<AuthorRecord> authors;
  for (int i = 1; i <= 9; ++i) {
    const std::string o = "o" + std::to_string(i), k = "k" + std::to_string(i);
    votes.push_back({o, "A", k});
    authors.push_back({o, "A", ""});
  }
  for (int i = 1; i <= 8; ++i)
    for (const char* helper : {"C", "D"}) {
      const std::string o = "o" + std::to_string(i), k = "k" + std::to_string(i);
      votes.push_back({o, helper, k});
    }
  VoteTable t = support::table(votes, authors);
  AggregationResult r = run_plantnet(t, StrategyConfig{});
  const double w_a = r.user_weights[*t.find_user("A")];
  const bool ok = r.valid_count() == 9 && std::abs(w_a - trust(9)) <= 1e-9 &&
                  r.iterations_run <= 3 && r.converged;
  report(2, ok,
         "author trust trace: " + std::to_string(r.valid_count()) + "/9 valid, weight " +
             fmt("%.12f", w_a) + " vs f(9)=" + fmt("%.12f", trust(9)) + ", " +
             std::to_string(r.iterations_run) + " iterations");
}

// --- 3 -----------------------------------------------------------------
// The smallest activity count whose trust clears the self-validation
// threshold is exactly eight.
void criterion_3() {
  int first = -1;
  for (int n = 0; n <= 100; ++n)
    if (trust(n) >= StrategyConfig{}.theta_conf) {
      first = n;
      break;
    }
  report(3, first == 8,
         "smallest self-validating activity count = " + std::to_string(first) +
             " (expected 8)");
}

// --- 4 -----------------------------------------------------------------
// The admissible prediction-weight interval is open exactly at
// theta_conf * (1 - theta_acc) / theta_acc and theta_conf.
void criterion_4() {
  const StrategyConfig cfg;
  const double lo = cfg.theta_conf * (1.0 - cfg.theta_acc) / cfg.theta_acc;  // 6/7
  const double hi = cfg.theta_conf;                                          // 2
  const bool ok = !validate_ai_weight(lo - 1e-9, cfg) && validate_ai_weight(lo + 1e-9, cfg) &&
                  validate_ai_weight(hi - 1e-9, cfg) && !validate_ai_weight(hi + 1e-9, cfg) &&
                  !validate_ai_weight(lo, cfg) && !validate_ai_weight(hi, cfg) &&
                  !validate_ai_weight(0.857142, cfg) && validate_ai_weight(0.858, cfg);
  report(4, ok, "prediction-weight bounds are open at (" + fmt("%.9f", lo) + ", 2)");
}

// --- 5 -----------------------------------------------------------------
// Degenerate settings collapse onto simpler strategies, bit for bit:
// a confidence gate of 1 and a prediction weight of 0 reproduce the plain
// run; a constant trust curve of 1 with zeroed thresholds reproduces MV.
void criterion_5() {
  std::optional<std::string> diff;
  for (std::uint64_t seed = 1; seed <= 100 && !diff; ++seed) {
    support::RandomInstance inst = support::random_instance(seed);
    SplitMix rng(seed * 977);
    support::RandomAi ai = support::random_ai(inst.table, rng);
    StrategyConfig cfg;
    cfg.seed = seed % 11;
    const AggregationResult plain = run_plantnet(inst.table, cfg);

    if (ai.set.count() > 0) {
      const AggregationResult gated =
          run_with_ai(inst.table, ai.set, AiMode::confident(1.0), cfg);
      const AggregationResult weightless =
          run_with_ai(inst.table, ai.set, AiMode::fixed_weight(0.0), cfg);
      for (const AggregationResult* r : {&gated, &weightless}) {
        if (auto d = support::mismatch(*r, plain)) diff = "vs plain: " + *d;
        if (r->iterations_run != plain.iterations_run || r->converged != plain.converged)
          diff = "vs plain: iteration trace differs";
      }
    }

    StrategyConfig flat;  // constant curve: alpha == beta, gamma = 1
    flat.alpha = flat.beta = 0.5;
    flat.gamma = 1.0;
    flat.theta_acc = 0.0;
    flat.theta_conf = 0.0;
    flat.seed = cfg.seed;
    const AggregationResult iter_mv = run_plantnet(inst.table, flat);
    const AggregationResult mv = aggregate_mv(inst.table, cfg.seed);
    if (auto d = support::mismatch(iter_mv, mv, /*compare_weights=*/false))
      diff = "flat-curve vs mv: " + *d;
    for (double w : iter_mv.user_weights)
      if (w != 1.0) diff = "flat-curve weight != 1";
    if (diff) diff = "seed " + std::to_string(seed) + " " + *diff;
  }
  report(5, !diff,
         diff ? "degenerate-settings equivalences — " + *diff
              : "degenerate settings collapse to plain/MV, bitwise, 100 instances");
}

// --- 6 -----------------------------------------------------------------
// Invalidation mode can only re-score: labels (and weights) never move, and
// a dissenting prediction can flip a borderline observation to invalid.
void criterion_6() {
  std::optional<std::string> diff;
  for (std::uint64_t seed = 1; seed <= 100 && !diff; ++seed) {
    support::RandomInstance inst = support::random_instance(seed);
    SplitMix rng(seed * 1543);
    support::RandomAi ai = support::random_ai(inst.table, rng);
    if (ai.set.count() == 0) continue;
    StrategyConfig cfg;
    cfg.seed = seed % 11;
    const AggregationResult plain = run_plantnet(inst.table, cfg);
    const AggregationResult fused =
        run_with_ai(inst.table, ai.set, AiMode::invalidating(1.70), cfg);
    if (fused.labels != plain.labels) diff = "labels moved";
    if (fused.user_weights != plain.user_weights) diff = "weights moved";
    if (fused.iterations_run != plain.iterations_run) diff = "iteration count moved";
    if (diff) diff = "seed " + std::to_string(seed) + ": " + *diff;
  }

  // Two trusted voters at weight 1.95 agree; 3.9 >= 2 is valid on its own,
  // but a 1.70-weight dissent drags the ratio to 3.9/5.6 < 0.7.
  bool flip_ok = false;
  {
    const std::vector<std::pair<UserId, SpeciesId>> votes = {{0, 0}, {1, 0}};
    const std::vector<double> weights = {1.95, 1.95};
    const StrategyConfig cfg;
    const ObservationScore plain =
        score_observation_with_ai(votes, weights, 0, kNoId, 0.0, cfg);
    const ObservationScore fused = score_observation_with_ai(votes, weights, 0, 1, 1.70, cfg);
    flip_ok = plain.valid && !fused.valid && fused.confidence == plain.confidence &&
              fused.accuracy_ratio == 3.9 / 5.6;
  }
  report(6, !diff && flip_ok,
         diff ? "invalidation-only contract — " + *diff
              : std::string("invalidation never moves labels; dissent flips 3.9/5.6 ") +
                    (flip_ok ? "to invalid" : "FAILED to flip"));
}

// --- 7 -----------------------------------------------------------------
// The worker count is a throughput knob only: reports and exports come out
// byte-identical for 1, 2, and 8 workers.
void criterion_7() {
  SynthConfig sc;
  sc.n_obs = 2000;
  sc.n_users = 150;
  sc.k_species = 25;
  sc.seed = 99;
  SynthDataset d = generate_synthetic(sc);
  support::TempDir dir;

  std::vector<std::string> outputs;
  for (int workers : {1, 2, 8}) {
    par::set_max_threads(workers);
    const AggregationResult r = run_plantnet(d.table, StrategyConfig{});
    const EvalSubsets subsets = build_subsets(d.table, d.experts);
    const EvaluationReport rep = evaluate_on_subset(r, subsets.truth, subsets.expert,
                                                    d.table.n_species(), MacroDomain::Subset);
    const std::string tag = std::to_string(workers);
    io::write_report(rep, r, io::RunInfo{}, dir.file("report-" + tag + ".json"));
    io::write_observation_export(d.table, r, dir.file("export-" + tag + ".csv"));
    outputs.push_back(support::read_file(dir.file("report-" + tag + ".json")) + '\0' +
                      support::read_file(dir.file("export-" + tag + ".csv")));
  }
  par::set_max_threads(0);
  const bool ok = outputs[0] == outputs[1] && outputs[0] == outputs[2];
  report(7, ok, "reports byte-identical across 1/2/8 workers");
}

// --- 8 -----------------------------------------------------------------
// Scale: ten million votes from 800k+ users over 10k species converge
// within ten iterations, five minutes, and 4 GiB.
void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.n_obs = 4'300'000;
  sc.n_users = 830'000;
  sc.k_species = 10'000;
  sc.seed = 2024;
  SynthDataset d = generate_synthetic(sc);

  StrategyConfig cfg;
  cfg.max_iterations = 10;
  const AggregationResult r = run_plantnet(d.table, cfg);
  const double secs = seconds_since(t0);
  const double peak = peak_rss_gib();

  const bool scale_ok = d.table.n_votes() >= 10'000'000 && d.table.n_users() >= 800'000 &&
                        d.table.n_species() == 10'000;
  // A time/memory budget for the capped run; convergence is reported but not
  // demanded at this scale.
  const bool ok = scale_ok && r.iterations_run <= 10 && secs < 300.0 && peak >= 0.0 &&
                  peak < 4.0;
  report(8, ok,
         std::to_string(d.table.n_votes()) + " votes, " + std::to_string(d.table.n_users()) +
             " users, " + std::to_string(d.table.n_species()) + " species: " +
             std::to_string(r.iterations_run) + " iterations, converged=" +
             (r.converged ? "yes" : "no") + ", " + fmt("%.0f", secs) + "s, peak " +
             fmt("%.2f", peak) + " GiB");
}

// --- 9 -----------------------------------------------------------------
// Optional: reproduce the reference numbers on the real, converted archive.
void criterion_9() {
  const char* dir = std::getenv("CONSENSUS_SWE_DIR");
  if (!dir || !*dir) {
    skip(9, "full-archive reproduction (set CONSENSUS_SWE_DIR to a converted archive)");
    return;
  }
  const std::string base(dir);
  io::Dataset d = io::load_dataset({base + "/votes.csv", base + "/observations.csv", "",
                                    base + "/experts.csv", ""});
  if (!d.experts) {
    report(9, false, "archive at " + base + " has no experts.csv");
    return;
  }
  const EvalSubsets subsets = build_subsets(d.table, *d.experts);

  struct Row {
    const char* name;
    AggregationResult result;
    double accuracy, coverage;
  };
  std::vector<Row> rows;
  rows.push_back({"mv", aggregate_mv(d.table), 0.97, 0.71});
  rows.push_back({"wawa", aggregate_wawa(d.table), 0.98, 0.73});
  rows.push_back({"twothird", aggregate_twothird(d.table), 0.60, 0.41});
  rows.push_back({"plantnet", run_plantnet(d.table, StrategyConfig{}), 0.99, 0.90});

  std::string detail;
  bool ok = subsets.expert.members.size() == 26811 &&
            subsets.multiple_votes.members.size() == 17125 &&
            subsets.disagreement.members.size() == 1263;
  if (!ok)
    detail = "subset sizes " + std::to_string(subsets.expert.members.size()) + "/" +
             std::to_string(subsets.multiple_votes.members.size()) + "/" +
             std::to_string(subsets.disagreement.members.size()) +
             " != 26811/17125/1263";
  for (const Row& row : rows) {
    const double acc = label_accuracy(row.result, subsets.truth, subsets.expert);
    const double cov = species_coverage(row.result, subsets.truth, subsets.disagreement);
    if (std::abs(acc - row.accuracy) > 0.01 || std::abs(cov - row.coverage) > 0.02) {
      ok = false;
      detail += std::string(detail.empty() ? "" : "; ") + row.name + " acc " +
                fmt("%.4f", acc) + " cov " + fmt("%.4f", cov);
    }
  }
  const double vf = valid_fraction(rows[2].result);
  if (std::abs(vf - 0.2343) > 0.005) {
    ok = false;
    detail += std::string(detail.empty() ? "" : "; ") + "twothird valid fraction " +
              fmt("%.4f", vf);
  }
  report(9, ok,
         ok ? "reference numbers reproduced on the converted archive"
            : "archive reproduction — " + detail);
}

// --- 10 ----------------------------------------------------------------
// Calibration: on well-calibrated Bernoulli draws, every reliability bin's
// accuracy lands within 0.02 of its mean score.
void criterion_10() {
  SplitMix rng(20250819);
  std::vector<std::pair<double, bool>> draws;
  draws.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    const double p = rng.uniform();
    draws.emplace_back(p, rng.uniform() < p);
  }
  double worst = 0.0;
  bool all_filled = true;
  for (const ReliabilityBin& bin : reliability_bins(draws, 10)) {
    if (bin.count == 0) all_filled = false;
    worst = std::max(worst, std::abs(bin.accuracy - bin.mean_prob));
  }
  report(10, all_filled && worst < 0.02,
         "reliability bins track Bernoulli truth (worst gap " + fmt("%.4f", worst) + ")");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
