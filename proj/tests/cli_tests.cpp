// End-to-end runs of the command-line driver, in process. Reports and exports
// always go through --out/--export-observations files; stdout/stderr are
// captured only to check messages, never parsed for data.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "consensus/cli.hpp"
#include "consensus/parallel.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace {

struct CliOutput {
  int code = 0;
  std::string out, err;
};

CliOutput run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("consensus");
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  std::streambuf* old_out = std::cout.rdbuf(out.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(err.rdbuf());
  CliOutput r;
  r.code = consensus::cli::run(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

nlohmann::json report_at(const std::string& path) {
  return nlohmann::json::parse(support::read_file(path));
}

// One observation, three voters, strict 2:1 majority for species a.
void write_majority_fixture(const support::TempDir& dir) {
  support::write_file(dir.file("votes.csv"),
                      "obs_id,user_id,species_id\n"
                      "o1,u1,a\n"
                      "o1,u2,a\n"
                      "o1,u3,b\n");
  support::write_file(dir.file("observations.csv"),
                      "obs_id,author_user_id\n"
                      "o1,u1\n");
}

// An author with nine determinations, eight of them confirmed by two other
// users. Trust grows over three rounds, so a cap of one leaves it unsettled.
void write_growing_trust_fixture(const support::TempDir& dir) {
  std::string votes = "obs_id,user_id,species_id\n";
  std::string obs = "obs_id,author_user_id\n";
  for (int i = 1; i <= 9; ++i) {
    votes += "o" + std::to_string(i) + ",A,k" + std::to_string(i) + "\n";
    obs += "o" + std::to_string(i) + ",A\n";
  }
  for (int i = 1; i <= 8; ++i)
    for (const char* helper : {"C", "D"})
      votes += "o" + std::to_string(i) + "," + helper + ",k" + std::to_string(i) + "\n";
  support::write_file(dir.file("votes.csv"), votes);
  support::write_file(dir.file("observations.csv"), obs);
}

}  // namespace

TEST_CASE("aggregate writes a report and a per-observation export") {
  support::TempDir dir;
  write_majority_fixture(dir);
  const std::string rep = dir.file("report.json");
  const std::string exp = dir.file("export.csv");

  CliOutput r = run_cli({"aggregate", "--votes", dir.file("votes.csv"), "--observations",
                         dir.file("observations.csv"), "--strategy", "mv", "--out", rep,
                         "--export-observations", exp});
  CHECK(r.code == 0);
  CHECK(r.out.empty());  // the report went to the file

  const std::string exported = support::read_file(exp);
  CHECK(exported.rfind("obs_id,label,confidence,accuracy_ratio,valid\no1,a,2,", 0) == 0);
  CHECK(exported.find(",1\n") != std::string::npos);

  nlohmann::json doc = report_at(rep);
  CHECK(doc["run"]["strategy"] == "mv");
  CHECK(doc["run"]["ai_mode"] == "none");
  CHECK(doc["run"]["n_obs"] == 1);
  CHECK(doc["run"]["n_users"] == 3);
  CHECK(doc["run"]["valid_count"] == 1);
  CHECK(doc["run"]["iterations_run"] == 1);
  CHECK(doc["run"]["converged"] == true);
  CHECK(!doc["run"].contains("ai_weight"));
  CHECK(!doc.contains("metrics"));
}

TEST_CASE("the report goes to stdout when --out is omitted") {
  support::TempDir dir;
  write_majority_fixture(dir);
  CliOutput r = run_cli({"aggregate", "--votes", dir.file("votes.csv"), "--observations",
                         dir.file("observations.csv"), "--strategy", "mv"});
  REQUIRE(r.code == 0);
  nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc["run"]["strategy"] == "mv");
}

TEST_CASE("defaults echo into the report's config block") {
  support::TempDir dir;
  write_majority_fixture(dir);
  const std::string rep = dir.file("report.json");
  REQUIRE(run_cli({"aggregate", "--votes", dir.file("votes.csv"), "--observations",
                   dir.file("observations.csv"), "--out", rep})
              .code == 0);
  nlohmann::json cfg = report_at(rep)["config"];
  CHECK(cfg["gamma"].get<double>() == std::log(2.1));
  CHECK(cfg["theta_acc"].get<double>() == 0.7);
  CHECK(cfg["theta_conf"].get<double>() == 2.0);
  CHECK(cfg["alpha"].get<double>() == 0.5);
  CHECK(cfg["beta"].get<double>() == 0.2);
  CHECK(cfg["vote_discount"].get<double>() == 0.1);
  CHECK(cfg["max_iterations"].get<int>() == 50);
  CHECK(cfg["seed"].get<std::uint64_t>() == 0);
}

TEST_CASE("the same seed produces byte-identical outputs") {
  support::TempDir dir;
  write_growing_trust_fixture(dir);
  const auto once = [&](const char* tag) {
    const std::string rep = dir.file(std::string("rep-") + tag + ".json");
    const std::string exp = dir.file(std::string("exp-") + tag + ".csv");
    REQUIRE(run_cli({"aggregate", "--votes", dir.file("votes.csv"), "--observations",
                     dir.file("observations.csv"), "--strategy", "plantnet", "--seed", "7",
                     "--out", rep, "--export-observations", exp})
                .code == 0);
    return support::read_file(rep) + '\0' + support::read_file(exp);
  };
  CHECK(once("first") == once("second"));
}

TEST_CASE("usage problems exit with 1") {
  support::TempDir dir;
  write_majority_fixture(dir);
  const std::string votes = dir.file("votes.csv");
  const std::string obs = dir.file("observations.csv");

  SECTION("no subcommand") { CHECK(run_cli({}).code == 1); }
  SECTION("unknown strategy name") {
    CHECK(run_cli({"aggregate", "--votes", votes, "--observations", obs, "--strategy",
                   "bogus"})
              .code == 1);
  }
  SECTION("missing a required flag") {
    CHECK(run_cli({"aggregate", "--observations", obs}).code == 1);
    CHECK(run_cli({"evaluate", "--votes", votes, "--observations", obs}).code == 1);
  }
  SECTION("prediction fusion needs the iterative strategy") {
    CliOutput r = run_cli({"aggregate", "--votes", votes, "--observations", obs, "--strategy",
                           "mv", "--ai", "fixed"});
    CHECK(r.code == 1);
    CHECK(r.err.find("plantnet") != std::string::npos);
  }
  SECTION("fusion without a prediction file") {
    CHECK(run_cli({"aggregate", "--votes", votes, "--observations", obs, "--strategy",
                   "plantnet", "--ai", "fixed"})
              .code == 1);
  }
  SECTION("out-of-range configuration") {
    CHECK(run_cli({"aggregate", "--votes", votes, "--observations", obs, "--theta-acc", "0"})
              .code == 1);
  }
  SECTION("inadmissible prediction weight") {
    support::write_file(dir.file("ai.csv"), "obs_id,species_id,score\no1,a,0.9\n");
    CHECK(run_cli({"aggregate", "--votes", votes, "--observations", obs, "--strategy",
                   "plantnet", "--ai", "fixed", "--ai-predictions", dir.file("ai.csv"),
                   "--ai-weight", "2.5"})
              .code == 1);
  }
}

TEST_CASE("data problems exit with 2") {
  support::TempDir dir;
  write_majority_fixture(dir);
  const std::string votes = dir.file("votes.csv");
  const std::string obs = dir.file("observations.csv");

  SECTION("missing votes file") {
    CHECK(run_cli({"aggregate", "--votes", dir.file("nope.csv"), "--observations", obs})
              .code == 2);
  }
  SECTION("prediction score out of range") {
    support::write_file(dir.file("ai.csv"), "obs_id,species_id,score\no1,a,1.3\n");
    CHECK(run_cli({"aggregate", "--votes", votes, "--observations", obs, "--strategy",
                   "plantnet", "--ai", "fixed", "--ai-predictions", dir.file("ai.csv")})
              .code == 2);
  }
  SECTION("expert list names an unknown user") {
    support::write_file(dir.file("experts.csv"), "user_id\nghost\n");
    CHECK(run_cli({"evaluate", "--votes", votes, "--observations", obs, "--experts",
                   dir.file("experts.csv")})
              .code == 2);
  }
}

TEST_CASE("--help succeeds and lists the subcommands") {
  CliOutput r = run_cli({"--help"});
  CHECK(r.code == 0);
  for (const char* name : {"aggregate", "evaluate", "synth", "bench", "convert"})
    CHECK(r.out.find(name) != std::string::npos);
}

TEST_CASE("a tight iteration cap is reported, not hidden") {
  support::TempDir dir;
  write_growing_trust_fixture(dir);
  const std::string rep = dir.file("report.json");
  CliOutput r = run_cli({"aggregate", "--votes", dir.file("votes.csv"), "--observations",
                         dir.file("observations.csv"), "--strategy", "plantnet", "--max-iters",
                         "1", "--out", rep});
  CHECK(r.code == 0);
  CHECK(r.err.find("no fixed point") != std::string::npos);
  nlohmann::json doc = report_at(rep);
  CHECK(doc["run"]["converged"] == false);
  CHECK(doc["run"]["iterations_run"] == 1);
}

TEST_CASE("synth, aggregate, evaluate run as a pipeline") {
  support::TempDir dir;
  const std::string data = dir.file("data");
  CliOutput s = run_cli({"synth", "--obs", "120", "--users", "25", "--species", "8",
                         "--expert-frac", "0.2", "--average-frac", "0.5", "--single-frac",
                         "0.3", "--seed", "5", "--out-dir", data});
  REQUIRE(s.code == 0);
  CHECK(s.out.find("wrote 120 observations") != std::string::npos);
  for (const char* name :
       {"votes.csv", "observations.csv", "species.csv", "experts.csv", "truth.csv"})
    CHECK(std::filesystem::exists(std::filesystem::path(data) / name));

  const std::vector<std::string> base = {
      "--votes",   data + "/votes.csv", "--observations", data + "/observations.csv",
      "--species", data + "/species.csv"};

  std::vector<std::string> agg = {"aggregate", "--strategy", "plantnet", "--out",
                                  dir.file("agg.json")};
  agg.insert(agg.end(), base.begin(), base.end());
  REQUIRE(run_cli(agg).code == 0);

  std::vector<std::string> eval = {"evaluate",       "--strategy",  "plantnet",
                                   "--experts",      data + "/experts.csv",
                                   "--subset",       "expert",
                                   "--macro-domain", "all",
                                   "--bins",         "5",
                                   "--out",          dir.file("eval.json")};
  eval.insert(eval.end(), base.begin(), base.end());
  REQUIRE(run_cli(eval).code == 0);

  nlohmann::json metrics = report_at(dir.file("eval.json"))["metrics"];
  CHECK(metrics["subset"] == "expert");
  CHECK(metrics["macro_domain"] == "all");
  CHECK(metrics["subset_size"].get<int>() > 0);
  const double acc = metrics["accuracy"].get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(metrics["reliability"].is_array());
  CHECK(metrics["reliability"].empty());  // no prediction file was given

  for (const char* subset : {"multiple", "disagreement"}) {
    std::vector<std::string> again = {"evaluate", "--experts", data + "/experts.csv",
                                      "--subset", subset};
    again.insert(again.end(), base.begin(), base.end());
    CliOutput r = run_cli(again);
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["metrics"]["subset"] == subset);
  }
}

TEST_CASE("convert maps a foreign dump with an author flag column") {
  support::TempDir dir;
  // Semicolon-separated, foreign column names, mixed truthy spellings, and
  // one observation (p3) whose rows never mark an author.
  support::write_file(dir.file("dump.csv"),
                      "who;name;mine;photo\n"
                      "alice;rosa;Yes;p1\n"
                      "bob;quercus;no;p1\n"
                      "bob;acer;1;p2\n"
                      "carol;fagus;;p3\n");
  const std::string out = dir.file("converted");
  CliOutput r = run_cli({"convert", "--input", dir.file("dump.csv"), "--delimiter", ";",
                         "--obs-col", "photo", "--user-col", "who", "--species-col", "name",
                         "--author-col", "mine", "--out-dir", out});
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote 2 observations") != std::string::npos);
  CHECK(r.err.find("1 observation(s) had no author") != std::string::npos);

  CHECK(support::read_file(out + "/observations.csv") ==
        "obs_id,author_user_id\np1,alice\np2,bob\n");
  // p3's vote is dropped with the observation — the pair must load back.
  CHECK(support::read_file(out + "/votes.csv") ==
        "obs_id,user_id,species_id\np1,alice,rosa\np1,bob,quercus\np2,bob,acer\n");
  CHECK(run_cli({"aggregate", "--votes", out + "/votes.csv", "--observations",
                 out + "/observations.csv", "--strategy", "mv"})
            .code == 0);
}

TEST_CASE("convert takes authorship from a separate table") {
  support::TempDir dir;
  support::write_file(dir.file("dump.csv"),
                      "photo,who,name\n"
                      "p1,alice,rosa\n"
                      "p1,bob,rosa\n"
                      "p2,bob,acer\n");
  // p9 has an authorship row but no votes; it cannot be represented.
  support::write_file(dir.file("owners.csv"),
                      "picture,owner\n"
                      "p1,alice\n"
                      "p2,bob\n"
                      "p9,zoe\n");
  const std::string out = dir.file("converted");
  CliOutput r = run_cli({"convert", "--input", dir.file("dump.csv"), "--obs-col", "photo",
                         "--user-col", "who", "--species-col", "name", "--authors-input",
                         dir.file("owners.csv"), "--authors-obs-col", "picture",
                         "--authors-user-col", "owner", "--out-dir", out});
  CHECK(r.code == 0);
  CHECK(support::read_file(out + "/observations.csv") ==
        "obs_id,author_user_id\np1,alice\np2,bob\n");
  CHECK(run_cli({"aggregate", "--votes", out + "/votes.csv", "--observations",
                 out + "/observations.csv"})
            .code == 0);
}

TEST_CASE("convert rejects ambiguous or malformed setups") {
  support::TempDir dir;
  support::write_file(dir.file("dump.csv"), "photo,who,name,mine\np1,alice,rosa,1\n");
  support::write_file(dir.file("owners.csv"), "picture,owner\np1,alice\n");
  const std::vector<std::string> cols = {"--obs-col", "photo", "--user-col", "who",
                                         "--species-col", "name"};
  const auto convert = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = {"convert", "--input", dir.file("dump.csv"), "--out-dir",
                                     dir.file("out")};
    args.insert(args.end(), cols.begin(), cols.end());
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args).code;
  };

  // both authorship sources, neither, a half-specified table, a two-character
  // delimiter: usage errors. A wrong column name is a data error.
  CHECK(convert({"--author-col", "mine", "--authors-input", dir.file("owners.csv"),
                 "--authors-obs-col", "picture", "--authors-user-col", "owner"}) == 1);
  CHECK(convert({}) == 1);
  CHECK(convert({"--authors-input", dir.file("owners.csv")}) == 1);
  CHECK(convert({"--author-col", "mine", "--delimiter", "ab"}) == 1);
  CHECK(convert({"--author-col", "nonexistent"}) == 2);
}

TEST_CASE("bench prints one line per repeat") {
  support::TempDir dir;
  write_majority_fixture(dir);
  CliOutput r = run_cli({"bench", "--votes", dir.file("votes.csv"), "--observations",
                         dir.file("observations.csv"), "--strategy", "mv", "--repeat", "2"});
  CHECK(r.code == 0);
  std::size_t lines = 0, at = 0;
  while ((at = r.out.find("strategy=mv", at)) != std::string::npos) ++lines, ++at;
  CHECK(lines == 2);
  CHECK(r.out.find("wall_ms=") != std::string::npos);
}

TEST_CASE("the thread-count environment knob never changes the bytes") {
  support::TempDir dir;
  const std::string data = dir.file("data");
  REQUIRE(run_cli({"synth", "--obs", "400", "--users", "60", "--species", "15", "--seed",
                   "11", "--out-dir", data})
              .code == 0);
  consensus::par::set_max_threads(0);  // let the environment variable rule

  const auto aggregate = [&](const char* tag) {
    const std::string rep = dir.file(std::string("rep-") + tag + ".json");
    const std::string exp = dir.file(std::string("exp-") + tag + ".csv");
    REQUIRE(run_cli({"aggregate", "--votes", data + "/votes.csv", "--observations",
                     data + "/observations.csv", "--species", data + "/species.csv",
                     "--strategy", "plantnet", "--out", rep, "--export-observations", exp})
                .code == 0);
    return support::read_file(rep) + '\0' + support::read_file(exp);
  };

  const std::string solo = aggregate("one");
  ::setenv("CONSENSUS_THREADS", "3", 1);
  const std::string trio = aggregate("three");
  ::unsetenv("CONSENSUS_THREADS");
  CHECK(solo == trio);
}
