#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "brwlab/cli.hpp"
#include "brwlab/model_io.hpp"

using namespace brwlab;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

const double kLog2 = std::log(2.0);

KVFile kv_of(const std::string& text) {
  std::istringstream in(text);
  return parse_kv(in);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::map<std::string, std::string> kv_map(const std::string& path) {
  std::istringstream in(slurp(path));
  std::map<std::string, std::string> out;
  for (const auto& e : parse_kv(in).entries) out[e.key] = e.value;
  return out;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
  std::istringstream in(slurp(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// fresh output directory under the test working directory
std::string out_dir(const std::string& tag) {
  const fs::path p = fs::path("io_out") / tag;
  fs::remove_all(p);
  return p.string();
}

StepLaw twopoint_generic() {
  auto sampler = [](Rng& rng) { return rng.uniform01() < 1.0 / 3.0 ? -1.0 : 2.0; };
  LaplaceProfile pr;
  pr.evaluator = [](double t) {
    return std::exp(t) / 3.0 + 2.0 * std::exp(-2.0 * t) / 3.0;
  };
  return StepLaw::custom(sampler, pr);
}

}  // namespace

TEST_CASE("key-value parsing anchors errors to their line") {
  const KVFile kv = kv_of("# comment\n\nkind = lattice\n  entries = 1:2 # trailing\n");
  REQUIRE(kv.entries.size() == 2);
  CHECK(kv.entries[0].key == "kind");
  CHECK(kv.entries[0].value == "lattice");
  CHECK(kv.entries[0].line == 3);
  CHECK(kv.entries[1].value == "1:2");
  CHECK(kv.entries[1].line == 4);

  CHECK_THROWS_WITH(kv_of("a = 1\nnonsense\n"), ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(kv_of("= 3\n"), ContainsSubstring("line 1"));
  CHECK_THROWS_WITH(kv_of("x =\n"), ContainsSubstring("empty value"));
}

TEST_CASE("model files round-trip byte for byte") {
  const std::vector<OffspringModel> models = {
      OffspringModel::galton_watson(CountLaw::uniform_range(1, 3)),
      OffspringModel::independent(CountLaw::poisson(2.0),
                                  DisplacementLaw::normal(kLog2 + 0.125, 0.25)),
      OffspringModel::lattice(
          {{-1.0, std::exp(-1.0) / 3.0}, {2.0, 2.0 * std::exp(2.0) / 3.0}})};
  for (const auto& m : models) {
    const std::string text = serialize_model(m);
    std::istringstream in(text);
    const LoadedModel back = parse_model(in, "roundtrip");
    REQUIRE(back.offspring.has_value());
    CHECK(back.id == "roundtrip");
    CHECK(serialize_model(*back.offspring) == text);
    CHECK(back.offspring->is_canonical());
  }
}

TEST_CASE("model files can carry plain walks") {
  const LoadedModel det = parse_model(kv_of("kind = walk_deterministic\nstep = 0.7\n"));
  REQUIRE(det.walk.has_value());
  Rng rng(1);
  CHECK(det.walk->sample(rng) == Catch::Approx(0.7).margin(1e-12));

  const LoadedModel gauss =
      parse_model(kv_of("kind = walk_gaussian\nmu = 1\nsigma2 = 1\n"));
  REQUIRE(gauss.walk.has_value());
  CHECK(gauss.walk->psi(1.0) == Catch::Approx(std::exp(-0.5)).epsilon(1e-12));

  const LoadedModel atoms =
      parse_model(kv_of("kind = walk_atoms\natoms = -1:0.33333,2:0.66667\n"));
  REQUIRE(atoms.walk.has_value());
  CHECK(atoms.walk->support().span == Catch::Approx(3.0).margin(1e-9));

  CHECK_THROWS_WITH(parse_model(kv_of("kind = warp_drive\n")),
                    ContainsSubstring("unknown kind"));
  CHECK_THROWS_WITH(parse_model(kv_of("kind = walk_gaussian\nmu = 1\n")),
                    ContainsSubstring("sigma2"));
  CHECK_THROWS_WITH(parse_model(kv_of("count = poisson 2\n")),
                    ContainsSubstring("'kind'"));
}

TEST_CASE("model files apply caps and canonicalization on load") {
  const LoadedModel capped = parse_model(
      kv_of("kind = galton_watson\ncount = deterministic 2\nmax_children = 4096\n"));
  REQUIRE(capped.offspring.has_value());
  CHECK(capped.offspring->max_children() == 4096);

  // a non-canonical lattice is repaired in place when asked
  const LoadedModel fixed = parse_model(
      kv_of("kind = lattice\nentries = 0:3\ncanonicalize = 1\n"));
  REQUIRE(fixed.offspring.has_value());
  CHECK(fixed.offspring->is_canonical());

  const LoadedModel raw = parse_model(kv_of("kind = lattice\nentries = 0:3\n"));
  REQUIRE(raw.offspring.has_value());
  CHECK_FALSE(raw.offspring->is_canonical());
}

TEST_CASE("scenario files parse, validate, and round-trip") {
  Scenario s = parse_scenario(kv_of(
      "name = demo\ntask = renewal\npreset = two-point-walk\nseed = 42\n"
      "samples = 5000\nx_min = 0\nx_max = 6\nx_points = 4\nout = somewhere\n"));
  CHECK(s.task == Scenario::Task::Renewal);
  CHECK(s.preset == "two-point-walk");
  CHECK(s.seed == 42);
  CHECK(s.samples == 5000);
  CHECK(s.x_points == 4);
  CHECK(s.out_dir == "somewhere");
  CHECK_FALSE(s.a.has_value());

  const std::string text = serialize_scenario(s);
  const Scenario back = parse_scenario(kv_of(text));
  CHECK(serialize_scenario(back) == text);

  CHECK_THROWS_WITH(parse_scenario(kv_of("task = renewal\npreset = x\n")),
                    ContainsSubstring("seed"));
  CHECK_THROWS_WITH(parse_scenario(kv_of("seed = 1\npreset = x\n")),
                    ContainsSubstring("task"));
  CHECK_THROWS_WITH(parse_scenario(kv_of("task = analyze\nseed = 1\n")),
                    ContainsSubstring("preset"));
  CHECK_THROWS_WITH(
      parse_scenario(kv_of("task = analyze\nseed = 1\npreset = x\nmodel_file = y\n")),
      ContainsSubstring("mutually exclusive"));
  CHECK_THROWS_WITH(
      parse_scenario(kv_of("task = analyze\nseed = 1\npreset = x\nbogus = 2\n")),
      ContainsSubstring("line 4"));
  CHECK_THROWS_WITH(
      parse_scenario(kv_of("task = analyze\nseed = 1\npreset = x\na = -0.3\n")),
      ContainsSubstring("positive"));
}

TEST_CASE("the preset catalogue covers the documented minimum") {
  for (const char* name : {"gw-example", "gaussian-brw", "two-point-walk",
                           "deterministic-step", "symmetric-walk"}) {
    INFO("preset " << name);
    const Preset* p = find_preset(name);
    REQUIRE(p != nullptr);
    CHECK(p->default_a > 0.0);
    CHECK_FALSE(p->summary.empty());
    CHECK(p->offspring.has_value() != p->walk.has_value());
  }
  CHECK(find_preset("no-such-thing") == nullptr);

  // offspring presets are canonical and survive a file round-trip
  for (const auto& p : preset_catalogue()) {
    if (!p.offspring) continue;
    INFO("preset " << p.name);
    CHECK(p.offspring->is_canonical());
    const std::string text = serialize_model(*p.offspring);
    std::istringstream in(text);
    const LoadedModel back = parse_model(in, p.name);
    CHECK(serialize_model(*back.offspring) == text);
  }
}

TEST_CASE("CSV writers emit the documented schemas") {
  MartingaleTrace trace;
  trace.rows = {{0, 1.0, 0.5, 0.25, -0.125, 0.0625, 7, false, true}};
  std::ostringstream t;
  write_trace_csv(t, trace);
  CHECK(t.str() ==
        "n,W_n,Wtilde_next,R_n,increment,M_n,pop_size,truncated,mismatch_flag\n"
        "0,1,0.5,0.25,-0.125,0.0625,7,0,1\n");

  RenewalEstimate e;
  e.x = 2.0;
  e.value = 5.5;
  e.se = 0.25;
  e.horizon = 40;
  e.tail_bound = 0.001953125;
  e.method = RenewalMethod::Tilted;
  std::ostringstream r;
  write_renewal_csv(r, {e});
  CHECK(r.str() ==
        "x,value,stderr,horizon,tail_bound,method,horizon_exceeded\n"
        "2,5.5,0.25,40,0.001953125,tilted,0\n");

  std::ostringstream p;
  write_predictions_csv(p, {{AsymptotePrediction::Target::V, 0.5, 0.5, 2.0, true, 3.0}});
  CHECK(p.str() ==
        "target,gamma,exponent,constant,arithmetic,span\n"
        "V,0.5,0.5,2,1,3\n");
}

TEST_CASE("analyze run writes a hypothesis report") {
  Scenario sc;
  sc.task = Scenario::Task::Analyze;
  sc.preset = "gw-example";
  sc.seed = 7;
  sc.seed_set = true;
  sc.out_dir = out_dir("analyze_gw");
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  REQUIRE(res.files.size() == 1);
  const auto rep = kv_map(res.files[0]);
  CHECK(rep.at("model") == "gw-example");
  CHECK(rep.at("verdict") == "theorem_applies");
  CHECK(std::stod(rep.at("theta")) == Catch::Approx(1.5).margin(1e-9));
  CHECK(rep.at("moment_condition") == "holds");
  CHECK(rep.at("span_kind") == "arithmetic");
  CHECK(std::stod(rep.at("gamma")) == Catch::Approx(0.5).margin(1e-8));
  CHECK(std::stod(rep.at("a")) == Catch::Approx(kLog2 / 3.0).margin(1e-15));
}

TEST_CASE("analyze run on a plain walk reports the classification") {
  Scenario sc;
  sc.task = Scenario::Task::Analyze;
  sc.preset = "two-point-walk";
  sc.seed = 7;
  sc.seed_set = true;
  sc.out_dir = out_dir("analyze_walk");
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  const auto rep = kv_map(res.files[0]);
  CHECK(rep.at("verdict") == "FiniteAll");
  CHECK(rep.at("case") == "(a)(i)");
  CHECK(std::stod(rep.at("R")) == Catch::Approx(0.2310490601866485).margin(1e-8));
  CHECK(std::stod(rep.at("gamma")) == Catch::Approx(0.113268511843482).margin(1e-8));
}

TEST_CASE("undecided verdicts exit with code 3") {
  cli::ResolvedScenario rs;
  rs.scenario.task = Scenario::Task::Analyze;
  rs.scenario.out_dir = out_dir("analyze_undecided");
  rs.model.id = "generic-two-point";
  rs.model.walk = twopoint_generic();
  rs.a = 0.2310490601866485;
  const cli::RunResult res = cli::run_analyze(rs);
  CHECK(res.exit_code == 3);
  const auto rep = kv_map(res.files[0]);
  CHECK(rep.at("verdict") == "Undecided");

  rs.scenario.task = Scenario::Task::Renewal;
  rs.scenario.out_dir = out_dir("renewal_undecided");
  const cli::RunResult ren = cli::run_renewal(rs);
  CHECK(ren.exit_code == 3);
  REQUIRE(ren.files.size() == 1);  // classification only, no grid
  CHECK_THAT(ren.files[0], ContainsSubstring("classification"));
}

TEST_CASE("renewal run on the deterministic preset matches the closed series") {
  Scenario sc;
  sc.task = Scenario::Task::Renewal;
  sc.preset = "deterministic-step";
  sc.seed = 9;
  sc.seed_set = true;
  sc.samples = 500;
  sc.x_min = 0.0;
  sc.x_max = 6.0;
  sc.x_points = 7;
  sc.out_dir = out_dir("renewal_det");
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  REQUIRE(res.files.size() == 3);

  const auto cls = kv_map(res.files[0]);
  CHECK(cls.at("domain") == "direct");
  CHECK(cls.at("case") == "(b)");

  const auto grid = csv_rows(res.files[1]);
  REQUIRE(grid.size() == 8);  // header + 7 points
  CHECK(grid[0][0] == "x");
  const double a = 0.3;
  for (int k = 0; k <= 6; ++k) {
    const auto& row = grid[k + 1];
    CHECK(std::stod(row[0]) == Catch::Approx(k).margin(1e-12));
    const double closed = (std::exp(a * (k + 1)) - 1.0) / (std::exp(a) - 1.0);
    CHECK(std::stod(row[1]) == Catch::Approx(closed).epsilon(1e-12));
    CHECK(std::stod(row[2]) == 0.0);
    CHECK(row[6] == "0");
  }

  const auto preds = csv_rows(res.files[2]);
  REQUIRE(preds.size() == 3);  // header + V + V_increment
  CHECK(preds[1][0] == "V");
  CHECK(std::stod(preds[1][3]) ==
        Catch::Approx(1.0 / (1.0 - std::exp(-a))).epsilon(1e-8));
  CHECK(preds[2][0] == "V_increment");
  CHECK(std::stod(preds[2][3]) == Catch::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("renewal run reports infinite regimes without producing a grid") {
  Scenario sc;
  sc.task = Scenario::Task::Renewal;
  sc.preset = "symmetric-walk";
  sc.seed = 9;
  sc.seed_set = true;
  sc.out_dir = out_dir("renewal_inf");
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  REQUIRE(res.files.size() == 1);
  CHECK_THAT(res.message, ContainsSubstring("infinite"));
  const auto cls = kv_map(res.files[0]);
  CHECK(cls.at("verdict") == "InfiniteAll");
  CHECK(cls.at("case") == "(a)(iii)");
}

TEST_CASE("renewal run on an offspring preset works in the log domain") {
  Scenario sc;
  sc.task = Scenario::Task::Renewal;
  sc.preset = "gw-example";
  sc.seed = 11;
  sc.seed_set = true;
  sc.samples = 2000;
  sc.x_min = 0.0;
  sc.x_max = 3.0;
  sc.x_points = 4;
  sc.out_dir = out_dir("renewal_gw");
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  REQUIRE(res.files.size() == 3);
  const auto cls = kv_map(res.files[0]);
  CHECK(cls.at("domain") == "log_argument");
  const auto preds = csv_rows(res.files[2]);
  REQUIRE(preds.size() == 4);  // header + Va + first + inverse
  CHECK(preds[1][0] == "Va");
  CHECK(preds[2][0] == "Va_first_moment");
  CHECK(preds[3][0] == "Va_inverse_moment");
  CHECK(std::stod(preds[1][2]) == Catch::Approx(0.5).margin(1e-9));  // exponent
}

TEST_CASE("brw run writes traces, diagnostics, and a summary") {
  Scenario sc;
  sc.task = Scenario::Task::Brw;
  sc.preset = "gw-example";
  sc.seed = 5;
  sc.seed_set = true;
  sc.replicates = 120;
  sc.horizon = 8;
  sc.cap = 1000000;
  sc.out_dir = out_dir("brw_gw");
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  REQUIRE(res.files.size() == 7);  // 5 traces + diagnostics + summary

  const auto trace = csv_rows(res.files[0]);
  CHECK(trace[0][0] == "n");
  CHECK(trace.size() == 10);  // header + rows 0..8
  CHECK(trace[1][1] == "1");  // W_0 = 1

  const auto diag = csv_rows(res.files[5]);
  REQUIRE(diag.size() == 10);
  CHECK(diag[0] == std::vector<std::string>{"n", "mismatch_freq", "mean_exp_r",
                                            "m_second"});

  const auto summary = kv_map(res.files[6]);
  CHECK(summary.at("replicates") == "120");
  CHECK(summary.at("n_max") == "8");
  CHECK(summary.count("exp_r_slope") == 1);
  CHECK(summary.count("cauchy_ratio") == 1);

  // small ensembles skip the diagnostics but never lie about it
  Scenario tiny = sc;
  tiny.replicates = 8;
  tiny.out_dir = out_dir("brw_tiny");
  const cli::RunResult small = cli::run(tiny);
  CHECK(small.exit_code == 0);
  REQUIRE(small.files.size() == 6);  // 5 traces + summary
  CHECK_THAT(slurp(small.files[5]), ContainsSubstring("diagnostics = skipped"));
}

TEST_CASE("configuration mistakes are rejected before any work happens") {
  Scenario sc;
  sc.task = Scenario::Task::Analyze;
  sc.preset = "no-such-preset";
  sc.seed = 1;
  sc.seed_set = true;
  CHECK_THROWS_WITH(cli::run(sc), ContainsSubstring("unknown preset"));
  CHECK_THROWS_WITH(cli::run(sc), ContainsSubstring("gw-example"));

  Scenario walk_brw;
  walk_brw.task = Scenario::Task::Brw;
  walk_brw.preset = "two-point-walk";
  walk_brw.seed = 1;
  walk_brw.seed_set = true;
  walk_brw.out_dir = out_dir("brw_walk");
  CHECK_THROWS_AS(cli::run(walk_brw), ConfigError);

  Scenario missing;
  missing.task = Scenario::Task::Analyze;
  missing.model_file = "does_not_exist.model";
  missing.seed = 1;
  missing.seed_set = true;
  CHECK_THROWS_WITH(cli::run(missing), ContainsSubstring("cannot open"));
}

TEST_CASE("model files feed the runner and demand an explicit drift") {
  const std::string dir = out_dir("model_file");
  fs::create_directories(dir);
  const std::string path = (fs::path(dir) / "twopoint.model").string();
  {
    std::ofstream out(path);
    out << "kind = walk_atoms\n";
    out << "atoms = -1:" << fmt17(1.0 / 3.0) << ",2:" << fmt17(2.0 / 3.0) << "\n";
  }
  Scenario sc;
  sc.task = Scenario::Task::Analyze;
  sc.model_file = path;
  sc.seed = 1;
  sc.seed_set = true;
  sc.out_dir = dir;
  CHECK_THROWS_WITH(cli::run(sc), ContainsSubstring("default drift"));

  sc.a = 0.1;
  const cli::RunResult res = cli::run(sc);
  CHECK(res.exit_code == 0);
  const auto rep = kv_map(res.files[0]);
  CHECK(rep.at("model") == "twopoint");
  CHECK(rep.at("verdict") == "FiniteAll");
}

TEST_CASE("renewal outputs are byte-identical across repeat runs") {
  Scenario sc;
  sc.task = Scenario::Task::Renewal;
  sc.preset = "two-point-walk";
  sc.seed = 33;
  sc.seed_set = true;
  sc.samples = 3000;
  sc.x_min = 0.0;
  sc.x_max = 5.0;
  sc.x_points = 3;
  sc.out_dir = out_dir("det_a");
  const cli::RunResult first = cli::run(sc);
  sc.out_dir = out_dir("det_b");
  const cli::RunResult second = cli::run(sc);
  REQUIRE(first.files.size() == second.files.size());
  for (std::size_t i = 0; i < first.files.size(); ++i)
    CHECK(slurp(first.files[i]) == slurp(second.files[i]));
}
