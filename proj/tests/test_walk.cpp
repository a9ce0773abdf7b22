#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "brwlab/offspring.hpp"
#include "brwlab/stats.hpp"
#include "brwlab/walk.hpp"

using namespace brwlab;

namespace {

const double kLog2 = std::log(2.0);

StepLaw twopoint() {
  return StepLaw::atoms({{-1.0, 1.0 / 3.0}, {2.0, 2.0 / 3.0}});
}

double twopoint_psi(double t) {
  return std::exp(t) / 3.0 + 2.0 * std::exp(-2.0 * t) / 3.0;
}

}  // namespace

TEST_CASE("associated walk of the embedded Galton-Watson model") {
  const auto model = OffspringModel::galton_watson(CountLaw::deterministic(2));
  const StepLaw s = associated_step(model);
  Rng rng(7);
  for (int i = 0; i < 5; ++i) CHECK(s.sample(rng) == kLog2);
  for (double t : {0.0, 0.5, 1.3})
    CHECK(s.psi(t) == Catch::Approx(std::pow(2.0, -t)).epsilon(1e-13));
}

TEST_CASE("one-point configurations give a deterministic step") {
  // mean e^c children all at displacement c is canonical with S_1 = c
  const auto model = OffspringModel::lattice({{0.7, std::exp(0.7)}});
  REQUIRE(model.is_canonical());
  const StepLaw s = associated_step(model);
  Rng rng(3);
  for (int i = 0; i < 4; ++i) CHECK(s.sample(rng) == Catch::Approx(0.7).margin(1e-12));
  CHECK(s.support().kind == SupportKind::Arithmetic);
  CHECK(s.support().single_atom);
}

TEST_CASE("associated walk sampler matches its transform empirically") {
  const auto model = OffspringModel::independent(
      CountLaw::poisson(2.0), DisplacementLaw::normal(kLog2 + 0.125, 0.25));
  const StepLaw s = associated_step(model);
  Rng rng(0x515ull);
  std::vector<RunningStat> stats(3);
  const double ts[3] = {0.3, 0.6, 1.0};
  for (int i = 0; i < 100000; ++i) {
    const double x = s.sample(rng);
    for (int j = 0; j < 3; ++j) stats[j].add(std::exp(-ts[j] * x));
  }
  for (int j = 0; j < 3; ++j) {
    INFO("t = " << ts[j]);
    CHECK(std::fabs(stats[j].mean() - s.psi(ts[j])) <= 4.0 * stats[j].stderror());
  }
}

TEST_CASE("childless models have no associated walk") {
  const auto empty = OffspringModel::independent(CountLaw::deterministic(0),
                                                 DisplacementLaw::point(0.7));
  CHECK_THROWS_AS(associated_step(empty), Degenerate);
  const auto flat3 = OffspringModel::lattice({{0.0, 3.0}});
  CHECK_THROWS_AS(associated_step(flat3), NotCanonical);
}

TEST_CASE("shifting a walk subtracts the rate") {
  const auto model = OffspringModel::galton_watson(CountLaw::deterministic(2));
  const double a = kLog2 / 3.0;
  const StepLaw shifted = shift(associated_step(model), a);
  Rng rng(4);
  CHECK(shifted.sample(rng) == Catch::Approx(2.0 * kLog2 / 3.0).margin(1e-15));
  CHECK(shifted.support().kind == SupportKind::Arithmetic);
  CHECK(shifted.support().span == Catch::Approx(2.0 * kLog2 / 3.0).margin(1e-15));
  // transform relation psi_shift(t) = e^{at} psi(t)
  const StepLaw base = associated_step(model);
  for (double t : {0.2, 0.9})
    CHECK(shifted.psi(t) == Catch::Approx(std::exp(a * t) * base.psi(t)).epsilon(1e-12));

  const StepLaw same = shift(twopoint(), 0.0);
  Rng r1(11), r2(11);
  auto orig = twopoint();
  for (int i = 0; i < 6; ++i) CHECK(same.sample(r1) == orig.sample(r2));

  CHECK(shift(StepLaw::gaussian(1.0, 1.0), 0.3).support().kind ==
        SupportKind::NonArithmetic);
}

TEST_CASE("tilting: point masses, the zero-drift level, and gaussians") {
  // tilting cannot move a point mass
  const StepLaw det = tilt(StepLaw::deterministic(0.9), 1.7);
  Rng rng(5);
  CHECK(det.sample(rng) == Catch::Approx(0.9).margin(1e-12));
  const DerivativeEstimate dd = det.psi_deriv(0.0);
  CHECK(-dd.value == Catch::Approx(0.9).epsilon(1e-12));

  // at gamma0 = (ln 4)/3 the two-point law becomes driftless
  const double g0 = std::log(4.0) / 3.0;
  const StepLaw flat = tilt(twopoint(), g0);
  const DerivativeEstimate fd = flat.psi_deriv(0.0);
  CHECK(std::fabs(fd.value) < 1e-9);
  Rng rng2(0x2121ull);
  RunningStat mean;
  for (int i = 0; i < 100000; ++i) mean.add(flat.sample(rng2));
  CHECK(std::fabs(mean.mean()) <= 4.0 * mean.stderror());

  // gaussian tilt is exactly N(mu - gamma s2, s2)
  const StepLaw g = tilt(StepLaw::gaussian(1.0, 1.0), 0.4);
  Rng rng3(0x3333ull);
  RunningStat m2;
  std::vector<double> xs;
  for (int i = 0; i < 100000; ++i) {
    const double x = g.sample(rng3);
    m2.add(x);
    xs.push_back(x);
  }
  CHECK(std::fabs(m2.mean() - 0.6) <= 4.0 * m2.stderror());
  double var = 0.0;
  for (double x : xs) var += (x - m2.mean()) * (x - m2.mean());
  var /= xs.size();
  CHECK(var == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("tilt levels compose additively") {
  const StepLaw once = tilt(tilt(twopoint(), 0.2), 0.15);
  const StepLaw direct = tilt(twopoint(), 0.35);
  for (double t : {-0.5, 0.0, 0.3, 1.0})
    CHECK(once.psi(t) == Catch::Approx(direct.psi(t)).margin(1e-12));
  CHECK(once.tilt_level() == Catch::Approx(0.35).margin(1e-12));
  // tilting outside the transform's domain is refused
  CHECK_THROWS_AS(tilt(StepLaw::atoms({{-1.0, 0.5}, {0.5, 0.5}}), 1e6), OutsideDomain);
}

TEST_CASE("decay rate R and its minimizer") {
  const RateInfo two = rate_R(twopoint());
  CHECK(two.R == Catch::Approx(0.2310490601866485).margin(1e-9));
  REQUIRE(two.gamma0.has_value());
  CHECK(*two.gamma0 == Catch::Approx(0.46209812037329684).margin(1e-8));

  const RateInfo sym = rate_R(StepLaw::atoms({{-1.0, 0.5}, {1.0, 0.5}}));
  CHECK(sym.R == 0.0);
  REQUIRE(sym.gamma0.has_value());
  CHECK(*sym.gamma0 == 0.0);

  const RateInfo pos = rate_R(StepLaw::deterministic(0.7));
  CHECK(std::isinf(pos.R));
}

TEST_CASE("gamma root: closed families and refusal modes") {
  const auto model = OffspringModel::galton_watson(CountLaw::deterministic(2));
  const double a = kLog2 / 3.0;
  const GammaResult link = solve_gamma(shift(associated_step(model), a), a);
  REQUIRE(link.ok());
  CHECK(*link.gamma == Catch::Approx(0.5).margin(1e-8));

  const GammaResult det = solve_gamma(StepLaw::deterministic(0.8), 0.2);
  REQUIRE(det.ok());
  CHECK(*det.gamma == Catch::Approx(0.25).margin(1e-10));

  const GammaResult gauss = solve_gamma(StepLaw::gaussian(1.0, 1.0), 0.3);
  REQUIRE(gauss.ok());
  CHECK(*gauss.gamma == Catch::Approx(1.0 - std::sqrt(0.4)).margin(1e-9));

  const GammaResult high = solve_gamma(twopoint(), 0.3);
  CHECK_FALSE(high.ok());
  CHECK(high.reason.find("exceeds R") != std::string::npos);

  const GammaResult edge = solve_gamma(twopoint(), 0.2310490601866485);
  CHECK_FALSE(edge.ok());
  CHECK(edge.reason.find("flat minimum") != std::string::npos);
}

TEST_CASE("span detection") {
  const SpanInfo two = twopoint().support();
  CHECK(two.kind == SupportKind::Arithmetic);
  CHECK(two.span == Catch::Approx(3.0).margin(1e-12));
  CHECK(std::fabs(std::remainder(two.offset - (-1.0), 3.0)) < 1e-9);

  CHECK(StepLaw::gaussian(0.0, 1.0).support().kind == SupportKind::NonArithmetic);

  const SpanInfo det = StepLaw::deterministic(0.7).support();
  CHECK(det.kind == SupportKind::Arithmetic);
  CHECK(det.span == Catch::Approx(0.7).margin(1e-12));
  CHECK(det.single_atom);

  // empirical rationalization on a sampled three-atom generic law
  {
    auto sampler = [](Rng& rng) {
      const double u = rng.uniform01();
      return u < 0.3 ? -0.5 : (u < 0.7 ? 0.25 : 1.0);
    };
    LaplaceProfile pr;
    pr.evaluator = [](double t) {
      return 0.3 * std::exp(0.5 * t) + 0.4 * std::exp(-0.25 * t) + 0.3 * std::exp(-t);
    };
    const SpanInfo s = detect_span(StepLaw::custom(sampler, pr), 3000, 0x77ull);
    CHECK(s.kind == SupportKind::Arithmetic);
    CHECK(s.span == Catch::Approx(0.75).margin(1e-9));
    CHECK(std::fabs(std::remainder(s.offset - 0.25, 0.75)) < 1e-9);
  }

  // a continuous generic law resolves to Unknown, never to a false lattice
  {
    auto sampler = [](Rng& rng) { return rng.normal(0.0, 1.0); };
    LaplaceProfile pr;
    pr.evaluator = [](double t) { return std::exp(0.5 * t * t); };
    CHECK(detect_span(StepLaw::custom(sampler, pr), 3000, 0x77ull).kind ==
          SupportKind::Unknown);
    CHECK_THROWS_AS(detect_span(StepLaw::custom(sampler, pr), 10, 0x77ull), Error);
  }
}

TEST_CASE("zero-delayed paths") {
  const std::vector<double> trivial = sample_path(twopoint(), 0, 1);
  REQUIRE(trivial.size() == 1);
  CHECK(trivial[0] == 0.0);

  const std::vector<double> det = sample_path(StepLaw::deterministic(0.3), 4, 9);
  REQUIRE(det.size() == 5);
  for (int i = 0; i <= 4; ++i) CHECK(det[i] == Catch::Approx(0.3 * i).margin(1e-12));

  // law of large numbers against the closed mean E T = 1
  RunningStat ends;
  for (std::uint64_t s = 0; s < 2000; ++s)
    ends.add(sample_path(twopoint(), 25, derive_seed(0xaaull, s)).back() / 25.0);
  CHECK(std::fabs(ends.mean() - 1.0) <= 4.0 * ends.stderror());
}

TEST_CASE("tilt report identities") {
  struct Case {
    StepLaw law;
    double gamma;
  };
  const std::vector<Case> cases = {{twopoint(), 0.113268511843482},
                                   {StepLaw::gaussian(1.0, 1.0), 1.0 - std::sqrt(0.4)}};
  for (const auto& c : cases) {
    const TiltReport rep = tilt_report(c.law, c.gamma, 100000, 0xd00dull);
    CHECK(std::fabs(rep.exp_identity_estimate - rep.exp_identity_target) <=
          4.0 * rep.exp_identity_se);
    CHECK(rep.exp_identity_target ==
          Catch::Approx(1.0 / c.law.psi(c.gamma)).epsilon(1e-12));
    CHECK(std::fabs(rep.tilted_mean_estimate - rep.tilted_mean) <=
          4.0 * rep.tilted_mean_se);
    CHECK(rep.tilted_mean > 0.0);  // drift positivity below R
  }
}

TEST_CASE("gamma equals theta minus one across the bridge") {
  const auto models = {
      OffspringModel::galton_watson(CountLaw::uniform_range(1, 3)),
      OffspringModel::independent(CountLaw::poisson(2.0),
                                  DisplacementLaw::normal(kLog2 + 0.125, 0.25)),
      OffspringModel::lattice({{-1.0, std::exp(-1.0) / 3.0}, {2.0, 2.0 * std::exp(2.0) / 3.0}})};
  const double as[3] = {kLog2 / 3.0, 0.15, 0.1};
  int i = 0;
  for (const auto& model : models) {
    const double a = as[i++];
    const RootResult th = solve_theta(model.profile(), a);
    REQUIRE(th.ok());
    const GammaResult g = solve_gamma(shift(associated_step(model), a), a);
    REQUIRE(g.ok());
    CHECK(std::fabs(*g.gamma - (*th.root - 1.0)) < 1e-8);
  }
}

TEST_CASE("two-point transform sanity") {
  for (double t : {-0.3, 0.0, 0.46209812037329684, 1.1})
    CHECK(twopoint().psi(t) == Catch::Approx(twopoint_psi(t)).epsilon(1e-13));
}
