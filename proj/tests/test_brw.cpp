#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "brwlab/brw.hpp"
#include "brwlab/offspring.hpp"

using namespace brwlab;

namespace {

const double kLog2 = std::log(2.0);
const double kA = kLog2 / 3.0;

OffspringModel gw13() {
  return OffspringModel::galton_watson(CountLaw::uniform_range(1, 3));
}
OffspringModel gw04() {
  return OffspringModel::galton_watson(CountLaw::uniform_range(0, 4));
}

}  // namespace

TEST_CASE("tail first moment of W_1, exact and empirical") {
  const auto opt = W1Tail::from_model(gw13());
  REQUIRE(opt.has_value());
  const W1Tail& exact = *opt;
  CHECK(exact.exact());
  CHECK(exact.mean() == Catch::Approx(1.0).epsilon(1e-12));
  // W_1 is uniform on {1/2, 1, 3/2}
  CHECK(exact.tail_moment(0.0) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(exact.tail_moment(0.7) == Catch::Approx(2.5 / 3.0).epsilon(1e-12));
  CHECK(exact.tail_moment(1.2) == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(exact.tail_moment(2.0) == 0.0);
  // "strictly above": an atom sitting exactly at t is excluded
  CHECK(exact.tail_moment(1.0) == Catch::Approx(0.5).epsilon(1e-12));

  const W1Tail table = W1Tail::empirical(gw13(), 200000, 4000, 0x4411ull);
  CHECK_FALSE(table.exact());
  for (double t : {0.0, 0.25, 0.7, 1.2, 1.75, 2.0}) {
    INFO("t = " << t);
    CHECK(std::fabs(table.tail_moment(t) - exact.tail_moment(t)) <= 0.01);
  }

  CHECK_FALSE(W1Tail::from_model(
                  OffspringModel::independent(CountLaw::poisson(2.0),
                                              DisplacementLaw::normal(kLog2 + 0.125, 0.25)))
                  .has_value());
  CHECK_THROWS_AS(W1Tail::empirical(gw13(), 10), Error);
}

TEST_CASE("binary deterministic trees carry a constant martingale") {
  const auto model = OffspringModel::galton_watson(CountLaw::deterministic(2));
  const MartingaleTrace trace = simulate(model, kA, 8, 1000, 0x42ull);
  REQUIRE(trace.rows.size() == 9);
  CHECK_FALSE(trace.truncated);
  for (const auto& row : trace.rows) {
    CHECK(row.w == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(row.wtilde_next == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(row.r == 0.0);
    CHECK(std::fabs(row.increment) < 1e-12);
    CHECK(std::fabs(row.m) < 1e-12);
    CHECK(row.pop_size == (std::size_t{1} << row.n));
    CHECK_FALSE(row.mismatch);
  }
}

TEST_CASE("population cap leaves a sentinel row and an honest flag") {
  const auto model = OffspringModel::galton_watson(CountLaw::deterministic(2));
  const MartingaleTrace trace = simulate(model, kA, 15, 1000, 0x42ull);
  CHECK(trace.truncated);
  REQUIRE(trace.rows.size() == 10);  // rows 0..8 complete, row 9 is the sentinel
  const TraceRow& last = trace.rows.back();
  CHECK(last.n == 9);
  CHECK(last.truncated);
  CHECK(last.pop_size == 512);
  CHECK(last.w == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(last.wtilde_next == 0.0);
  CHECK(last.increment == 0.0);
  for (std::size_t i = 0; i + 1 < trace.rows.size(); ++i)
    CHECK_FALSE(trace.rows[i].truncated);
}

TEST_CASE("extinct lines pad their trace with zeros") {
  const MartingaleTrace trace = simulate(gw04(), kA, 10, 1000000, 3);
  REQUIRE(trace.rows.size() == 11);
  CHECK_FALSE(trace.truncated);
  CHECK(trace.rows[0].pop_size == 1);
  CHECK(trace.rows[1].pop_size == 0);  // the root drew zero children
  for (std::size_t n = 1; n <= 10; ++n) {
    CHECK(trace.rows[n].w == 0.0);
    CHECK(trace.rows[n].r == 0.0);
    CHECK(trace.rows[n].increment == 0.0);
    CHECK(trace.rows[n].pop_size == 0);
  }
  // M froze at its extinction value and stays there
  for (std::size_t n = 1; n <= 10; ++n) CHECK(trace.rows[n].m == trace.rows[1].m);
}

TEST_CASE("trace bookkeeping identities hold row by row") {
  const MartingaleTrace trace = simulate(gw04(), kA, 12, 1000000, 0x77aceull);
  REQUIRE_FALSE(trace.truncated);
  double m_prev = 0.0;
  for (std::size_t n = 0; n < trace.rows.size(); ++n) {
    const TraceRow& row = trace.rows[n];
    const double ean = std::exp(kA * static_cast<double>(n));
    // M recursion against its own ingredients
    const double m_expected = m_prev + ean * (row.wtilde_next - row.w + row.r);
    CHECK(row.m == Catch::Approx(m_expected).margin(1e-12));
    m_prev = row.m;
    CHECK(row.r >= 0.0);
    CHECK(row.w >= 0.0);
    if (n + 1 < trace.rows.size()) {
      // the truncated sum never exceeds the full next-generation sum
      CHECK(row.wtilde_next <= trace.rows[n + 1].w + 1e-12);
      // increment = e^{an}(W_{n+1} - W_n)
      CHECK(row.increment ==
            Catch::Approx(ean * (trace.rows[n + 1].w - row.w)).margin(1e-12));
    }
  }
}

TEST_CASE("models without an enumerable W_1 need an explicit table") {
  const auto gb = OffspringModel::independent(CountLaw::poisson(2.0),
                                              DisplacementLaw::normal(kLog2 + 0.125, 0.25));
  CHECK_THROWS_AS(simulate(gb, 0.15, 3, 1000, 1), FTableRequired);
  const W1Tail table = W1Tail::empirical(gb, 50000, 2000, 0x5ull);
  const MartingaleTrace trace = simulate(gb, 0.15, 3, 100000, 1, &table);
  CHECK(trace.rows.size() == 4);
  // ensembles build the table themselves when none is given
  const auto traces = simulate_ensemble(gb, 0.15, 2, 100000, 0x6ull, 4);
  CHECK(traces.size() == 4);
}

TEST_CASE("series diagnostics on a hand-built trace") {
  MartingaleTrace trace;
  trace.a = 0.1;
  trace.rows = {{0, 1.0, 0, 0, 1.0, 0, 1, false, false},
                {1, 2.0, 0, 0, -0.5, 0, 2, false, false},
                {2, 1.6, 0, 0, 0.25, 0, 3, false, false}};
  const SeriesReport rep = exp_series_diagnostics(trace);
  REQUIRE(rep.partial.size() == 3);
  CHECK(rep.partial[0] == 1.0);
  CHECK(rep.partial[1] == 0.5);
  CHECK(rep.partial[2] == 0.75);
  REQUIRE(rep.cauchy.size() == 2);
  CHECK(rep.cauchy[0] == 1.0);   // sup over P_0, P_1 against base 0
  CHECK(rep.cauchy[1] == 0.5);   // |P_1 - P_0|
  CHECK_FALSE(rep.flagged_truncated);

  trace.rows.push_back({3, 1.85, 0, 0, 0, 0, 4, true, false});
  trace.truncated = true;
  const SeriesReport cut = exp_series_diagnostics(trace);
  CHECK(cut.partial.size() == 3);  // the sentinel row contributes nothing
  CHECK(cut.flagged_truncated);
}

TEST_CASE("ensemble diagnostics report both series") {
  const auto traces = simulate_ensemble(gw04(), kA, 5, 100000, 0xbeefull, 150);
  REQUIRE(traces.size() == 150);
  const EnsembleReport rep = m_series_diagnostics(traces);
  CHECK(rep.ensemble == 150);
  REQUIRE(rep.mismatch_freq.size() == 6);
  REQUIRE(rep.mean_exp_r.size() == 6);
  REQUIRE(rep.m_second.size() == 6);
  for (std::size_t n = 0; n < 6; ++n) {
    CHECK(rep.mismatch_freq[n] >= 0.0);
    CHECK(rep.mismatch_freq[n] <= 1.0);
    CHECK(rep.mean_exp_r[n] >= 0.0);
    CHECK(rep.m_second[n] <= rep.sup_m_second);
  }
  CHECK(std::isfinite(rep.exp_r_slope));

  CHECK_THROWS_AS(m_series_diagnostics({traces[0], traces[1]}), Error);
}

TEST_CASE("replicate seeds make the ensemble worker-count independent") {
  const auto one = simulate_ensemble(gw04(), kA, 6, 100000, 0xd15cull, 40, nullptr, 1);
  const auto three = simulate_ensemble(gw04(), kA, 6, 100000, 0xd15cull, 40, nullptr, 3);
  REQUIRE(one.size() == three.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    REQUIRE(one[i].rows.size() == three[i].rows.size());
    CHECK(one[i].seed == three[i].seed);
    for (std::size_t n = 0; n < one[i].rows.size(); ++n) {
      CHECK(one[i].rows[n].w == three[i].rows[n].w);
      CHECK(one[i].rows[n].m == three[i].rows[n].m);
      CHECK(one[i].rows[n].r == three[i].rows[n].r);
      CHECK(one[i].rows[n].pop_size == three[i].rows[n].pop_size);
    }
  }
}
