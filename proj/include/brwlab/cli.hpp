#pragma once

// Scenario runner behind the command-line tool.  Everything lives in the
// library so tests can drive the exact code path the binary uses, including
// exit codes, without spawning processes.
//
// Exit codes: 0 success, 1 numerical or I/O failure, 2 malformed
// configuration, 3 honest refusal (a verdict came back undecided).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "brwlab/acceptance.hpp"
#include "brwlab/brw.hpp"
#include "brwlab/model_io.hpp"
#include "brwlab/renewal.hpp"
#include "brwlab/walk.hpp"

namespace brwlab::cli {

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> files;  // artifacts written, in order
  std::string message;             // one-line human summary
};

// a scenario with its model source opened and the drift parameter settled
struct ResolvedScenario {
  Scenario scenario;
  LoadedModel model;  // offspring xor walk; both empty for verify
  double a = kNaN;
};

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

template <class Body>
void emit(RunResult& res, const std::string& dir, const std::string& name,
          Body&& body) {
  std::filesystem::create_directories(dir.empty() ? "." : dir);
  const std::string path = join_path(dir.empty() ? "." : dir, name);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  body(static_cast<std::ostream&>(out));
  out.flush();
  if (!out) throw Error("short write to '" + path + "'");
  res.files.push_back(path);
}

inline const char* span_name(SupportKind k) {
  switch (k) {
    case SupportKind::Arithmetic: return "arithmetic";
    case SupportKind::NonArithmetic: return "non_arithmetic";
    default: return "unknown";
  }
}

inline void describe_span(std::ostream& out, const SpanInfo& span) {
  out << "span_kind = " << span_name(span.kind) << "\n";
  if (span.kind == SupportKind::Arithmetic) {
    out << "span = " << fmt17(span.span) << "\n";
    out << "span_offset = " << fmt17(span.offset) << "\n";
  }
}

}  // namespace detail

inline ResolvedScenario resolve(const Scenario& sc) {
  ResolvedScenario rs;
  rs.scenario = sc;
  if (sc.task == Scenario::Task::Verify) return rs;

  std::optional<double> fallback_a;
  if (!sc.preset.empty()) {
    const Preset* p = find_preset(sc.preset);
    if (!p) {
      std::string names;
      for (const auto& q : preset_catalogue())
        names += (names.empty() ? "" : ", ") + q.name;
      throw ConfigError("unknown preset '" + sc.preset + "' (available: " + names + ")");
    }
    rs.model.id = p->name;
    rs.model.offspring = p->offspring;
    rs.model.walk = p->walk;
    fallback_a = p->default_a;
  } else {
    std::ifstream in(sc.model_file);
    if (!in) throw ConfigError("cannot open model file '" + sc.model_file + "'");
    rs.model =
        parse_model(in, std::filesystem::path(sc.model_file).stem().string());
  }

  if (sc.a)
    rs.a = *sc.a;
  else if (fallback_a)
    rs.a = *fallback_a;
  else
    throw ConfigError("model files carry no default drift; set a = ... or --a");
  if (!(rs.a > 0.0)) throw ConfigError("a must be positive");
  return rs;
}

// ---------------------------------------------------------------------------
// analyze: hypothesis report as a flat key-value file

inline RunResult run_analyze(const ResolvedScenario& rs) {
  RunResult res;
  std::ostringstream rep;
  bool undecided = false;
  rep << "model = " << rs.model.id << "\n";
  rep << "a = " << fmt17(rs.a) << "\n";

  if (rs.model.offspring) {
    const OffspringModel& model = *rs.model.offspring;
    const LaplaceProfile profile = model.profile();
    const ConditionReport tr = check_rate_theorem(profile, rs.a, model.moment_oracle());
    rep << "mean_children = " << fmt17(model.mean_children()) << "\n";
    rep << "verdict = " << (tr.applies ? "theorem_applies" : "not_established") << "\n";
    if (!tr.applies) rep << "verdict_reason = " << tr.reason << "\n";
    if (tr.theta) rep << "theta = " << fmt17(*tr.theta) << "\n";
    if (tr.theta0) rep << "theta0 = " << fmt17(*tr.theta0) << "\n";
    if (std::isfinite(tr.spectral_min))
      rep << "spectral_min = " << fmt17(tr.spectral_min) << "\n";
    rep << "boundary_case = " << (tr.is_boundary_case ? 1 : 0) << "\n";
    if (tr.is_boundary_case)
      rep << "boundary_strict = " << (tr.boundary_strict ? 1 : 0) << "\n";
    rep << "moment_condition = " << to_string(tr.moment_ok) << "\n";
    undecided = tr.moment_ok == TriState::Undetermined;

    const StepLaw shifted = shift(associated_step(model), rs.a);
    const GammaResult gr = solve_gamma(shifted, rs.a);
    if (gr.ok())
      rep << "gamma = " << fmt17(*gr.gamma) << "\n";
    else
      rep << "gamma_unavailable = " << gr.reason << "\n";
    const RateInfo rate = rate_R(shifted);
    rep << "R = " << fmt17(rate.R) << "\n";
    if (rate.gamma0) rep << "gamma0 = " << fmt17(*rate.gamma0) << "\n";
    detail::describe_span(rep, shifted.support());
  } else {
    const StepLaw& law = *rs.model.walk;
    const Classification cls = classify_finiteness(law, rs.a);
    rep << "verdict = " << to_string(cls.verdict) << "\n";
    if (!cls.tag.empty()) rep << "case = " << cls.tag << "\n";
    if (!cls.detail.empty()) rep << "detail = " << cls.detail << "\n";
    if (std::isfinite(cls.R)) rep << "R = " << fmt17(cls.R) << "\n";
    if (cls.gamma0) rep << "gamma0 = " << fmt17(*cls.gamma0) << "\n";
    const GammaResult gr = solve_gamma(law, rs.a);
    if (gr.ok())
      rep << "gamma = " << fmt17(*gr.gamma) << "\n";
    else
      rep << "gamma_unavailable = " << gr.reason << "\n";
    detail::describe_span(rep, law.support());
    undecided = cls.verdict == Classification::Verdict::Undecided;
  }

  detail::emit(res, rs.scenario.out_dir, "analysis.txt",
               [&](std::ostream& out) { out << rep.str(); });
  res.exit_code = undecided ? 3 : 0;
  res.message = undecided ? "analysis written; one verdict is undecided"
                          : "analysis written";
  return res;
}

// ---------------------------------------------------------------------------
// renewal: classification, V grid, and predicted asymptotes

inline RunResult run_renewal(const ResolvedScenario& rs) {
  RunResult res;
  const Scenario& sc = rs.scenario;
  // with an offspring model the estimand is V_a of the shifted associated
  // walk; grid values (the CSV x column) then live in the log domain
  const bool log_domain = rs.model.offspring.has_value();
  const StepLaw law = log_domain
                          ? shift(associated_step(*rs.model.offspring), rs.a)
                          : *rs.model.walk;
  const Classification cls = classify_finiteness(law, rs.a);

  detail::emit(res, sc.out_dir, "classification.txt", [&](std::ostream& out) {
    out << "model = " << rs.model.id << "\n";
    out << "a = " << fmt17(rs.a) << "\n";
    out << "domain = " << (log_domain ? "log_argument" : "direct") << "\n";
    out << "verdict = " << to_string(cls.verdict) << "\n";
    if (!cls.tag.empty()) out << "case = " << cls.tag << "\n";
    if (!cls.detail.empty()) out << "detail = " << cls.detail << "\n";
    if (std::isfinite(cls.R)) out << "R = " << fmt17(cls.R) << "\n";
    if (cls.gamma0) out << "gamma0 = " << fmt17(*cls.gamma0) << "\n";
  });

  if (cls.verdict == Classification::Verdict::Undecided) {
    res.exit_code = 3;
    res.message = "classification undecided: " + cls.detail;
    return res;
  }
  if (!cls.finite()) {
    res.message = "V is infinite here (" + cls.tag + "); no grid to compute";
    return res;
  }

  std::vector<double> xs;
  const double lo = sc.x_min.value_or(0.0);
  const double hi = sc.x_max.value_or(10.0);
  if (hi < lo) throw ConfigError("x_max must be at least x_min");
  const std::size_t points = std::max<std::size_t>(sc.x_points, 1);
  for (std::size_t i = 0; i < points; ++i)
    xs.push_back(points == 1 ? lo
                             : lo + (hi - lo) * static_cast<double>(i) /
                                        static_cast<double>(points - 1));

  RenewalOptions opts;
  if (sc.horizon) opts.max_horizon = *sc.horizon;
  const std::vector<RenewalEstimate> grid =
      estimate_V_grid(law, rs.a, xs, sc.samples, sc.seed, opts);
  detail::emit(res, sc.out_dir, "renewal_grid.csv",
               [&](std::ostream& out) { write_renewal_csv(out, grid); });

  std::vector<AsymptotePrediction> preds;
  std::string pred_note;
  try {
    if (log_domain) {
      const VaPredictions p =
          predict_Va(rs.model.offspring->profile(), rs.a, law.support());
      preds.push_back(p.va);
      preds.push_back(p.first_moment);
      if (p.inverse_moment)
        preds.push_back(*p.inverse_moment);
      else if (!p.inverse_note.empty())
        pred_note = p.inverse_note;
    } else {
      const VAsymptote p = predict_asymptote(law, rs.a);
      preds.push_back(p.v);
      if (p.increment) preds.push_back(*p.increment);
    }
  } catch (const Error& e) {
    pred_note = e.what();
  }
  detail::emit(res, sc.out_dir, "predictions.csv",
               [&](std::ostream& out) { write_predictions_csv(out, preds); });

  res.message = "grid of " + std::to_string(grid.size()) + " points written";
  if (!pred_note.empty()) res.message += " (prediction note: " + pred_note + ")";
  return res;
}

// ---------------------------------------------------------------------------
// brw: trace files plus ensemble diagnostics

inline RunResult run_brw(const ResolvedScenario& rs) {
  RunResult res;
  const Scenario& sc = rs.scenario;
  if (!rs.model.offspring)
    throw ConfigError("task brw needs an offspring model, not a plain walk");
  const OffspringModel& model = *rs.model.offspring;
  const std::size_t n_max = sc.horizon.value_or(20);

  const std::vector<MartingaleTrace> traces =
      simulate_ensemble(model, rs.a, n_max, sc.cap, sc.seed, sc.replicates);

  const std::size_t keep = std::min<std::size_t>(traces.size(), 5);
  for (std::size_t i = 0; i < keep; ++i)
    detail::emit(res, sc.out_dir, "trace_" + std::to_string(i) + ".csv",
                 [&](std::ostream& out) { write_trace_csv(out, traces[i]); });

  std::size_t truncated = 0;
  for (const auto& t : traces) truncated += t.truncated ? 1 : 0;

  std::ostringstream summary;
  summary << "model = " << rs.model.id << "\n";
  summary << "a = " << fmt17(rs.a) << "\n";
  summary << "replicates = " << traces.size() << "\n";
  summary << "n_max = " << n_max << "\n";
  summary << "cap = " << sc.cap << "\n";
  summary << "truncated_traces = " << truncated << "\n";

  if (traces.size() >= 100) {
    const EnsembleReport rep = m_series_diagnostics(traces);
    detail::emit(res, sc.out_dir, "diagnostics.csv", [&](std::ostream& out) {
      out << "n,mismatch_freq,mean_exp_r,m_second\n";
      for (std::size_t n = 0; n < rep.mean_exp_r.size(); ++n)
        out << n << ',' << fmt17(rep.mismatch_freq[n]) << ','
            << fmt17(rep.mean_exp_r[n]) << ',' << fmt17(rep.m_second[n]) << '\n';
    });
    summary << "exp_r_slope = " << fmt17(rep.exp_r_slope) << "\n";
    summary << "mismatch_slope = " << fmt17(rep.mismatch_slope) << "\n";
    summary << "sup_m_second = " << fmt17(rep.sup_m_second) << "\n";

    // Cauchy medians of the partial-sum series at a quarter and at
    // three-quarters of the horizon; their ratio is the convergence signal
    const std::size_t n1 = std::max<std::size_t>(1, n_max / 4);
    const std::size_t n2 = std::max<std::size_t>(n1 + 1, 3 * n_max / 4);
    std::vector<double> early, late;
    for (const auto& t : traces) {
      const SeriesReport sr = exp_series_diagnostics(t);
      if (sr.cauchy.size() > n2) {
        early.push_back(sr.cauchy[n1]);
        late.push_back(sr.cauchy[n2]);
      }
    }
    if (early.size() >= traces.size() / 2) {
      summary << "cauchy_early_n = " << n1 << "\n";
      summary << "cauchy_late_n = " << n2 << "\n";
      summary << "cauchy_median_early = " << fmt17(median(early)) << "\n";
      summary << "cauchy_median_late = " << fmt17(median(late)) << "\n";
      summary << "cauchy_ratio = " << fmt17(median(early) / median(late)) << "\n";
    }
  } else {
    summary << "diagnostics = skipped (needs at least 100 replicates)\n";
  }

  detail::emit(res, sc.out_dir, "summary.txt",
               [&](std::ostream& out) { out << summary.str(); });
  res.message = std::to_string(traces.size()) + " traces simulated, " +
                std::to_string(truncated) + " hit the cap";
  return res;
}

// ---------------------------------------------------------------------------
// verify: the acceptance suite, with a machine-readable report

inline RunResult run_verify(const ResolvedScenario& rs,
                            std::ostream* progress = nullptr) {
  RunResult res;
  const acceptance::SuiteResult suite = acceptance::run_all(progress);
  detail::emit(res, rs.scenario.out_dir, "verify_report.txt",
               [&](std::ostream& out) {
                 for (const auto& c : suite.criteria) {
                   const std::string key = "criterion_" + std::to_string(c.index);
                   out << key << " = " << (c.pass ? "pass" : "fail") << "\n";
                   out << key << "_name = " << c.name << "\n";
                   out << key << "_seconds = " << fmt17(c.seconds) << "\n";
                   if (!c.detail.empty()) out << key << "_detail = " << c.detail << "\n";
                 }
                 out << "overall = " << (suite.all_pass ? "pass" : "fail") << "\n";
               });
  res.exit_code = suite.all_pass ? 0 : 1;
  res.message = suite.all_pass ? "all acceptance criteria pass"
                               : "acceptance criteria FAILED";
  return res;
}

inline RunResult run(const Scenario& sc, std::ostream* progress = nullptr) {
  const ResolvedScenario rs = resolve(sc);
  switch (sc.task) {
    case Scenario::Task::Analyze: return run_analyze(rs);
    case Scenario::Task::Renewal: return run_renewal(rs);
    case Scenario::Task::Brw: return run_brw(rs);
    case Scenario::Task::Verify: return run_verify(rs, progress);
  }
  throw Error("unhandled task");
}

}  // namespace brwlab::cli
