// Command-line front end: scenario ingestion, pipeline orchestration, and
// result export. Verbs: run, tomography, decay-scan, export-defaults.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qnode/analyzer.hpp"
#include "qnode/coincidence.hpp"
#include "qnode/memory.hpp"
#include "qnode/pipeline.hpp"
#include "qnode/scenario.hpp"
#include "qnode/tomography.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qnode;

namespace {

// Seed-stream tags for per-setting / per-tau sub-runs. Fixed values are part
// of the reproducibility contract.
constexpr std::uint64_t kSettingSeedTag = 0x5e;
constexpr std::uint64_t kTauSeedTag = 0x7a;

struct GlobalOpts {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> shards;
  std::string out_dir = ".";
  std::string format = "csv";
};

void add_common(CLI::App* cmd, GlobalOpts& g) {
  cmd->add_option("--scenario", g.scenario_path,
                  "Scenario file; omitted = built-in defaults");
  cmd->add_option("--seed", g.seed, "Override run.seed");
  cmd->add_option("--shards", g.shards, "Override run.shards");
  cmd->add_option("--out", g.out_dir, "Output directory (created if missing)");
  cmd->add_option("--format", g.format, "Table export format")
      ->check(CLI::IsMember({"csv", "json-lines"}));
}

Scenario load(const GlobalOpts& g) {
  Scenario sc;
  if (!g.scenario_path.empty()) sc = load_scenario(g.scenario_path);
  if (g.seed) sc.run.seed = *g.seed;
  if (g.shards) sc.run.shards = *g.shards;
  sc.validate();
  return sc;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << content;
  if (!os.flush())
    throw std::runtime_error("write failed: " + path.string());
}

struct Metric {
  std::string name;
  json value;
};

std::string table_ext(const std::string& format) {
  return format == "csv" ? ".csv" : ".jsonl";
}

std::string render_metrics(const std::vector<Metric>& metrics,
                           const std::string& format) {
  std::ostringstream os;
  if (format == "csv") {
    os << "metric,value\n";
    for (const auto& m : metrics) {
      os << m.name << ',';
      if (m.value.is_string())
        os << m.value.get<std::string>();
      else
        os << m.value.dump();
      os << '\n';
    }
  } else {
    for (const auto& m : metrics)
      os << json{{"metric", m.name}, {"value", m.value}}.dump() << '\n';
  }
  return os.str();
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::string tags_to_string(const std::vector<TimeTag>& tags) {
  std::ostringstream os;
  write_tags(os, tags);
  return os.str();
}

int cmd_run(const GlobalOpts& g) {
  Scenario sc = load(g);
  fs::create_directories(g.out_dir);
  const fs::path out(g.out_dir);

  PipelineResult r = run_pipeline(sc);
  const double base = analysis_base_offset(sc);
  const bool heralded = sc.analysis.mode == AnalysisMode::heralded_g2;

  write_file(out / "tags_idler.txt", tags_to_string(r.idler));
  write_file(out / "tags_signal.txt", tags_to_string(r.signal_a));
  if (heralded)
    write_file(out / "tags_signal_b.txt", tags_to_string(r.signal_b));

  std::vector<TimeTag> signal_all =
      heralded ? merge_sorted(r.signal_a, r.signal_b) : r.signal_a;

  const double lo = std::min(0.0, base) - 5e-6;
  const double hi = std::max(0.0, base) + 5e-6;
  CoincidenceHistogram hist = coincidence_histogram(
      r.idler, signal_all, sc.analysis.coincidence_window / 4.0, lo, hi);
  {
    std::ostringstream os;
    write_histogram_csv(os, hist);
    write_file(out / "histogram.csv", os.str());
  }

  EfficiencyEstimate eff = estimate_efficiency(sc, r.idler, signal_all, base);
  G2Result g2 = g2_cross(r.idler, signal_all, sc.analysis.coincidence_window,
                         base, sc.analysis.accidental_offsets);

  std::vector<Metric> metrics{
      {"duration_s", sc.run.duration},
      {"analysis_mode", to_string(sc.analysis.mode)},
      {"memory_mode", to_string(sc.memory.mode)},
      {"echo_offset_s", base},
      {"idler_counts", static_cast<std::uint64_t>(r.idler.size())},
      {"signal_counts", static_cast<std::uint64_t>(r.signal_a.size())},
      {"idler_rate_hz", static_cast<double>(r.idler.size()) / sc.run.duration},
      {"signal_rate_hz",
       static_cast<double>(signal_all.size()) / sc.run.duration},
      {"coincidence_window_s", sc.analysis.coincidence_window},
      {"efficiency_window_s", eff.window},
      {"coincidences_echo_window", eff.coincidences},
      {"accidentals_mean", eff.accidental_mean},
      {"efficiency_end_to_end", eff.end_to_end},
      {"efficiency_end_to_end_sigma", eff.sigma_end_to_end},
      {"efficiency_internal", eff.internal},
      {"efficiency_internal_sigma", eff.sigma_internal},
      {"efficiency_internal_analytic", eff.analytic_internal},
      {"g2_cross", finite_or_null(g2.value)},
      {"g2_cross_sigma", finite_or_null(g2.std_error)},
      {"g2_cross_unbounded", g2.unbounded},
  };
  G2Result gh;
  if (heralded) {
    gh = heralded_g2(r.idler, r.signal_a, r.signal_b,
                     sc.analysis.coincidence_window, base);
    metrics.push_back(
        {"signal_b_counts", static_cast<std::uint64_t>(r.signal_b.size())});
    metrics.push_back({"heralded_g2", finite_or_null(gh.value)});
    metrics.push_back({"heralded_g2_sigma", finite_or_null(gh.std_error)});
    metrics.push_back({"heralded_g2_unbounded", gh.unbounded});
  }
  write_file(out / ("summary" + table_ext(g.format)),
             render_metrics(metrics, g.format));

  std::printf("run complete: %.6g s simulated\n", sc.run.duration);
  std::printf("  idler counts        %zu (%.1f /s)\n", r.idler.size(),
              static_cast<double>(r.idler.size()) / sc.run.duration);
  std::printf("  signal counts       %zu (%.1f /s)\n", signal_all.size(),
              static_cast<double>(signal_all.size()) / sc.run.duration);
  std::printf("  echo offset         %.6g s\n", base);
  std::printf("  coincidences        %.0f (accidental mean %.2f)\n",
              eff.coincidences, eff.accidental_mean);
  std::printf("  end-to-end eff.     %.4f%% +/- %.4f%%\n",
              100 * eff.end_to_end, 100 * eff.sigma_end_to_end);
  std::printf("  internal echo eff.  %.2f%% +/- %.2f%% (analytic %.2f%%)\n",
              100 * eff.internal, 100 * eff.sigma_internal,
              100 * eff.analytic_internal);
  if (g2.unbounded)
    std::printf("  g2 cross            > %.3g (no accidentals observed)\n",
                eff.coincidences);
  else
    std::printf("  g2 cross            %.3f +/- %.3f\n", g2.value,
                g2.std_error);
  if (heralded) {
    if (gh.unbounded)
      std::printf("  heralded g2         unbounded (no doubles)\n");
    else
      std::printf("  heralded g2         %.4f +/- %.4f\n", gh.value,
                  gh.std_error);
  }
  std::printf("  outputs written to  %s\n", out.string().c_str());
  return 0;
}

const char* slot_name(int k) {
  return k == 0 ? "early" : k == 1 ? "central" : "late";
}

int cmd_tomography(const GlobalOpts& g, const std::string& mode,
                   const std::string& compare_path) {
  Scenario sc = load(g);
  if (sc.analysis.mode != AnalysisMode::franson)
    throw std::runtime_error(
        "tomography requires analysis.mode = franson (both analyzers active)");
  fs::create_directories(g.out_dir);
  const fs::path out(g.out_dir);
  const bool want_raw = mode != "corrected";
  const bool want_corr = mode != "raw" || !compare_path.empty();

  const double base = analysis_base_offset(sc);
  const double delay = sc.analyzer_idler.delay;
  const auto settings = default_settings();

  TomographyCounts counts;
  for (size_t k = 0; k < settings.size(); ++k) {
    const auto& st = settings[k];
    Scenario run_sc = sc;
    run_sc.analyzer_idler.phase_over_pi += st.phase_idler / std::numbers::pi;
    run_sc.analyzer_signal.phase_over_pi += st.phase_signal / std::numbers::pi;
    std::uint64_t seed = Rng(sc.run.seed).derive(kSettingSeedTag, k).next_u64();
    PipelineResult r = run_pipeline(run_sc, seed);

    SettingCounts entry;
    entry.setting = st;
    entry.duration = sc.run.duration;
    entry.cells = franson_postselect(r.idler, r.signal_a, delay,
                                     sc.analysis.slot_window, base);
    FransonCounts acc{};
    for (double off : sc.analysis.accidental_offsets) {
      FransonCounts one = franson_postselect(r.idler, r.signal_a, delay,
                                             sc.analysis.slot_window,
                                             base + off);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) acc.cells[a][b] += one.cells[a][b];
    }
    const auto n_off =
        static_cast<double>(sc.analysis.accidental_offsets.size());
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) acc.cells[a][b] /= n_off;
    entry.accidentals = acc;
    counts.settings.push_back(std::move(entry));
    std::printf("setting %-3s: %.0f coincidences (accidental %.1f)\n",
                st.label.c_str(), counts.settings.back().cells.total(),
                counts.settings.back().accidentals.total());
  }

  std::optional<TomographyCounts> corrected;
  if (want_corr)
    corrected = correct_counts(counts, sc.analyzer_idler.to_mz(),
                               sc.analyzer_signal.to_mz());

  // Counts table export.
  {
    std::ostringstream os;
    if (g.format == "csv") {
      os << "setting,phase_idler_rad,phase_signal_rad,slot_idler,slot_signal,"
            "counts,accidental,corrected\n";
    }
    char buf[64];
    for (size_t k = 0; k < counts.settings.size(); ++k) {
      const auto& e = counts.settings[k];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          double corr =
              corrected ? corrected->settings[k].cells.cells[a][b] : 0.0;
          if (g.format == "csv") {
            os << e.setting.label << ',';
            std::snprintf(buf, sizeof buf, "%.12g", e.setting.phase_idler);
            os << buf << ',';
            std::snprintf(buf, sizeof buf, "%.12g", e.setting.phase_signal);
            os << buf << ',' << slot_name(a) << ',' << slot_name(b) << ',';
            std::snprintf(buf, sizeof buf, "%.12g", e.cells.cells[a][b]);
            os << buf << ',';
            std::snprintf(buf, sizeof buf, "%.12g", e.accidentals.cells[a][b]);
            os << buf << ',';
            std::snprintf(buf, sizeof buf, "%.12g", corr);
            os << buf << '\n';
          } else {
            json row{{"setting", e.setting.label},
                     {"phase_idler_rad", e.setting.phase_idler},
                     {"phase_signal_rad", e.setting.phase_signal},
                     {"slot_idler", slot_name(a)},
                     {"slot_signal", slot_name(b)},
                     {"counts", e.cells.cells[a][b]},
                     {"accidental", e.accidentals.cells[a][b]}};
            if (corrected) row["corrected"] = corr;
            os << row.dump() << '\n';
          }
        }
    }
    write_file(out / ("tomography_counts" + table_ext(g.format)), os.str());
  }

  const DensityMatrix target = ket_phi_plus();
  std::vector<Metric> metrics;
  auto report = [&](const char* label, const TomographyCounts& c,
                    const char* file_prefix) {
    DensityMatrix rho_lin = reconstruct_two_qubit(c);
    DensityMatrix rho = mle_refine(c, rho_lin);
    write_file(out / (std::string(file_prefix) + "_linear.txt"),
               serialize_matrix(rho_lin.mat()));
    write_file(out / (std::string(file_prefix) + ".txt"),
               serialize_matrix(rho.mat()));
    double f_lin = fidelity(rho_lin, target);
    double f_mle = fidelity(rho, target);
    BasisVisibilities v = conditional_visibilities(c);
    double f1q = average_one_qubit_fidelity(v);
    metrics.push_back({std::string("f2q_") + label + "_linear", f_lin});
    metrics.push_back({std::string("f2q_") + label, f_mle});
    metrics.push_back({std::string("f1q_") + label, f1q});
    metrics.push_back({std::string("v_z_") + label, v.v_z});
    metrics.push_back({std::string("v_x_") + label, v.v_x});
    metrics.push_back({std::string("v_y_") + label, v.v_y});
    std::printf("%-9s F2Q %.4f (linear %.4f)   F1Q %.4f   V=(%.3f, %.3f, %.3f)\n",
                label, f_mle, f_lin, f1q, v.v_z, v.v_x, v.v_y);
    return rho;
  };

  if (want_raw) report("raw", counts, "rho_raw");
  std::optional<DensityMatrix> rho_corr;
  if (want_corr) rho_corr = report("corrected", *corrected, "rho_corrected");

  if (!compare_path.empty()) {
    std::ifstream is(compare_path);
    if (!is)
      throw std::runtime_error("cannot open reference state: " + compare_path);
    DensityMatrix ref{parse_matrix(std::string(
        std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()))};
    double fio = input_output_fidelity(ref, *rho_corr);
    metrics.push_back({"io_fidelity", fio});
    std::printf("input/output fidelity vs %s: %.4f\n", compare_path.c_str(),
                fio);
  }

  write_file(out / ("fidelity_report" + table_ext(g.format)),
             render_metrics(metrics, g.format));
  std::printf("outputs written to %s\n", out.string().c_str());
  return 0;
}

int cmd_decay_scan(const GlobalOpts& g, std::vector<double> taus,
                   bool analytic) {
  Scenario sc = load(g);
  if (sc.memory.mode != MemoryMode::afc)
    throw std::runtime_error("decay-scan requires memory.mode = afc");
  if (taus.empty())
    for (int k = 1; k <= 14; ++k) taus.push_back(2e-6 * k);
  for (size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0) || !std::isfinite(taus[i]))
      throw std::runtime_error("decay-scan: delays must be positive");
    if (i > 0 && taus[i] <= taus[i - 1])
      throw std::runtime_error("decay-scan: delays must be ascending");
  }
  fs::create_directories(g.out_dir);
  const fs::path out(g.out_dir);

  std::vector<double> etas(taus.size()), sigmas(taus.size());
  for (size_t i = 0; i < taus.size(); ++i) {
    if (analytic) {
      etas[i] = afc_efficiency(taus[i], sc.memory.eta0, sc.memory.t2_eff);
      sigmas[i] = std::max(etas[i] * 1e-3, 1e-12);
    } else {
      Scenario run_sc = sc;
      run_sc.memory.comb_period_delta = 1.0 / taus[i];
      std::uint64_t seed = Rng(sc.run.seed).derive(kTauSeedTag, i).next_u64();
      PipelineResult r = run_pipeline(run_sc, seed);
      std::vector<TimeTag> signal_all =
          sc.analysis.mode == AnalysisMode::heralded_g2
              ? merge_sorted(r.signal_a, r.signal_b)
              : r.signal_a;
      EfficiencyEstimate e =
          estimate_efficiency(run_sc, r.idler, signal_all,
                              analysis_base_offset(run_sc));
      sigmas[i] = e.sigma_internal > 0 ? e.sigma_internal : 1e-6;
      // The fit needs positive efficiencies; a nonpositive net estimate is
      // kept as a negligible-weight floor instead of being dropped.
      etas[i] = e.internal > 0 ? e.internal : sigmas[i] * 0.1;
    }
    std::printf("tau %8.3g s: efficiency %.4f%% +/- %.4f%%\n", taus[i],
                100 * etas[i], 100 * sigmas[i]);
  }

  FitResult fit = fit_exponential_decay(taus, etas, sigmas);
  write_file(out / "decay_fit.txt", serialize_fit_result(fit));
  {
    std::ostringstream os;
    char buf[64];
    if (g.format == "csv") {
      os << "tau_s,efficiency,sigma\n";
      for (size_t i = 0; i < taus.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g", taus[i]);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.12g", etas[i]);
        os << buf << ',';
        std::snprintf(buf, sizeof buf, "%.12g", sigmas[i]);
        os << buf << '\n';
      }
    } else {
      for (size_t i = 0; i < taus.size(); ++i)
        os << json{{"tau_s", taus[i]},
                   {"efficiency", etas[i]},
                   {"sigma", sigmas[i]}}
                  .dump()
           << '\n';
    }
    write_file(out / ("decay_points" + table_ext(g.format)), os.str());
  }
  std::printf("fit: eta0 %.4f +/- %.4f, t2_eff %.4g +/- %.3g s (%s)\n",
              fit.eta0, std::sqrt(fit.covariance(0, 0)), fit.t2_eff,
              std::sqrt(fit.covariance(1, 1)),
              fit.converged ? "converged" : "NOT converged");
  std::printf("outputs written to %s\n", out.string().c_str());
  return 0;
}

int cmd_export_defaults(const GlobalOpts& g, bool to_file) {
  std::string text = annotated_default_scenario();
  if (to_file) {
    fs::create_directories(g.out_dir);
    write_file(fs::path(g.out_dir) / "default.scenario", text);
    std::printf("wrote %s\n",
                (fs::path(g.out_dir) / "default.scenario").string().c_str());
  } else {
    std::fputs(text.c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fibre-integrated quantum-memory node simulator"};
  app.require_subcommand(1);

  GlobalOpts g_run, g_tomo, g_decay, g_export;
  CLI::App* run = app.add_subcommand(
      "run", "Simulate a scenario; export tag streams, histogram, summary");
  add_common(run, g_run);

  CLI::App* tomo = app.add_subcommand(
      "tomography", "Four-setting state reconstruction and fidelity report");
  add_common(tomo, g_tomo);
  std::string tomo_mode = "both";
  std::string compare_path;
  tomo->add_option("--mode", tomo_mode, "Which reconstructions to report")
      ->check(CLI::IsMember({"raw", "corrected", "both"}));
  tomo->add_option("--compare", compare_path,
                   "Reference state file; reports fidelity of the corrected "
                   "state against it");

  CLI::App* decay = app.add_subcommand(
      "decay-scan", "Echo efficiency vs storage time plus decay-law fit");
  add_common(decay, g_decay);
  std::vector<double> taus;
  bool analytic = false;
  decay->add_option("--taus", taus, "Storage times in seconds")
      ->delimiter(',');
  decay->add_flag("--analytic", analytic,
                  "Closed-form efficiencies instead of event simulation");

  CLI::App* defaults = app.add_subcommand(
      "export-defaults", "Print the annotated default scenario");
  add_common(defaults, g_export);
  bool defaults_to_file = false;
  defaults->add_flag("--write", defaults_to_file,
                     "Write <out>/default.scenario instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(g_run);
    if (tomo->parsed()) return cmd_tomography(g_tomo, tomo_mode, compare_path);
    if (decay->parsed()) return cmd_decay_scan(g_decay, taus, analytic);
    if (defaults->parsed()) return cmd_export_defaults(g_export, defaults_to_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
