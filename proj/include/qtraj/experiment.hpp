#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qtraj/ensemble.hpp"

namespace qtraj {

// Seed of the fig5 illustrative trajectory, fixed once so the published
// record shows a handful of jumps inside the default horizon (seed 0 gives
// 7 jumps spread over [0.34, 2.45] at gamma = 2, F = 1; see the fig5
// regression test).
inline constexpr std::uint64_t kFig5Seed = 0;
inline constexpr std::uint64_t kDefaultSeed = 42;

enum class OutputFormat { csv, json };

// Raw command-line view of a run.  Optionals distinguish "user said nothing"
// from an explicit value so presets can fill their defaults.
struct ExperimentConfig {
  std::string preset = "custom";
  double g = 1.0;
  std::vector<double> gamma_list;        // empty -> preset default
  std::optional<double> F;               // overrides the F = gamma/2 rule
  std::int64_t trajectories = 10000;
  std::optional<std::uint64_t> base_seed;
  int fock_dim = 16;
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<double> t_star;
  std::string output_path;               // empty -> "<preset>.<format>"
  std::string format = "csv";
  std::optional<double> g_hz;            // set -> emit a physical-seconds column
  int n_samples = 200;
  int workers = 0;
};

struct SweepPoint {
  double gamma = 0.0;
  double F = 0.0;
  double dt = 0.0;  // fully resolved, never 0 here
};

// Everything pinned down: what actually runs, and what gets embedded in the
// output header so the file can reproduce itself.
struct ResolvedConfig {
  std::string preset;
  double g = 1.0;
  std::vector<SweepPoint> sweep;
  std::int64_t trajectories = 10000;
  std::uint64_t base_seed = kDefaultSeed;
  int fock_dim = 16;
  double t_final = std::numbers::pi;
  double t_star = std::numbers::pi / 4.0;
  int n_samples = 200;
  OutputFormat format = OutputFormat::csv;
  std::string output;
  double g_hz = 10000.0;
  bool emit_seconds = false;
  int workers = 0;

  SimParams sim_params(std::size_t i) const {
    SimParams p;
    p.g = g;
    p.F = sweep[i].F;
    p.gamma = sweep[i].gamma;
    p.fock_dim = fock_dim;
    p.dt = sweep[i].dt;
    p.t_final = t_final;
    return p;
  }
};

inline ResolvedConfig resolve(const ExperimentConfig& cfg) {
  static const std::array<const char*, 7> kPresets = {
      "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "custom"};
  if (std::find(kPresets.begin(), kPresets.end(), cfg.preset) == kPresets.end())
    throw InvalidParams("preset: unknown preset '" + cfg.preset +
                        "' (expected fig1..fig6 or custom)");

  ResolvedConfig rc;
  rc.preset = cfg.preset;
  if (!(std::isfinite(cfg.g) && cfg.g >= 0.0))
    throw InvalidParams("g: must be finite and >= 0");
  rc.g = cfg.g;

  std::vector<double> gammas = cfg.gamma_list;
  if (gammas.empty()) {
    if (cfg.preset == "custom")
      throw InvalidParams("gamma: custom runs need at least one --gamma value");
    if (cfg.preset == "fig5")
      gammas = {2.0};
    else
      gammas = {0.02, 0.2, 2.0, 20.0, 200.0};
  }
  for (double gm : gammas)
    if (!(std::isfinite(gm) && gm > 0.0))
      throw InvalidParams(
          "gamma: rates must be positive (the initial field amplitude is "
          "2F/(i gamma))");

  if (cfg.F && !(std::isfinite(*cfg.F) && *cfg.F >= 0.0))
    throw InvalidParams("F: must be finite and >= 0");
  if (cfg.trajectories < 1)
    throw InvalidParams("trajectories: must be >= 1");
  if (cfg.preset == "fig6" && cfg.trajectories < 100)
    throw InvalidParams("trajectories: fig6 averages jump counts, needs >= 100");
  if (cfg.fock_dim < 2) throw InvalidParams("fock-dim: must be >= 2");

  rc.trajectories = cfg.trajectories;
  rc.fock_dim = cfg.fock_dim;
  rc.t_final = cfg.t_final.value_or(std::numbers::pi);
  if (!(std::isfinite(rc.t_final) && rc.t_final > 0.0))
    throw InvalidParams("t-final: must be finite and > 0");
  rc.t_star = cfg.t_star.value_or(std::numbers::pi / 4.0);
  if (cfg.preset == "fig6" &&
      !(std::isfinite(rc.t_star) && rc.t_star > 0.0 && rc.t_star <= rc.t_final))
    throw InvalidParams("t-star: must lie in (0, t_final]");
  if (cfg.n_samples < 2) throw InvalidParams("samples: must be >= 2");
  if (cfg.workers < 0) throw InvalidParams("workers: must be >= 0");
  rc.n_samples = cfg.n_samples;
  rc.workers = cfg.workers;

  if (cfg.format == "csv")
    rc.format = OutputFormat::csv;
  else if (cfg.format == "json")
    rc.format = OutputFormat::json;
  else
    throw InvalidParams("format: must be csv or json");

  rc.base_seed = cfg.base_seed.value_or(
      cfg.preset == "fig5" ? kFig5Seed : kDefaultSeed);
  if (cfg.g_hz) {
    if (!(std::isfinite(*cfg.g_hz) && *cfg.g_hz > 0.0))
      throw InvalidParams("g-hz: must be finite and > 0");
    rc.g_hz = *cfg.g_hz;
    rc.emit_seconds = true;
  }
  rc.output = cfg.output_path.empty()
                  ? cfg.preset + (rc.format == OutputFormat::csv ? ".csv"
                                                                 : ".json")
                  : cfg.output_path;

  rc.sweep.reserve(gammas.size());
  for (double gm : gammas) {
    SimParams sp;
    sp.g = rc.g;
    sp.gamma = gm;
    sp.F = cfg.F ? *cfg.F : 0.5 * gm;
    sp.fock_dim = rc.fock_dim;
    sp.dt = cfg.dt.value_or(0.0);
    sp.t_final = rc.t_final;
    const SimParams rsp = sp.resolved();  // fills dt, enforces the rate rule
    rc.sweep.push_back({rsp.gamma, rsp.F, rsp.dt});
  }
  return rc;
}

// Canonical JSON of a resolved configuration; keys are emitted sorted, so
// the serialization is stable.
inline nlohmann::json config_json(const ResolvedConfig& rc) {
  nlohmann::json j;
  j["preset"] = rc.preset;
  j["g"] = rc.g;
  std::vector<double> gl, fl, dl;
  for (const auto& s : rc.sweep) {
    gl.push_back(s.gamma);
    fl.push_back(s.F);
    dl.push_back(s.dt);
  }
  j["gamma_list"] = gl;
  j["f_list"] = fl;
  j["dt_list"] = dl;
  j["trajectories"] = rc.trajectories;
  j["base_seed"] = rc.base_seed;
  j["fock_dim"] = rc.fock_dim;
  j["t_final"] = rc.t_final;
  j["t_star"] = rc.t_star;
  j["n_samples"] = rc.n_samples;
  j["format"] = rc.format == OutputFormat::csv ? "csv" : "json";
  j["output"] = rc.output;
  j["g_hz"] = rc.g_hz;
  j["emit_seconds"] = rc.emit_seconds;
  j["workers"] = rc.workers;
  return j;
}

inline ResolvedConfig config_from_json(const nlohmann::json& j) {
  ResolvedConfig rc;
  rc.preset = j.at("preset").get<std::string>();
  rc.g = j.at("g").get<double>();
  const auto gl = j.at("gamma_list").get<std::vector<double>>();
  const auto fl = j.at("f_list").get<std::vector<double>>();
  const auto dl = j.at("dt_list").get<std::vector<double>>();
  if (gl.size() != fl.size() || gl.size() != dl.size())
    throw InvalidParams("config header: gamma/f/dt lists disagree in length");
  for (std::size_t i = 0; i < gl.size(); ++i)
    rc.sweep.push_back({gl[i], fl[i], dl[i]});
  rc.trajectories = j.at("trajectories").get<std::int64_t>();
  rc.base_seed = j.at("base_seed").get<std::uint64_t>();
  rc.fock_dim = j.at("fock_dim").get<int>();
  rc.t_final = j.at("t_final").get<double>();
  rc.t_star = j.at("t_star").get<double>();
  rc.n_samples = j.at("n_samples").get<int>();
  rc.format = j.at("format").get<std::string>() == "json" ? OutputFormat::json
                                                          : OutputFormat::csv;
  rc.output = j.at("output").get<std::string>();
  rc.g_hz = j.at("g_hz").get<double>();
  rc.emit_seconds = j.at("emit_seconds").get<bool>();
  rc.workers = j.at("workers").get<int>();
  return rc;
}

struct TableData {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Single-trajectory table shared by fig5 and `custom --trajectories 1`:
// grid samples interleaved with one row per detector click (is_jump = 1,
// entropy of the post-jump state).  A click lands before the grid row when
// both fall on the same step.
inline void trajectory_rows(const ResolvedConfig& rc, double gamma,
                            const TrajectoryRecord& rec,
                            std::vector<std::vector<double>>& rows) {
  struct Entry {
    double t, entropy, count, is_jump;
  };
  std::vector<Entry> entries;
  entries.reserve(rec.times.size() + rec.jump_times.size());
  for (std::size_t i = 0; i < rec.times.size(); ++i)
    entries.push_back({rec.times[i], entanglement_entropy(rec.states[i]),
                       double(jump_count(rec, rec.times[i])), 0.0});
  for (std::size_t k = 0; k < rec.jump_times.size(); ++k)
    entries.push_back({rec.jump_times[k],
                       entanglement_entropy(rec.jump_states[k]),
                       double(k + 1), 1.0});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) {
                     if (a.t != b.t) return a.t < b.t;
                     return a.is_jump > b.is_jump;
                   });
  for (const auto& e : entries) {
    std::vector<double> row{gamma, e.t};
    if (rc.emit_seconds) row.push_back(e.t / rc.g_hz);
    row.push_back(e.entropy);
    row.push_back(e.count);
    row.push_back(e.is_jump);
    rows.push_back(std::move(row));
  }
}

}  // namespace detail

// Runs the whole sweep and assembles the output table.  Progress notes (one
// line per sweep point) go to *progress when given.
inline TableData compute_table(const ResolvedConfig& rc,
                               std::ostream* progress = nullptr) {
  TableData td;
  const bool sec = rc.emit_seconds;
  auto time_cols = [&](std::vector<std::string> tail) {
    std::vector<std::string> cols{"gamma", "t"};
    if (sec) cols.push_back("t_seconds");
    cols.insert(cols.end(), tail.begin(), tail.end());
    return cols;
  };

  const bool single_traj =
      rc.preset == "fig5" || (rc.preset == "custom" && rc.trajectories == 1);
  if (rc.preset == "fig1")
    td.columns = time_cols({"delta", "delta_s", "delta_f", "F_c"});
  else if (rc.preset == "fig2" || rc.preset == "fig4")
    td.columns = time_cols({"bloch_x", "bloch_z"});
  else if (rc.preset == "fig3")
    td.columns = time_cols({"e_mean", "e_sem"});
  else if (single_traj)
    td.columns = time_cols({"entropy", "jump_count", "is_jump"});
  else if (rc.preset == "fig6") {
    td.columns = {"gamma", "t_star"};
    if (sec) td.columns.push_back("t_star_seconds");
    for (const char* c : {"entropy_before", "entropy_after", "delta_e",
                          "mean_jump_count", "e_leak"})
      td.columns.push_back(c);
  } else {  // custom ensemble
    td.columns = time_cols({"delta", "delta_s", "delta_f", "F_c", "bloch_x",
                            "bloch_y", "bloch_z", "e_mean", "e_sem", "o_mean",
                            "o_sem"});
  }

  const std::vector<double> grid = uniform_times(rc.n_samples, rc.t_final);
  for (std::size_t i = 0; i < rc.sweep.size(); ++i) {
    const SimParams sp = rc.sim_params(i);
    const double gamma = sp.gamma;
    const auto started = std::chrono::steady_clock::now();
    if (progress)
      *progress << "[" << (i + 1) << "/" << rc.sweep.size()
                << "] gamma = " << gamma << ", F = " << sp.F
                << ", dt = " << sp.dt << std::endl;
    try {
      if (rc.preset == "fig4") {
        const auto states = no_jump_trajectory(sp, grid);
        for (std::size_t k = 0; k < states.size(); ++k) {
          const BlochVector b = bloch_vector(atom_density(states[k]));
          std::vector<double> row{gamma, grid[k]};
          if (sec) row.push_back(grid[k] / rc.g_hz);
          row.push_back(b.x);
          row.push_back(b.z);
          td.rows.push_back(std::move(row));
        }
      } else if (single_traj) {
        const TrajectoryRecord rec = run_trajectory(sp, rc.base_seed, grid);
        detail::trajectory_rows(rc, gamma, rec, td.rows);
      } else if (rc.preset == "fig6") {
        const LeapAnalysis la =
            leaked_information(sp, rc.t_star, rc.trajectories, rc.base_seed);
        std::vector<double> row{gamma, la.t_star};
        if (sec) row.push_back(la.t_star / rc.g_hz);
        row.insert(row.end(), {la.entropy_before, la.entropy_after, la.delta_e,
                               la.mean_jump_count, la.e_leak});
        td.rows.push_back(std::move(row));
      } else {
        const EnsembleResult er = run_ensemble(sp, rc.trajectories,
                                               rc.base_seed, grid, rc.workers);
        const Complex alpha = sp.steady_alpha();
        for (std::size_t k = 0; k < er.sample_times.size(); ++k) {
          const double t = er.sample_times[k];
          std::vector<double> row{gamma, t};
          if (sec) row.push_back(t / rc.g_hz);
          if (rc.preset == "fig3") {
            row.push_back(er.mean_entropy[k]);
            row.push_back(er.sem_entropy[k]);
          } else {
            const DensityMatrix& rho = er.mean_density[k];
            const DensityMatrix rho_s = partial_trace(rho, Subsystem::atom);
            const DensityMatrix rho_f = partial_trace(rho, Subsystem::field);
            if (rc.preset == "fig1") {
              row.insert(row.end(),
                         {purity(rho), purity(rho_s), purity(rho_f),
                          coherent_fidelity(rho_f, alpha)});
            } else if (rc.preset == "fig2") {
              const BlochVector b = bloch_vector(rho_s);
              row.insert(row.end(), {b.x, b.z});
            } else {  // custom ensemble
              const BlochVector b = bloch_vector(rho_s);
              row.insert(row.end(),
                         {purity(rho), purity(rho_s), purity(rho_f),
                          coherent_fidelity(rho_f, alpha), b.x, b.y, b.z,
                          er.mean_entropy[k], er.sem_entropy[k],
                          er.mean_jump_count[k], er.sem_jump_count[k]});
            }
          }
          td.rows.push_back(std::move(row));
        }
      }
    } catch (const TruncationError& e) {
      throw TruncationError("gamma = " + detail::format_full(gamma) + ": " +
                            e.what());
    }
    if (progress) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        started)
              .count();
      *progress << "    done in " << secs << " s" << std::endl;
    }
  }
  return td;
}

inline std::string render_output(const ResolvedConfig& rc,
                                 const TableData& td) {
  if (rc.format == OutputFormat::csv) {
    std::string out = "# " + config_json(rc).dump() + "\n";
    for (std::size_t c = 0; c < td.columns.size(); ++c) {
      if (c) out += ',';
      out += td.columns[c];
    }
    out += '\n';
    for (const auto& row : td.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ',';
        out += detail::format_full(row[c]);
      }
      out += '\n';
    }
    return out;
  }
  nlohmann::json j;
  j["config"] = config_json(rc);
  j["columns"] = td.columns;
  j["rows"] = td.rows;
  return j.dump() + "\n";
}

// The part of a file that must be byte-identical on replay: everything
// after the header line for CSV, the columns+rows serialization for JSON.
inline std::string data_section(const std::string& contents) {
  if (!contents.empty() && contents[0] == '#')
    return contents.substr(contents.find('\n') + 1);
  const nlohmann::json j = nlohmann::json::parse(contents);
  nlohmann::json d;
  d["columns"] = j.at("columns");
  d["rows"] = j.at("rows");
  return d.dump();
}

inline ResolvedConfig parse_embedded_config(const std::string& contents) {
  if (!contents.empty() && contents[0] == '#') {
    const std::size_t eol = contents.find('\n');
    return config_from_json(
        nlohmann::json::parse(contents.substr(1, eol - 1)));
  }
  return config_from_json(nlohmann::json::parse(contents).at("config"));
}

// Reproducibility check used by tests: re-run the configuration a file
// says it was made with, and return (original, recomputed) data sections.
inline std::pair<std::string, std::string> replay_output(
    const std::string& contents) {
  const ResolvedConfig rc = parse_embedded_config(contents);
  const TableData td = compute_table(rc);
  return {data_section(contents), data_section(render_output(rc, td))};
}

// Full resolved-config echo as required before any run.
inline std::string validate_and_echo(const ExperimentConfig& cfg) {
  return config_json(resolve(cfg)).dump();
}

// Resolve, echo, compute, write.  Throws InvalidParams for anything wrong
// with the configuration (including an unwritable output path) and
// TruncationError when a run left the valid Fock window.
inline void run_preset(const ExperimentConfig& cfg, std::ostream& echo_to,
                       std::ostream* progress = nullptr) {
  const ResolvedConfig rc = resolve(cfg);
  echo_to << config_json(rc).dump() << std::endl;
  const TableData td = compute_table(rc, progress);
  std::ofstream f(rc.output, std::ios::binary);
  if (!f) throw InvalidParams("output: cannot open '" + rc.output +
                              "' for writing");
  f << render_output(rc, td);
  f.close();
  if (!f) throw InvalidParams("output: failed writing '" + rc.output + "'");
}

}  // namespace qtraj
