#include "npsd/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "npsd/io.hpp"

namespace npsd::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const InvalidNetwork& e) {
    err << "error: invalid network\n";
    for (const auto& v : e.violations()) err << v.entity << ": " << v.message << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
}

fs::path output_dir(const std::optional<fs::path>& flag) {
  fs::path dir = ".";
  if (flag) dir = *flag;
  else if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

void write_manifest(const RunManifest& m) {
  ordered_json j;
  j["command"] = m.command;
  j["config"] = m.config.string();
  j["output_dir"] = m.output_dir.string();
  j["format_version"] = m.format_version;
  write_text_file(m.output_dir / "manifest.json", dump(j));
}

template <class Ids>
ordered_json keyed(const Ids& items, std::span<const double> values) {
  ordered_json j = ordered_json::object();
  for (std::size_t i = 0; i < values.size(); ++i) j[items[i].id] = round12(values[i]);
  return j;
}

ScenarioSpec load_spec(const fs::path& path) {
  const auto cfg = load_scenario_config(path);
  return build_scenario(cfg, path.parent_path());
}

}  // namespace

int cmd_validate(const fs::path& network, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto data = load_network_file(network);
    const auto violations = validate(data);
    for (const auto& v : violations) out << v.entity << ": " << v.message << '\n';
    if (!violations.empty()) return kExitDomain;
    out << "ok: " << data.links.size() << " links, " << data.od_pairs.size() << " OD pairs, "
        << data.routes.size() << " routes\n";
    return kExitOk;
  });
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto spec = load_spec(opt.scenario);

    std::vector<CapacityReduction> reductions;
    if (opt.cap_link) {
      spec.network.link_index(*opt.cap_link);
      for (const auto& r : spec.reductions)
        if (r.link == *opt.cap_link) reductions.push_back(r);
      if (reductions.empty()) reductions.push_back({*opt.cap_link, 0.0, 0, 0});
    } else {
      reductions = spec.reductions;
    }
    if (opt.cap_fraction) {
      if (!(*opt.cap_fraction >= 0.0 && *opt.cap_fraction < 1.0))
        throw std::invalid_argument("--cap-fraction must lie in [0, 1)");
      for (auto& r : reductions) r.fraction = *opt.cap_fraction;
    }
    if (opt.theta && !(*opt.theta > 0.0)) throw std::invalid_argument("--theta must be > 0");

    const auto run = simulate(spec, opt.theta, reductions);
    const auto& rec = run.trajectory;
    const auto& last = rec.states.back();

    const auto dir = output_dir(opt.out);
    std::ostringstream csv;
    write_trajectory_csv(csv, spec.network, rec);
    write_text_file(dir / "trajectory.csv", csv.str());

    ordered_json s;
    s["format"] = kFormatVersion;
    s["theta"] = round12(run.cell.theta);
    s["reductions"] = ordered_json::array();
    for (const auto& r : reductions) {
      if (r.fraction <= 0.0) continue;
      s["reductions"].push_back(
          {{"link", r.link}, {"fraction", round12(r.fraction)}, {"first_day", r.first_day}, {"last_day", r.last_day}});
    }
    s["termination"] = to_string(rec.termination.kind);
    s["days"] = rec.termination.day;
    if (rec.termination.kind == Termination::Cycle) {
      s["period"] = rec.termination.period;
      s["cycle_residual"] = round12(rec.termination.cycle_residual);
    }
    s["ad"] = round12(run.cell.ad);
    s["final_day"] = last.day;
    s["final_flows"] = keyed(spec.network.routes(), last.flows);
    s["final_link_flows"] = keyed(spec.network.links(), link_flows(spec.network, last));
    write_text_file(dir / "summary.json", dump(s));
    write_manifest({"simulate", opt.scenario, dir, kFormatVersion});

    out << to_string(rec.termination.kind) << " day " << rec.termination.day << " ad "
        << format_number(run.cell.ad) << '\n';
    return kExitOk;
  });
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.jobs < 1) throw std::invalid_argument("--jobs must be >= 1");
    const auto spec = load_spec(opt.scenario);
    const auto res = opt.jobs == 1 ? run_sweep_serial(spec) : run_sweep(spec, opt.jobs);

    const auto dir = output_dir(opt.out);
    std::ostringstream csv;
    write_sweep_csv(csv, res.cells, res.phases);
    write_text_file(dir / "sweep.csv", csv.str());
    write_text_file(dir / "sweep.json", dump(sweep_to_json(res.cells, res.phases)));
    std::ostringstream phase_csv;
    write_phase_csv(phase_csv, res.phases);
    write_text_file(dir / "phases.csv", phase_csv.str());
    write_text_file(dir / "phases.json", dump(phases_to_json(res.phases)));
    write_manifest({"sweep", opt.scenario, dir, kFormatVersion});

    std::size_t failed = 0;
    for (const auto& c : res.cells) failed += c.error.has_value();
    out << res.cells.size() << " cells, " << failed << " failed\n";
    write_phase_csv(out, res.phases);
    return kExitOk;
  });
}

int cmd_classify(const fs::path& sweep_csv, double ad_tol, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(ad_tol >= 0.0)) throw std::invalid_argument("--ad-tol must be >= 0");
    std::ifstream in(sweep_csv);
    if (!in) throw IoError("cannot read " + sweep_csv.string());
    const auto cells = read_sweep_csv(in);
    write_phase_csv(out, classify_sweep(cells, ad_tol));
    return kExitOk;
  });
}

int cmd_ue(const UeOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(opt.tol >= 0.0)) throw std::invalid_argument("--tol must be >= 0");
    const Network net(load_network_file(opt.network));
    const auto sol = solve_ue_oracle(net, opt.tol, opt.max_iters);
    const auto C = route_costs_at(net, sol.flows.flows);
    const auto check = is_wardrop_ue(net, sol.flows, std::max(opt.tol, 1e-9) * 1e3);

    ordered_json j;
    j["format"] = kFormatVersion;
    j["relative_gap"] = round12(sol.relative_gap);
    j["iterations"] = sol.iterations;
    j["converged"] = sol.converged;
    j["is_wardrop_ue"] = check.is_ue;
    j["link_flows"] = keyed(net.links(), sol.link_flows);
    j["route_flows"] = keyed(net.routes(), sol.flows.flows);
    j["route_costs"] = keyed(net.routes(), C);
    j["min_costs"] = keyed(net.od_pairs(), check.min_costs);
    out << dump(j);
    if (!sol.converged) {
      err << "error: relative gap " << format_number(sol.relative_gap) << " above tolerance "
          << format_number(opt.tol) << " after " << sol.iterations << " iterations\n";
      return kExitDomain;
    }
    return kExitOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Day-to-day route-swapping dynamics lab"};
  app.require_subcommand(1);

  std::string network_path;
  auto* validate_cmd = app.add_subcommand("validate", "Check a network file");
  validate_cmd->add_option("network", network_path, "Network JSON")->required();

  SimulateOptions sim;
  std::string sim_out;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one trajectory");
  simulate_cmd->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  simulate_cmd->add_option("--theta", sim.theta, "Sensitivity, overrides the config");
  simulate_cmd->add_option("--cap-link", sim.cap_link, "Link whose capacity is reduced");
  simulate_cmd->add_option("--cap-fraction", sim.cap_fraction, "Capacity reduction fraction");
  simulate_cmd->add_option("--out", sim.out, "Output directory");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run the (theta, cap) grid");
  sweep_cmd->add_option("scenario", sweep.scenario, "Scenario JSON")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Worker threads")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out, "Output directory");

  std::string sweep_csv;
  double ad_tol = kDefaultAdTol;
  auto* classify_cmd = app.add_subcommand("classify", "Phase labels from a sweep CSV");
  classify_cmd->add_option("sweep_csv", sweep_csv, "Sweep CSV")->required();
  classify_cmd->add_option("--ad-tol", ad_tol, "AD threshold")->capture_default_str();

  UeOptions ue;
  auto* ue_cmd = app.add_subcommand("ue", "Solve the user equilibrium");
  ue_cmd->add_option("network", ue.network, "Network JSON")->required();
  ue_cmd->add_option("--tol", ue.tol, "Relative gap tolerance")->capture_default_str();
  ue_cmd->add_option("--max-iters", ue.max_iters, "Iteration limit")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front())
      err << sub->help();
    return kExitIo;
  }

  if (validate_cmd->parsed()) return cmd_validate(network_path, out, err);
  if (simulate_cmd->parsed()) return cmd_simulate(sim, out, err);
  if (sweep_cmd->parsed()) return cmd_sweep(sweep, out, err);
  if (classify_cmd->parsed()) return cmd_classify(sweep_csv, ad_tol, out, err);
  return cmd_ue(ue, out, err);
}

}  // namespace npsd::cli
