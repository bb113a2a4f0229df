#include "npsd/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace npsd {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <class J>
void reject_unknown_keys(const J& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw IoError(std::string(where) + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw IoError(std::string(where) + ": unknown key '" + it.key() + "'");
  }
}

template <class T, class J>
T get_or(const J& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).template get<T>();
}

std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw IoError("identifiers must be strings");
}

// Wraps nlohmann type/range errors as parse failures.
template <class F>
auto parse_guard(const char* what, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw IoError(std::string(what) + ": " + e.what());
  }
}

int decimal_places(double x) {
  for (int d = 0; d <= 12; ++d) {
    const double scaled = x * std::pow(10.0, d);
    if (std::abs(scaled - std::round(scaled)) <= 1e-9 * std::max(1.0, std::abs(scaled))) return d;
  }
  return -1;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, const char* what) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw IoError(std::string("bad number for ") + what + ": '" + s + "'");
  }
  if (used != s.size()) throw IoError(std::string("bad number for ") + what + ": '" + s + "'");
  return v;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

double round12(double x) {
  if (!std::isfinite(x)) return x;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

std::vector<double> GridSpec::values() const {
  if (const auto* list = std::get_if<std::vector<double>>(&form)) return *list;
  const auto& r = std::get<GridRange>(form);
  if (!(r.step > 0.0)) throw std::invalid_argument("grid step must be > 0");
  if (!(r.stop >= r.start)) throw std::invalid_argument("grid stop must be >= start");

  std::vector<double> out;
  const int d = std::max({decimal_places(r.start), decimal_places(r.step), decimal_places(r.stop)});
  if (decimal_places(r.start) >= 0 && decimal_places(r.step) >= 0 && decimal_places(r.stop) >= 0) {
    const double scale = std::pow(10.0, d);
    const auto s = std::llround(r.start * scale);
    const auto p = std::llround(r.step * scale);
    const auto e = std::llround(r.stop * scale);
    for (long long i = s; i <= e; i += p) out.push_back(static_cast<double>(i) / scale);
    return out;
  }
  const auto n = static_cast<std::size_t>(std::floor((r.stop - r.start) / r.step + 1e-9)) + 1;
  for (std::size_t i = 0; i < n; ++i) out.push_back(r.start + static_cast<double>(i) * r.step);
  return out;
}

NetworkData network_from_json(const json& j) {
  return parse_guard("network", [&] {
    reject_unknown_keys(j, {"links", "od_pairs", "routes"}, "network");
    NetworkData data;
    for (const auto& l : j.at("links"))
      data.links.push_back({id_string(l.at("id")), l.at("free_flow_time").get<double>(),
                            l.at("capacity").get<double>()});
    for (const auto& w : j.at("od_pairs"))
      data.od_pairs.push_back({id_string(w.at("id")), id_string(w.at("origin")),
                               id_string(w.at("destination")), w.at("demand").get<double>()});
    for (const auto& r : j.at("routes")) {
      Route route{id_string(r.at("id")), id_string(r.at("od_pair")), {}};
      for (const auto& l : r.at("links")) route.links.push_back(id_string(l));
      data.routes.push_back(std::move(route));
    }
    return data;
  });
}

ordered_json network_to_json(const NetworkData& data) {
  ordered_json j;
  j["links"] = ordered_json::array();
  for (const auto& l : data.links)
    j["links"].push_back({{"id", l.id}, {"free_flow_time", l.free_flow_time}, {"capacity", l.capacity}});
  j["od_pairs"] = ordered_json::array();
  for (const auto& w : data.od_pairs)
    j["od_pairs"].push_back(
        {{"id", w.id}, {"origin", w.origin}, {"destination", w.destination}, {"demand", w.demand}});
  j["routes"] = ordered_json::array();
  for (const auto& r : data.routes)
    j["routes"].push_back({{"id", r.id}, {"od_pair", r.od_pair}, {"links", r.links}});
  return j;
}

ordered_json parse_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return ordered_json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

NetworkData load_network_file(const std::filesystem::path& path) {
  return network_from_json(json(parse_json_file(path)));
}

ProtocolParams protocol_from_json(const json& j) {
  return parse_guard("protocol", [&] {
    reject_unknown_keys(j, {"variant", "theta", "kappa", "reluctance", "cost_epsilon"}, "protocol");
    ProtocolParams p;
    try {
      p.variant = parse_protocol_variant(j.at("variant").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw IoError(e.what());
    }
    if (j.contains("theta")) {
      const auto& t = j.at("theta");
      if (t.is_number()) {
        p.theta = t.get<double>();
      } else if (t.is_object()) {
        for (auto it = t.begin(); it != t.end(); ++it) {
          if (it.key() == "*") p.theta = it.value().get<double>();
          else p.theta_by_od[it.key()] = it.value().get<double>();
        }
      } else {
        throw IoError("protocol: theta must be a number or an object");
      }
    }
    p.kappa = get_or(j, "kappa", 0.0);
    p.reluctance = get_or(j, "reluctance", 0.0);
    p.cost_epsilon = get_or(j, "cost_epsilon", 0.0);
    return p;
  });
}

ordered_json protocol_to_json(const ProtocolParams& p) {
  ordered_json j;
  j["variant"] = to_string(p.variant);
  if (!p.theta_by_od.empty()) {
    ordered_json t = ordered_json::object();
    if (p.theta) t["*"] = *p.theta;
    for (const auto& [od, v] : p.theta_by_od) t[od] = v;
    j["theta"] = t;
  } else if (p.theta) {
    j["theta"] = *p.theta;
  }
  j["kappa"] = p.kappa;
  j["reluctance"] = p.reluctance;
  j["cost_epsilon"] = p.cost_epsilon;
  return j;
}

StepperConfig stepper_from_json(const json& j) {
  return parse_guard("stepper", [&] {
    reject_unknown_keys(j, {"max_days", "convergence_tol", "mode", "euler_step", "record_every",
                            "tail_window", "stop_on_convergence", "cycle"},
                        "stepper");
    StepperConfig s;
    s.stop_on_convergence = false;
    s.max_days = get_or<std::size_t>(j, "max_days", s.max_days);
    s.convergence_tol = get_or(j, "convergence_tol", s.convergence_tol);
    if (j.contains("mode")) {
      try {
        s.mode = parse_step_mode(j.at("mode").get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw IoError(e.what());
      }
    }
    s.euler_step = get_or(j, "euler_step", s.euler_step);
    s.record_every = get_or<std::size_t>(j, "record_every", s.record_every);
    s.tail_window = get_or<std::size_t>(j, "tail_window", s.tail_window);
    s.stop_on_convergence = get_or(j, "stop_on_convergence", s.stop_on_convergence);
    if (j.contains("cycle")) {
      const auto& c = j.at("cycle");
      reject_unknown_keys(c, {"period_max", "tol", "window", "burn_in"}, "stepper.cycle");
      s.cycle.period_max = get_or<std::size_t>(c, "period_max", s.cycle.period_max);
      s.cycle.tol = get_or(c, "tol", s.cycle.tol);
      s.cycle.window = get_or<std::size_t>(c, "window", s.cycle.window);
      s.cycle.burn_in = get_or<std::size_t>(c, "burn_in", s.cycle.burn_in);
    }
    return s;
  });
}

ordered_json stepper_to_json(const StepperConfig& s) {
  ordered_json j;
  j["max_days"] = s.max_days;
  j["convergence_tol"] = s.convergence_tol;
  j["mode"] = to_string(s.mode);
  j["euler_step"] = s.euler_step;
  j["record_every"] = s.record_every;
  j["tail_window"] = s.tail_window;
  j["stop_on_convergence"] = s.stop_on_convergence;
  j["cycle"] = {{"period_max", s.cycle.period_max},
                {"tol", s.cycle.tol},
                {"window", s.cycle.window},
                {"burn_in", s.cycle.burn_in}};
  return j;
}

GridSpec grid_from_json(const json& j) {
  return parse_guard("grid", [&] {
    if (j.is_array()) return GridSpec{j.get<std::vector<double>>()};
    reject_unknown_keys(j, {"start", "step", "stop"}, "grid");
    return GridSpec{GridRange{j.at("start").get<double>(), j.at("step").get<double>(),
                              j.at("stop").get<double>()}};
  });
}

ordered_json grid_to_json(const GridSpec& g) {
  if (const auto* list = std::get_if<std::vector<double>>(&g.form)) return ordered_json(*list);
  const auto& r = std::get<GridRange>(g.form);
  return ordered_json{{"start", r.start}, {"step", r.step}, {"stop", r.stop}};
}

ScenarioConfig scenario_config_from_json(const json& j) {
  return parse_guard("scenario", [&] {
    reject_unknown_keys(j, {"network", "protocol", "stepper", "reductions", "theta_grid", "cap_grid",
                            "reference", "ad_cycle", "ad_tol", "oracle"},
                        "scenario");
    ScenarioConfig c;
    c.network = j.at("network").get<std::string>();
    c.protocol = protocol_from_json(j.at("protocol"));
    c.stepper = stepper_from_json(j.contains("stepper") ? j.at("stepper") : json::object());
    if (j.contains("reductions")) {
      for (const auto& r : j.at("reductions")) {
        reject_unknown_keys(r, {"link", "fraction", "day"}, "reduction");
        CapacityReduction red{id_string(r.at("link")), get_or(r, "fraction", 0.0), 0, 0};
        if (r.contains("day")) {
          const auto& d = r.at("day");
          if (d.is_array()) {
            if (d.size() != 2) throw IoError("reduction day range must be [first, last]");
            red.first_day = d.at(0).get<std::size_t>();
            red.last_day = d.at(1).get<std::size_t>();
          } else {
            red.first_day = red.last_day = d.get<std::size_t>();
          }
        }
        c.reductions.push_back(std::move(red));
      }
    }
    if (j.contains("theta_grid")) c.theta_grid = grid_from_json(j.at("theta_grid"));
    if (j.contains("cap_grid")) c.cap_grid = grid_from_json(j.at("cap_grid"));
    c.reference = get_or<std::string>(j, "reference", c.reference);
    c.ad_cycle = get_or<std::size_t>(j, "ad_cycle", c.ad_cycle);
    c.ad_tol = get_or(j, "ad_tol", c.ad_tol);
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      reject_unknown_keys(o, {"rel_gap", "max_iters"}, "oracle");
      c.oracle_rel_gap = get_or(o, "rel_gap", c.oracle_rel_gap);
      c.oracle_max_iters = get_or<std::size_t>(o, "max_iters", c.oracle_max_iters);
    }
    return c;
  });
}

ordered_json scenario_config_to_json(const ScenarioConfig& c) {
  ordered_json j;
  j["network"] = c.network;
  j["protocol"] = protocol_to_json(c.protocol);
  j["stepper"] = stepper_to_json(c.stepper);
  j["reductions"] = ordered_json::array();
  for (const auto& r : c.reductions) {
    ordered_json e{{"link", r.link}, {"fraction", r.fraction}};
    if (r.first_day == r.last_day) e["day"] = r.first_day;
    else e["day"] = {r.first_day, r.last_day};
    j["reductions"].push_back(e);
  }
  j["theta_grid"] = grid_to_json(c.theta_grid);
  j["cap_grid"] = grid_to_json(c.cap_grid);
  j["reference"] = c.reference;
  j["ad_cycle"] = c.ad_cycle;
  j["ad_tol"] = c.ad_tol;
  j["oracle"] = {{"rel_gap", c.oracle_rel_gap}, {"max_iters", c.oracle_max_iters}};
  return j;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  return scenario_config_from_json(json(parse_json_file(path)));
}

FlowState flow_state_from_json(const Network& net, const json& j) {
  return parse_guard("flow file", [&] {
    reject_unknown_keys(j, {"format", "day", "flows"}, "flow file");
    FlowState f;
    f.day = get_or<std::size_t>(j, "day", 0);
    f.flows.assign(net.route_count(), std::numeric_limits<double>::quiet_NaN());
    const auto& flows = j.at("flows");
    if (!flows.is_object()) throw IoError("flow file: 'flows' must map route ids to numbers");
    std::set<std::size_t> seen;
    for (auto it = flows.begin(); it != flows.end(); ++it) {
      std::size_t k = 0;
      try {
        k = net.route_index(it.key());
      } catch (const std::out_of_range& e) {
        throw std::invalid_argument(std::string("flow file: ") + e.what());
      }
      f.flows[k] = it.value().get<double>();
      seen.insert(k);
    }
    if (seen.size() != net.route_count())
      throw std::invalid_argument("flow file does not give a flow for every route");
    return f;
  });
}

ordered_json flow_state_to_json(const Network& net, const FlowState& f) {
  ordered_json j;
  j["format"] = "npsd-flows/1";
  j["day"] = f.day;
  ordered_json flows = ordered_json::object();
  for (std::size_t k = 0; k < net.route_count(); ++k) flows[net.routes()[k].id] = round12(f.flows.at(k));
  j["flows"] = flows;
  return j;
}

FlowState load_flow_file(const Network& net, const std::filesystem::path& path) {
  return flow_state_from_json(net, json(parse_json_file(path)));
}

ScenarioSpec build_scenario(const ScenarioConfig& cfg, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  Network net(load_network_file(resolve(cfg.network)));

  FlowState reference;
  if (cfg.reference == "oracle") {
    const auto sol = solve_ue_oracle(net, cfg.oracle_rel_gap, cfg.oracle_max_iters);
    if (!sol.converged) {
      std::ostringstream os;
      os.precision(12);
      os << "equilibrium oracle stopped at relative gap " << sol.relative_gap << " after "
         << sol.iterations << " iterations";
      throw std::runtime_error(os.str());
    }
    reference = sol.flows;
  } else {
    reference = load_flow_file(net, resolve(cfg.reference));
  }
  reference.day = 0;

  ScenarioSpec spec{std::move(net), cfg.reductions,   cfg.theta_grid.values(), cfg.cap_grid.values(),
                    cfg.protocol,   cfg.stepper,      std::move(reference),    cfg.ad_cycle,
                    cfg.ad_tol};
  spec.check();
  return spec;
}

void write_trajectory_csv(std::ostream& os, const Network& net, const TrajectoryRecord& rec) {
  os << "day";
  for (const auto& r : net.routes()) os << ",f_" << r.id;
  for (const auto& r : net.routes()) os << ",C_" << r.id;
  for (const auto& l : net.links()) os << ",v_" << l.id;
  os << ",step_norm,rbap_value,lyapunov_value\n";
  for (std::size_t i = 0; i < rec.states.size(); ++i) {
    const auto& s = rec.states[i];
    const auto& d = rec.diagnostics[i];
    os << s.day;
    for (double x : s.flows) os << ',' << format_number(x);
    for (double x : d.route_costs) os << ',' << format_number(x);
    for (double x : d.link_flows) os << ',' << format_number(x);
    os << ',' << format_number(d.step_norm) << ',' << format_number(d.rbap_value) << ','
       << format_number(d.lyapunov_value) << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepCellResult>& cells,
                     const std::map<double, PhaseLabel>& phases) {
  os << "theta,cap_link,cap_fraction,termination,days,ad,phase,period,error\n";
  for (const auto& c : cells) {
    const auto ph = phases.find(c.theta);
    os << format_number(c.theta) << ',' << csv_field(c.cap.link) << ',' << format_number(c.cap.fraction)
       << ',';
    if (!c.error) os << to_string(c.termination.kind) << ',' << c.termination.day;
    else os << ',';
    os << ',' << format_number(c.ad) << ',' << (ph != phases.end() ? to_string(ph->second) : "") << ',';
    if (!c.error && c.termination.kind == Termination::Cycle) os << c.termination.period;
    os << ',' << csv_field(c.error.value_or("")) << '\n';
  }
}

std::vector<SweepCellResult> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("sweep CSV is empty");
  const auto header = split_csv_line(line);
  auto col = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError(std::string("sweep CSV lacks column '") + name + "'");
  };
  const std::size_t c_theta = col("theta"), c_link = col("cap_link"), c_frac = col("cap_fraction"),
                    c_term = col("termination"), c_days = col("days"), c_ad = col("ad"),
                    c_period = col("period"), c_error = col("error");

  std::vector<SweepCellResult> cells;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw IoError("sweep CSV line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                    " fields, expected " + std::to_string(header.size()));
    SweepCellResult c;
    c.theta = parse_double(f[c_theta], "theta");
    c.cap = CapSetting{f[c_link], parse_double(f[c_frac], "cap_fraction")};
    c.ad = parse_double(f[c_ad], "ad");
    if (!f[c_error].empty()) {
      c.error = f[c_error];
    } else {
      try {
        c.termination.kind = parse_termination(f[c_term]);
      } catch (const std::invalid_argument& e) {
        throw IoError(e.what());
      }
      c.termination.day = static_cast<std::size_t>(parse_double(f[c_days], "days"));
      if (!f[c_period].empty()) c.termination.period = static_cast<std::size_t>(parse_double(f[c_period], "period"));
      if (c.termination.kind == Termination::Converged) c.days_to_converge = c.termination.day;
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

ordered_json sweep_to_json(const std::vector<SweepCellResult>& cells,
                           const std::map<double, PhaseLabel>& phases) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : cells) {
    ordered_json e;
    e["theta"] = round12(c.theta);
    e["cap_link"] = c.cap.link;
    e["cap_fraction"] = round12(c.cap.fraction);
    if (c.error) {
      e["termination"] = nullptr;
      e["days"] = nullptr;
      e["ad"] = nullptr;
    } else {
      e["termination"] = to_string(c.termination.kind);
      e["days"] = c.termination.day;
      e["ad"] = round12(c.ad);
    }
    const auto ph = phases.find(c.theta);
    e["phase"] = ph != phases.end() ? ordered_json(to_string(ph->second)) : ordered_json(nullptr);
    if (!c.error && c.termination.kind == Termination::Cycle) e["period"] = c.termination.period;
    if (c.error) e["error"] = *c.error;
    arr.push_back(std::move(e));
  }
  return arr;
}

void write_phase_csv(std::ostream& os, const std::map<double, PhaseLabel>& phases) {
  os << "theta,phase\n";
  for (const auto& [theta, label] : phases) os << format_number(theta) << ',' << to_string(label) << '\n';
}

ordered_json phases_to_json(const std::map<double, PhaseLabel>& phases) {
  ordered_json j = ordered_json::object();
  for (const auto& [theta, label] : phases) j[format_number(theta)] = to_string(label);
  return j;
}

}  // namespace npsd
