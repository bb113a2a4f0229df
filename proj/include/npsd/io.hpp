#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "npsd/analysis.hpp"
#include "npsd/dynamics.hpp"
#include "npsd/network.hpp"
#include "npsd/protocols.hpp"
#include "npsd/scenarios.hpp"

namespace npsd {

inline constexpr const char* kFormatVersion = "npsd/1";

// Unreadable file or malformed content.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 12 significant digits; NaN prints as an empty string.
std::string format_number(double x);
// x rounded to 12 significant digits, for JSON emission.
double round12(double x);

// [start:step:stop] with inclusive stop, or an explicit list.
struct GridRange {
  double start = 0.0;
  double step = 0.0;
  double stop = 0.0;

  friend bool operator==(const GridRange&, const GridRange&) = default;
};

struct GridSpec {
  std::variant<std::vector<double>, GridRange> form;

  // Range values are generated as integer multiples of the decimal step, so
  // 0.01:0.01:0.3 yields exactly the 30 literals 0.01, 0.02, ..., 0.3.
  std::vector<double> values() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct ScenarioConfig {
  std::string network;  // path, relative to the config file
  ProtocolParams protocol;
  StepperConfig stepper;
  std::vector<CapacityReduction> reductions;
  GridSpec theta_grid;
  GridSpec cap_grid;
  std::string reference = "oracle";  // "oracle" or a flow-file path
  std::size_t ad_cycle = 2;
  double ad_tol = kDefaultAdTol;
  double oracle_rel_gap = 1e-14;
  std::size_t oracle_max_iters = 100000;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

NetworkData network_from_json(const nlohmann::json& j);
nlohmann::ordered_json network_to_json(const NetworkData& data);
NetworkData load_network_file(const std::filesystem::path& path);

ProtocolParams protocol_from_json(const nlohmann::json& j);
nlohmann::ordered_json protocol_to_json(const ProtocolParams& p);

// Scenario files default stop_on_convergence to false: runs sample the
// horizon's last days.
StepperConfig stepper_from_json(const nlohmann::json& j);
nlohmann::ordered_json stepper_to_json(const StepperConfig& s);

GridSpec grid_from_json(const nlohmann::json& j);
nlohmann::ordered_json grid_to_json(const GridSpec& g);

ScenarioConfig scenario_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json scenario_config_to_json(const ScenarioConfig& c);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

// {"format": "npsd-flows/1", "day": d, "flows": {route_id: value, ...}}
FlowState flow_state_from_json(const Network& net, const nlohmann::json& j);
nlohmann::ordered_json flow_state_to_json(const Network& net, const FlowState& f);
FlowState load_flow_file(const Network& net, const std::filesystem::path& path);

// Resolves network and reference paths relative to `base_dir`; the oracle
// reference is solved here.
ScenarioSpec build_scenario(const ScenarioConfig& cfg, const std::filesystem::path& base_dir);

void write_trajectory_csv(std::ostream& os, const Network& net, const TrajectoryRecord& rec);

// theta,cap_link,cap_fraction,termination,days,ad,phase,period,error
void write_sweep_csv(std::ostream& os, const std::vector<SweepCellResult>& cells,
                     const std::map<double, PhaseLabel>& phases);
std::vector<SweepCellResult> read_sweep_csv(std::istream& is);
nlohmann::ordered_json sweep_to_json(const std::vector<SweepCellResult>& cells,
                                     const std::map<double, PhaseLabel>& phases);

void write_phase_csv(std::ostream& os, const std::map<double, PhaseLabel>& phases);
nlohmann::ordered_json phases_to_json(const std::map<double, PhaseLabel>& phases);

nlohmann::ordered_json parse_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace npsd
