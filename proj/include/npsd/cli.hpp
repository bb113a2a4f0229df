#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace npsd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitIo = 2;

// Default output directory when --out is absent.
inline constexpr const char* kOutDirEnv = "NPSD_OUT_DIR";

struct RunManifest {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path output_dir;
  std::string format_version;
};

struct SimulateOptions {
  std::filesystem::path scenario;
  std::optional<double> theta;
  std::optional<std::string> cap_link;
  std::optional<double> cap_fraction;
  std::optional<std::filesystem::path> out;
};

struct SweepOptions {
  std::filesystem::path scenario;
  int jobs = 1;
  std::optional<std::filesystem::path> out;
};

struct UeOptions {
  std::filesystem::path network;
  double tol = 1e-10;
  std::size_t max_iters = 100000;
};

int cmd_validate(const std::filesystem::path& network, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err);
int cmd_classify(const std::filesystem::path& sweep_csv, double ad_tol, std::ostream& out,
                 std::ostream& err);
int cmd_ue(const UeOptions& opt, std::ostream& out, std::ostream& err);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace npsd::cli
