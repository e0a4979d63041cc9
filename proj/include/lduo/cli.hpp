// cli.hpp - Config schema, job runner and artifact writers behind the lduo executable
//
// Config is YAML (JSON is accepted, being a subset). Sections:
//
//   job:        optional; must equal the subcommand when present
//   system:     omega_eg
//   baths:      ld {eta, lambda}, uo {lambda_reorg, omega_uo}; an empty
//               block takes benchmark values, at least one bath is required
//   thermo:     temperature
//   hierarchy:  gamma_max_factor, gamma_max, depth_cap, K ("auto" or int),
//               convention (cot|coth), terminator (oscillatory|plain), max_nodes
//   integrator: dt, t_final, stride, rotating_frame
//   dynamics:   initial (excited|superposition|ground), start (equilibrated|factorized), checkpoint
//   bathcoords: orders, initial, start, noise_floor
//   spectra2d:  T_list, N1, N3, dt1, dt3, integrator_dt, window, phase_flip_sign,
//               rephasing_only, zero_pad, dump_response
//
// Unknown keys are errors; every problem is reported in one pass.

#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lduo/bath.hpp"
#include "lduo/hierarchy.hpp"
#include "lduo/propagator.hpp"

namespace lduo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitBlowUp = 3;

struct ConfigError : std::runtime_error {
    explicit ConfigError(std::vector<std::string> problems);
    std::vector<std::string> problems;
};

enum class InitialState { Excited, Superposition, Ground };
enum class StartMode { Equilibrated, Factorized };

struct HierarchyConfig {
    double gamma_max_factor{10.0};
    std::optional<double> gamma_max; // absolute override, cm^-1
    int depth_cap{12};
    std::optional<int> matsubara_count; // empty = auto
    bath::CoefficientConvention convention{bath::CoefficientConvention::Cot};
    TerminatorMode terminator{TerminatorMode::Oscillatory};
    std::size_t max_nodes{hierarchy::kDefaultMaxNodes};
};

struct IntegratorConfig {
    double dt{0.5};
    double t_final{1000.0};
    std::size_t stride{1};
    bool rotating_frame{true};
};

struct DynamicsConfig {
    InitialState initial{InitialState::Excited};
    StartMode start{StartMode::Equilibrated};
    std::string checkpoint; // equilibrium checkpoint to start from
};

struct BathcoordsConfig {
    std::vector<int> orders{1, 2};
    InitialState initial{InitialState::Superposition};
    StartMode start{StartMode::Equilibrated};
    bool noise_floor{true};
};

struct Spectra2dConfig {
    std::vector<double> waiting_times{0.0, 50.0, 100.0};
    std::size_t n1{64};
    std::size_t n3{64};
    double dt1{4.0};
    double dt3{4.0};
    double integrator_dt{1.0};
    bool window{false};
    double phase_flip_sign{-1.0};
    bool rephasing_only{false};
    std::size_t zero_pad{4};
    bool dump_response{false};
};

struct JobConfig {
    std::string job; // empty when the file does not name one
    double omega_eg{3000.0};
    std::optional<bath::LorentzDrudeBath> ld;
    std::optional<bath::UndampedBath> uo;
    double temperature{300.0};
    HierarchyConfig hierarchy;
    IntegratorConfig integrator;
    DynamicsConfig dynamics;
    BathcoordsConfig bathcoords;
    Spectra2dConfig spectra2d;
};

// Throws ConfigError listing every schema and range problem.
JobConfig parse_config_text(const std::string& text);
JobConfig load_config(const std::string& path);

bath::BathModel make_bath_model(const JobConfig& cfg);
// factor * max |Im nu| over UO modes, or factor * Lambda_LD without a UO bath;
// the absolute override wins when given.
double resolve_gamma_max(const JobConfig& cfg, const bath::BathModel& model);
hierarchy::TruncationRule make_truncation(const JobConfig& cfg, const bath::BathModel& model);
Eigen::Matrix2cd initial_density(InitialState s);

struct Diagnostics {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    std::optional<std::size_t> lattice_estimate;
};

// Schema, physics (cot pole, positivity) and lattice-size checks without running.
Diagnostics validate_config(const std::string& path);

struct RunOptions {
    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    unsigned threads{1};
    bool dump_lattice{false};
};

// Executes one job and writes its artifacts plus manifest.json. Returns an exit code.
int run(const RunOptions& options, std::ostream& log, std::ostream& err);

const std::vector<std::string>& subcommands();

} // namespace lduo::cli
