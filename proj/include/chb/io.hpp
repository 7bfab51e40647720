#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "chb/timestepper.hpp"

namespace chb {

enum class InitPreset { Uniform, TanhDisc, CosinePerturbation };
enum class SigmaPreset { Uniform, Equilibrium };

struct InitConfig {
    InitPreset phi0 = InitPreset::TanhDisc;
    double phi0_value = -1.0;  // uniform
    double cx = 0.5;           // tanh_disc
    double cy = 0.5;
    double r = 0.25;
    double mean = 0.0;         // cosine_perturbation
    double amplitude = 0.1;
    int modes = 1;
    SigmaPreset sigma0 = SigmaPreset::Uniform;
    double sigma0_value = 1.0;
    /// Relaxation steps with sources and flow off before t = 0 (0 disables).
    int relax_steps = 0;
    double relax_dt = 1e-3;

    bool operator==(const InitConfig&) const = default;
};

struct OutputConfig {
    std::string directory = "chb_out";
    bool csv = true;
    bool vtk = false;
    bool timeseries = true;

    bool operator==(const OutputConfig&) const = default;
};

/// Everything needed to reproduce a run; text form is a sectioned key = value file.
struct RunConfig {
    double Lx = 1.0;
    double Ly = 1.0;
    int nx = 64;
    int ny = 64;
    double dt = 1e-3;
    double t_end = 0.1;
    int snapshot_every = 0;
    bool flow = true;
    ModelParams params;
    ConstitutiveSpec spec;
    double stabilization_s = 2.0;
    double phase_tol = 1e-11;
    double nutrient_tol = 1e-11;
    double brinkman_tol = 1e-11;
    int max_iters = 20000;
    bool mass_correction = true;
    InitConfig init;
    OutputConfig output;

    Grid grid() const { return make_grid(Lx, Ly, nx, ny); }
    Model model() const { return Model{grid(), params, spec, flow}; }
    SchemeOptions scheme() const;
    int steps() const;

    bool operator==(const RunConfig&) const = default;
};

/// Parse or validation failure; every problem found is listed.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

/// Parses and validates. Unknown sections or keys, malformed values and failed
/// assumption checks are collected and thrown together as ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key written explicitly with round-trip precision.
std::string format_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);
/// Raises ConfigError if the configuration violates an error-level assumption.
void validate_config(const RunConfig& cfg);

/// Initial (phi0, sigma0) from the init presets, relaxed if requested.
State initial_state_from(const RunConfig& cfg);

struct SnapshotHeader {
    int version = 1;
    double t = 0.0;
    Grid grid;
    std::vector<std::string> fields{"phi", "mu", "sigma", "p", "vx", "vy"};

    bool operator==(const SnapshotHeader&) const = default;
};

/// Cell-centred view of a state; velocities are face averages.
struct SnapshotData {
    SnapshotHeader header;
    CellField phi, mu, sigma, p, vx, vy;

    bool operator==(const SnapshotData&) const = default;
};

SnapshotData snapshot_of(const State& s, const Grid& g);

void write_snapshot_csv(const State& s, const Grid& g, const std::filesystem::path& path);
SnapshotData read_snapshot_csv(const std::filesystem::path& path);
void write_snapshot_vtk(const State& s, const Grid& g, const std::filesystem::path& path);

std::vector<std::string> timeseries_columns();
void write_timeseries(const std::vector<DiagnosticsRow>& rows, const std::filesystem::path& path);
std::vector<DiagnosticsRow> read_timeseries(const std::filesystem::path& path);

/// Output directory of a config: relative paths are resolved under
/// $CHB_OUTPUT_ROOT when that variable is set.
std::filesystem::path output_directory(const RunConfig& cfg);

struct RunOutcome {
    RunResult result;
    std::filesystem::path directory;
    std::vector<std::filesystem::path> files;
};

/// Runs a configuration and writes the requested outputs. The output directory
/// is locked for the duration of the run; a second concurrent run on the same
/// directory fails with runtime_error.
RunOutcome execute(const RunConfig& cfg);

}  // namespace chb
