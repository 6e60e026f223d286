#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "swimcycle/cycles.hpp"

namespace swimcycle {

inline constexpr const char* kSchema = "swimcycle/1";

enum class InitialCondition { Rest, Perturbed };

struct SimulateOptions {
    double periods = 10.0;
    InitialCondition initial = InitialCondition::Rest;
    double perturbation = 0.005;  // body-lengths, per node and component
    int ledger_every = 1;
    int trajectory_every = 40;
    int snapshot_every = 0;  // 0: final state only
};

struct ReconstructOptions {
    std::string cycle;  // path to a find-cycle JSON, relative to the config file
    int periods = 5;
    bool compare = true;
    double bound = 1e-2;  // body-lengths
};

struct RunConfig {
    FluidGrid grid;
    FishParams body;
    ActuationSpec actuation{0.15, 1.0, 1, WavePattern::Traveling};
    StepperParams stepper;
    PoincareConfig cycle;
    SimulateOptions simulate;
    ReconstructOptions reconstruct;
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    std::filesystem::path base_dir;  // directory of the config file

    SystemSpec system() const;
};

RunConfig default_config();

// Full resolved form (defaults filled in).
nlohmann::json to_json(const RunConfig& c);

// Strict parse: unknown keys, wrong types and invalid values raise
// ConfigError naming the key. Missing keys take defaults.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// Checks every cross-field invariant; builds the mesh but nothing large.
void validate(const RunConfig& c);

// FNV-1a 64 over the compact dump of the resolved config.
std::uint64_t config_hash(const RunConfig& c);
std::string hash_hex(std::uint64_t h);

// CSV helpers: a "# key=value" comment line carrying the hash, then a header
// row, then %.17g rows. Reading and re-writing reproduces the file exactly.
struct CsvTable {
    std::vector<std::string> comments;  // without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

void write_csv(std::ostream& os, const CsvTable& t);
CsvTable read_csv(std::istream& is);
std::string format_row(const std::vector<double>& row);

void write_json_file(const std::filesystem::path& p, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& p);

}  // namespace swimcycle
