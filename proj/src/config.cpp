#include "swimcycle/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "swimcycle/error.hpp"

namespace swimcycle {

SystemSpec RunConfig::system() const {
    return {grid, make_fish_filament(body), actuation, stepper};
}

RunConfig default_config() { return RunConfig{}; }

namespace {

std::string to_string(Acceleration a) { return a == Acceleration::Anderson ? "anderson" : "none"; }
std::string to_string(CycleMode m) { return m == CycleMode::Stencil ? "stencil" : "exact"; }
std::string to_string(InitialCondition c) {
    return c == InitialCondition::Perturbed ? "perturbed" : "rest";
}

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported.
class Section {
public:
    Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        const nlohmann::json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw ConfigError(name(key) + ": expected an integer");
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                // Programmatic json stores small literals as signed.
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                    throw ConfigError(name(key) + ": expected an unsigned integer");
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(name(key) + ": expected a number");
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(name(key) + ": expected true or false");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ConfigError(name(key) + ": expected a string");
            }
            out = v.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(name(key) + ": " + e.what());
        }
    }

    Section sub(const char* key) {
        seen_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, name(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(name(it.key().c_str()) + ": unknown key");
    }

    std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class E>
E parse_enum(const std::string& key, const std::string& value,
             std::initializer_list<std::pair<const char*, E>> options) {
    std::string names;
    for (const auto& [n, e] : options) {
        if (value == n) return e;
        names += names.empty() ? n : std::string(", ") + n;
    }
    throw ConfigError(key + ": unknown value \"" + value + "\" (expected one of " + names + ")");
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
    const PoincareConfig& y = c.cycle;
    return {
        {"schema", kSchema},
        {"grid",
         {{"nx", c.grid.nx},
          {"ny", c.grid.ny},
          {"Lx", c.grid.Lx},
          {"Ly", c.grid.Ly},
          {"mu", c.grid.mu},
          {"rho", c.grid.rho},
          {"sponge_width", c.grid.sponge_width},
          {"sponge_rate", c.grid.sponge_rate}}},
        {"body",
         {{"template", "fish"},
          {"n_nodes", c.body.n_nodes},
          {"length", c.body.length},
          {"width", c.body.width},
          {"k_stretch", c.body.k_stretch},
          {"k_bend", c.body.k_bend},
          {"damping", c.body.damping},
          {"node_mass", c.body.node_mass}}},
        {"actuation",
         {{"amplitude", c.actuation.amplitude},
          {"period", c.actuation.period},
          {"wavenumber", c.actuation.wavenumber},
          {"pattern", to_string(c.actuation.pattern)}}},
        {"stepper", {{"dt", c.stepper.dt}, {"coupling_stiffness", c.stepper.coupling_stiffness}}},
        {"cycle",
         {{"tol", y.tol},
          {"max_iters", y.max_iters},
          {"accel", to_string(y.accel)},
          {"anderson_depth", y.anderson_depth},
          {"mode", to_string(y.mode)},
          {"probe_step", y.probe_step},
          {"probe_dim", y.probe_dim},
          {"floquet", y.floquet},
          {"snapshots", y.snapshots},
          {"workers", y.workers},
          {"weights", {{"shape", y.weights.w_shape}, {"velocity", y.weights.w_vel}, {"fluid", y.weights.w_fluid}}},
          {"stencil", {{"rings", y.stencil.rings}, {"per_ring", y.stencil.per_ring}, {"extent", y.stencil.extent}}}}},
        {"simulate",
         {{"periods", c.simulate.periods},
          {"initial", to_string(c.simulate.initial)},
          {"perturbation", c.simulate.perturbation},
          {"ledger_every", c.simulate.ledger_every},
          {"trajectory_every", c.simulate.trajectory_every},
          {"snapshot_every", c.simulate.snapshot_every}}},
        {"reconstruct",
         {{"cycle", c.reconstruct.cycle},
          {"periods", c.reconstruct.periods},
          {"compare", c.reconstruct.compare},
          {"bound", c.reconstruct.bound}}},
        {"output", {{"directory", c.output_dir}, {"seed", c.seed}}},
    };
}

RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    Section root(j, "");
    std::string schema;
    root.get("schema", schema);
    if (schema != kSchema)
        throw ConfigError("schema: expected \"" + std::string(kSchema) + "\", got \"" + schema + "\"");

    {
        Section s = root.sub("grid");
        s.get("nx", c.grid.nx);
        s.get("ny", c.grid.ny);
        s.get("Lx", c.grid.Lx);
        s.get("Ly", c.grid.Ly);
        s.get("mu", c.grid.mu);
        s.get("rho", c.grid.rho);
        s.get("sponge_width", c.grid.sponge_width);
        s.get("sponge_rate", c.grid.sponge_rate);
        s.finish();
    }
    {
        Section s = root.sub("body");
        std::string templ = "fish";
        s.get("template", templ);
        if (templ != "fish") throw ConfigError("body.template: unknown template \"" + templ + "\" (expected fish)");
        s.get("n_nodes", c.body.n_nodes);
        s.get("length", c.body.length);
        s.get("width", c.body.width);
        s.get("k_stretch", c.body.k_stretch);
        s.get("k_bend", c.body.k_bend);
        s.get("damping", c.body.damping);
        s.get("node_mass", c.body.node_mass);
        s.finish();
    }
    {
        Section s = root.sub("actuation");
        s.get("amplitude", c.actuation.amplitude);
        s.get("period", c.actuation.period);
        s.get("wavenumber", c.actuation.wavenumber);
        std::string pattern = to_string(c.actuation.pattern);
        s.get("pattern", pattern);
        c.actuation.pattern = parse_enum<WavePattern>(
            "actuation.pattern", pattern,
            {{"traveling", WavePattern::Traveling}, {"standing", WavePattern::Standing}});
        s.finish();
    }
    {
        Section s = root.sub("stepper");
        s.get("dt", c.stepper.dt);
        s.get("coupling_stiffness", c.stepper.coupling_stiffness);
        s.finish();
    }
    {
        Section s = root.sub("cycle");
        PoincareConfig& y = c.cycle;
        s.get("tol", y.tol);
        s.get("max_iters", y.max_iters);
        std::string accel = to_string(y.accel), mode = to_string(y.mode);
        s.get("accel", accel);
        y.accel = parse_enum<Acceleration>("cycle.accel", accel,
                                           {{"none", Acceleration::None}, {"anderson", Acceleration::Anderson}});
        s.get("anderson_depth", y.anderson_depth);
        s.get("mode", mode);
        y.mode = parse_enum<CycleMode>("cycle.mode", mode,
                                       {{"exact", CycleMode::Exact}, {"stencil", CycleMode::Stencil}});
        s.get("probe_step", y.probe_step);
        s.get("probe_dim", y.probe_dim);
        s.get("floquet", y.floquet);
        s.get("snapshots", y.snapshots);
        s.get("workers", y.workers);
        {
            Section w = s.sub("weights");
            w.get("shape", y.weights.w_shape);
            w.get("velocity", y.weights.w_vel);
            w.get("fluid", y.weights.w_fluid);
            w.finish();
        }
        {
            Section w = s.sub("stencil");
            w.get("rings", y.stencil.rings);
            w.get("per_ring", y.stencil.per_ring);
            w.get("extent", y.stencil.extent);
            w.finish();
        }
        s.finish();
    }
    {
        Section s = root.sub("simulate");
        s.get("periods", c.simulate.periods);
        std::string init = to_string(c.simulate.initial);
        s.get("initial", init);
        c.simulate.initial = parse_enum<InitialCondition>(
            "simulate.initial", init,
            {{"rest", InitialCondition::Rest}, {"perturbed", InitialCondition::Perturbed}});
        s.get("perturbation", c.simulate.perturbation);
        s.get("ledger_every", c.simulate.ledger_every);
        s.get("trajectory_every", c.simulate.trajectory_every);
        s.get("snapshot_every", c.simulate.snapshot_every);
        s.finish();
    }
    {
        Section s = root.sub("reconstruct");
        s.get("cycle", c.reconstruct.cycle);
        s.get("periods", c.reconstruct.periods);
        s.get("compare", c.reconstruct.compare);
        s.get("bound", c.reconstruct.bound);
        s.finish();
    }
    {
        Section s = root.sub("output");
        s.get("directory", c.output_dir);
        s.get("seed", c.seed);
        s.finish();
    }
    root.finish();
    // Derived quantities keep the norm in body units.
    c.cycle.weights.length = c.body.length;
    c.cycle.weights.period = c.actuation.period;
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    RunConfig c = config_from_json(j);
    c.base_dir = path.parent_path();
    return c;
}

void validate(const RunConfig& c) {
    auto require = [](bool ok, const std::string& key, const std::string& what) {
        if (!ok) throw ConfigError(key + ": " + what);
    };
    const FluidGrid& g = c.grid;
    require(g.nx >= 16 && g.nx % 2 == 0, "grid.nx", "must be even and >= 16");
    require(g.ny >= 16 && g.ny % 2 == 0, "grid.ny", "must be even and >= 16");
    require(g.Lx > 0.0, "grid.Lx", "must be > 0");
    require(g.Ly > 0.0, "grid.Ly", "must be > 0");
    require(std::abs(g.Lx / g.nx - g.Ly / g.ny) <= 1e-12 * (g.Lx / g.nx), "grid.Ly",
            "cells must be square (Lx/nx == Ly/ny)");
    require(g.mu > 0.0, "grid.mu", "must be > 0");
    require(g.rho > 0.0, "grid.rho", "must be > 0");
    require(g.sponge_width >= 0 && 2 * g.sponge_width < std::min(g.nx, g.ny), "grid.sponge_width",
            "must be in [0, min(nx, ny)/2)");
    require(g.sponge_rate >= 0.0, "grid.sponge_rate", "must be >= 0");

    const FishParams& b = c.body;
    require(b.n_nodes >= 6 && b.n_nodes % 2 == 0, "body.n_nodes", "must be even and >= 6");
    require(b.length > 0.0, "body.length", "must be > 0");
    require(b.width > 0.0, "body.width", "must be > 0");
    require(b.k_stretch > 0.0, "body.k_stretch", "must be > 0");
    require(b.k_bend > 0.0, "body.k_bend", "must be > 0");
    require(b.damping >= 0.0, "body.damping", "must be >= 0");
    require(b.node_mass > 0.0, "body.node_mass", "must be > 0");

    const ActuationSpec& a = c.actuation;
    require(a.amplitude >= 0.0 && a.amplitude < 1.0, "actuation.amplitude", "must be in [0, 1)");
    require(a.period > 0.0, "actuation.period", "must be > 0");
    require(a.wavenumber >= 0, "actuation.wavenumber", "must be >= 0");

    require(c.stepper.dt > 0.0, "stepper.dt", "must be > 0");
    require(c.stepper.coupling_stiffness > 0.0, "stepper.coupling_stiffness", "must be > 0");

    // Mesh-level invariants and the explicit elastic stability bound.
    BodyMesh mesh;
    try {
        mesh = make_fish_filament(b);
        mesh.validate();
    } catch (const Error& e) {
        throw ConfigError(std::string("body: ") + e.what());
    }
    const double dt_max = 0.5 * std::sqrt(mesh.min_mass() / mesh.max_stiffness());
    require(c.stepper.dt <= dt_max, "stepper.dt",
            "exceeds the elastic stability bound " + std::to_string(dt_max));

    const PoincareConfig& y = c.cycle;
    require(y.tol > 0.0, "cycle.tol", "must be > 0");
    require(y.max_iters >= 1, "cycle.max_iters", "must be >= 1");
    require(y.anderson_depth >= 1, "cycle.anderson_depth", "must be >= 1");
    require(y.probe_step > 0.0, "cycle.probe_step", "must be > 0");
    require(y.probe_dim >= 0 && y.probe_dim <= 4 * b.n_nodes, "cycle.probe_dim", "must be in [0, 4 n_nodes]");
    require(y.snapshots >= 1, "cycle.snapshots", "must be >= 1");
    require(y.workers >= 1, "cycle.workers", "must be >= 1");
    require(y.weights.w_shape >= 0.0, "cycle.weights.shape", "must be >= 0");
    require(y.weights.w_vel >= 0.0, "cycle.weights.velocity", "must be >= 0");
    require(y.weights.w_fluid >= 0.0, "cycle.weights.fluid", "must be >= 0");
    require(y.weights.w_shape + y.weights.w_vel + y.weights.w_fluid > 0.0, "cycle.weights",
            "must not all be zero");
    require(y.stencil.rings >= 1, "cycle.stencil.rings", "must be >= 1");
    require(y.stencil.per_ring >= 1, "cycle.stencil.per_ring", "must be >= 1");
    require(y.stencil.extent > 0.0, "cycle.stencil.extent", "must be > 0");

    const long steps = std::lround(a.period / c.stepper.dt);
    require(steps >= 1 && std::abs(steps * c.stepper.dt - a.period) <= 1e-9 * a.period, "stepper.dt",
            "must divide actuation.period into whole steps");
    require(steps % y.snapshots == 0, "cycle.snapshots", "must divide the steps per period");

    require(c.simulate.periods > 0.0, "simulate.periods", "must be > 0");
    require(c.simulate.perturbation >= 0.0, "simulate.perturbation", "must be >= 0");
    require(c.simulate.ledger_every >= 1, "simulate.ledger_every", "must be >= 1");
    require(c.simulate.trajectory_every >= 1, "simulate.trajectory_every", "must be >= 1");
    require(c.simulate.snapshot_every >= 0, "simulate.snapshot_every", "must be >= 0");
    require(c.reconstruct.periods >= 1, "reconstruct.periods", "must be >= 1");
    require(c.reconstruct.bound > 0.0, "reconstruct.bound", "must be > 0");
    require(!c.output_dir.empty(), "output.directory", "must not be empty");

    // The body must start inside the sponge-free interior.
    const double margin = (g.sponge_width + 2) * g.dx();
    require(0.5 * b.length + margin < 0.5 * std::min(g.Lx, g.Ly), "grid.Lx",
            "domain too small for the body and sponge");
}

std::uint64_t config_hash(const RunConfig& c) {
    const std::string s = to_json(c).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string format_row(const std::vector<double>& row) {
    std::string out;
    char buf[32];
    for (std::size_t k = 0; k < row.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", row[k]);
        if (k) out += ',';
        out += buf;
    }
    return out;
}

void write_csv(std::ostream& os, const CsvTable& t) {
    for (const std::string& c : t.comments) os << "# " << c << '\n';
    for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
    os << '\n';
    for (const auto& r : t.rows) os << format_row(r) << '\n';
}

CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.rfind("# ", 0) == 0 && !header) {
            t.comments.push_back(line.substr(2));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!header) {
            while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
            header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw FormatError("csv: bad number \"" + cell + "\"");
            }
        }
        if (row.size() != t.columns.size()) throw FormatError("csv: row width differs from header");
        t.rows.push_back(std::move(row));
    }
    if (!header) throw FormatError("csv: missing header row");
    return t;
}

void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream os(p);
    if (!os) throw FormatError("cannot write " + p.string());
    os << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw FormatError("cannot open " + p.string());
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
}

}  // namespace swimcycle
