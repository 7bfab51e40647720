#include "chb/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace chb {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

double parse_double(const std::string& s) {
    const char* b = s.c_str();
    char* end = nullptr;
    errno = 0;
    double x = std::strtod(b, &end);
    if (end == b || *end != '\0' || errno == ERANGE || !std::isfinite(x))
        throw std::invalid_argument("expected a finite number, got '" + s + "'");
    return x;
}

int parse_int(const std::string& s) {
    int x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::invalid_argument("expected an integer, got '" + s + "'");
    return x;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <class E>
E parse_enum(const std::string& s, const std::vector<std::pair<std::string, E>>& names) {
    for (const auto& [n, e] : names)
        if (n == s) return e;
    std::string all;
    for (const auto& [n, e] : names) all += (all.empty() ? "" : ", ") + n;
    throw std::invalid_argument("expected one of {" + all + "}, got '" + s + "'");
}

template <class E>
std::string fmt_enum(E e, const std::vector<std::pair<std::string, E>>& names) {
    for (const auto& [n, v] : names)
        if (v == e) return n;
    return "?";
}

const std::vector<std::pair<std::string, PotentialKind>> potential_names{
    {"quartic", PotentialKind::Quartic}, {"quadratic_growth", PotentialKind::QuadraticGrowth}};
const std::vector<std::pair<std::string, CoefficientKind>> coefficient_names{
    {"constant", CoefficientKind::Constant}, {"linear", CoefficientKind::Linear}, {"smooth", CoefficientKind::Smooth}};
const std::vector<std::pair<std::string, SourceKind>> source_names{
    {"none", SourceKind::None}, {"lima", SourceKind::Lima}, {"hawkins", SourceKind::Hawkins}};
const std::vector<std::pair<std::string, InitPreset>> init_names{{"uniform", InitPreset::Uniform},
                                                                 {"tanh_disc", InitPreset::TanhDisc},
                                                                 {"cosine_perturbation", InitPreset::CosinePerturbation}};
const std::vector<std::pair<std::string, SigmaPreset>> sigma_names{{"uniform", SigmaPreset::Uniform},
                                                                   {"equilibrium", SigmaPreset::Equilibrium}};

struct Key {
    std::string section;
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define CHB_DOUBLE(sec, key, field) \
    Key { sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_double(v); }, \
          [](const RunConfig& c) { return fmt(c.field); } }
#define CHB_INT(sec, key, field) \
    Key { sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_int(v); }, \
          [](const RunConfig& c) { return std::to_string(c.field); } }
#define CHB_BOOL(sec, key, field) \
    Key { sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
          [](const RunConfig& c) { return fmt_bool(c.field); } }
#define CHB_ENUM(sec, key, field, names) \
    Key { sec, key, [](RunConfig& c, const std::string& v) { c.field = parse_enum(v, names); }, \
          [](const RunConfig& c) { return fmt_enum(c.field, names); } }

void add_coefficient(std::vector<Key>& keys, const std::string& name, BoundedCoefficient ConstitutiveSpec::*member) {
    keys.push_back({"constitutive", name,
                    [member](RunConfig& c, const std::string& v) {
                        (c.spec.*member).kind = parse_enum(v, coefficient_names);
                    },
                    [member](const RunConfig& c) { return fmt_enum((c.spec.*member).kind, coefficient_names); }});
    keys.push_back({"constitutive", name + "_lo",
                    [member](RunConfig& c, const std::string& v) { (c.spec.*member).lo = parse_double(v); },
                    [member](const RunConfig& c) { return fmt((c.spec.*member).lo); }});
    keys.push_back({"constitutive", name + "_hi",
                    [member](RunConfig& c, const std::string& v) { (c.spec.*member).hi = parse_double(v); },
                    [member](const RunConfig& c) { return fmt((c.spec.*member).hi); }});
}

const std::vector<Key>& key_table() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k{
            CHB_DOUBLE("domain", "Lx", Lx),
            CHB_DOUBLE("domain", "Ly", Ly),
            CHB_INT("domain", "nx", nx),
            CHB_INT("domain", "ny", ny),
            CHB_DOUBLE("time", "dt", dt),
            CHB_DOUBLE("time", "t_end", t_end),
            CHB_INT("time", "snapshot_every", snapshot_every),
            CHB_DOUBLE("model", "epsilon", params.epsilon),
            CHB_DOUBLE("model", "chi_sigma", params.chi_sigma),
            CHB_DOUBLE("model", "chi_phi", params.chi_phi),
            CHB_DOUBLE("model", "nu", params.nu),
            CHB_DOUBLE("model", "b", params.b),
            Key{"model", "sigma_inf",
                [](RunConfig& c, const std::string& v) {
                    auto parts = split(v, ',');
                    if (parts.size() == 1) {
                        c.params.sigma_inf.fill(parse_double(parts[0]));
                    } else if (parts.size() == 4) {
                        for (int e = 0; e < 4; ++e) c.params.sigma_inf[static_cast<std::size_t>(e)] = parse_double(parts[static_cast<std::size_t>(e)]);
                    } else {
                        throw std::invalid_argument("expected one value or four (left, right, bottom, top)");
                    }
                },
                [](const RunConfig& c) {
                    const auto& s = c.params.sigma_inf;
                    return fmt(s[0]) + ", " + fmt(s[1]) + ", " + fmt(s[2]) + ", " + fmt(s[3]);
                }},
            CHB_BOOL("model", "flow", flow),
            CHB_ENUM("constitutive", "potential", spec.potential.kind, potential_names),
            CHB_DOUBLE("constitutive", "potential_cap", spec.potential.cap),
        };
        add_coefficient(k, "mobility", &ConstitutiveSpec::m);
        add_coefficient(k, "nutrient_mobility", &ConstitutiveSpec::n);
        add_coefficient(k, "viscosity", &ConstitutiveSpec::eta);
        add_coefficient(k, "bulk_viscosity", &ConstitutiveSpec::lambda);
        std::vector<Key> rest{
            CHB_ENUM("constitutive", "source", spec.source.kind, source_names),
            CHB_DOUBLE("constitutive", "P", spec.source.P),
            CHB_DOUBLE("constitutive", "A", spec.source.A),
            CHB_DOUBLE("constitutive", "C", spec.source.C),
            CHB_DOUBLE("constitutive", "p0", spec.source.p0),
            CHB_DOUBLE("constitutive", "phi_cap", spec.source.phi_cap),
            CHB_DOUBLE("constitutive", "sigma_cap", spec.source.sigma_cap),
            CHB_BOOL("constitutive", "rho_min_variant", spec.source.rho_min_variant),
            CHB_DOUBLE("constitutive", "rho_min", spec.source.rho_min),
            CHB_DOUBLE("constitutive", "c_gamma_v", spec.source.c_gamma_v),
            CHB_DOUBLE("constitutive", "gamma0", spec.source.gamma0),
            CHB_DOUBLE("solver", "stabilization_s", stabilization_s),
            CHB_DOUBLE("solver", "phase_tol", phase_tol),
            CHB_DOUBLE("solver", "nutrient_tol", nutrient_tol),
            CHB_DOUBLE("solver", "brinkman_tol", brinkman_tol),
            CHB_INT("solver", "max_iters", max_iters),
            CHB_BOOL("solver", "mass_correction", mass_correction),
            CHB_ENUM("init", "phi0", init.phi0, init_names),
            CHB_DOUBLE("init", "phi0_value", init.phi0_value),
            CHB_DOUBLE("init", "cx", init.cx),
            CHB_DOUBLE("init", "cy", init.cy),
            CHB_DOUBLE("init", "r", init.r),
            CHB_DOUBLE("init", "mean", init.mean),
            CHB_DOUBLE("init", "amplitude", init.amplitude),
            CHB_INT("init", "modes", init.modes),
            CHB_ENUM("init", "sigma0", init.sigma0, sigma_names),
            CHB_DOUBLE("init", "sigma0_value", init.sigma0_value),
            CHB_INT("init", "relax_steps", init.relax_steps),
            CHB_DOUBLE("init", "relax_dt", init.relax_dt),
            Key{"output", "directory", [](RunConfig& c, const std::string& v) { c.output.directory = v; },
                [](const RunConfig& c) { return c.output.directory; }},
            Key{"output", "formats",
                [](RunConfig& c, const std::string& v) {
                    c.output.csv = c.output.vtk = false;
                    for (const std::string& f : split(v, ',')) {
                        if (f == "csv") c.output.csv = true;
                        else if (f == "vtk") c.output.vtk = true;
                        else if (!f.empty()) throw std::invalid_argument("unknown format '" + f + "' (csv, vtk)");
                    }
                },
                [](const RunConfig& c) {
                    std::string s;
                    if (c.output.csv) s = "csv";
                    if (c.output.vtk) s += s.empty() ? "vtk" : ", vtk";
                    return s;
                }},
            CHB_BOOL("output", "timeseries", output.timeseries),
        };
        k.insert(k.end(), rest.begin(), rest.end());
        return k;
    }();
    return keys;
}

#undef CHB_DOUBLE
#undef CHB_INT
#undef CHB_BOOL
#undef CHB_ENUM

std::vector<std::string> structural_problems(const RunConfig& c) {
    std::vector<std::string> p;
    if (!(c.Lx > 0.0) || !(c.Ly > 0.0)) p.push_back("domain: Lx and Ly must be positive");
    if (c.nx < 4 || c.ny < 4) p.push_back("domain: nx and ny must be at least 4");
    if (!(c.dt > 0.0)) p.push_back("time: dt must be positive");
    if (!(c.t_end >= 0.0)) p.push_back("time: t_end must be >= 0");
    if (c.snapshot_every < 0) p.push_back("time: snapshot_every must be >= 0");
    if (c.max_iters < 1) p.push_back("solver: max_iters must be positive");
    for (double tol : {c.phase_tol, c.nutrient_tol, c.brinkman_tol})
        if (!(tol > 0.0 && tol < 1.0)) p.push_back("solver: tolerances must lie in (0, 1)");
    if (c.stabilization_s < c.spec.potential.stabilization_threshold())
        p.push_back("solver: stabilization_s = " + fmt(c.stabilization_s) + " is below sup psi''/2 = " +
                    fmt(c.spec.potential.stabilization_threshold()));
    if (c.init.relax_steps < 0) p.push_back("init: relax_steps must be >= 0");
    if (c.init.relax_steps > 0 && !(c.init.relax_dt > 0.0)) p.push_back("init: relax_dt must be positive");
    if (c.init.modes < 0) p.push_back("init: modes must be >= 0");
    if (c.init.phi0 == InitPreset::TanhDisc && !(c.init.r > 0.0)) p.push_back("init: r must be positive");
    if (c.output.directory.empty()) p.push_back("output: directory must not be empty");
    if (c.snapshot_every > 0 && !c.output.csv && !c.output.vtk)
        p.push_back("output: snapshot_every > 0 needs at least one format");
    return p;
}

std::vector<std::string> assumption_problems(const RunConfig& c) {
    std::vector<std::string> p;
    ValidationReport r = validate_params(c.params, c.spec);
    for (const auto& f : r.failures())
        if (f.severity == Severity::Error) p.push_back("assumption " + f.name + " violated: " + f.inequality);
    return p;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// "key=value" tokens of a header line.
std::map<std::string, std::string> header_fields(const std::string& line) {
    std::map<std::string, std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        auto eq = tok.find('=');
        if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
}

class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& dir) : path_(dir / ".chb.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0)
            throw std::runtime_error("output directory '" + dir.string() + "' is locked by another run (" +
                                     path_.string() + ")");
    }
    ~DirectoryLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

}  // namespace

SchemeOptions RunConfig::scheme() const {
    SchemeOptions o;
    o.dt = dt;
    o.s = stabilization_s;
    o.phase = {phase_tol, 0.0, max_iters, false};
    o.nutrient = {nutrient_tol, 0.0, max_iters, false};
    o.brinkman = {brinkman_tol, 0.0, max_iters, false};
    o.mass_correction = mass_correction;
    return o;
}

int RunConfig::steps() const { return static_cast<int>(std::llround(t_end / dt)); }

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error([&] {
          std::string s = "invalid configuration:";
          for (const auto& p : problems) s += "\n  " + p;
          return s;
      }()),
      problems_(std::move(problems)) {}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::vector<std::string> problems;
    std::set<std::string> sections;
    for (const Key& k : key_table()) sections.insert(k.section);
    std::set<std::string> seen;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw.substr(0, raw.find_first_of("#;")));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') {
                problems.push_back(where + "malformed section header '" + line + "'");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!sections.count(section)) problems.push_back(where + "unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back(where + "expected key = value");
            continue;
        }
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (section.empty()) {
            problems.push_back(where + "key '" + key + "' outside any section");
            continue;
        }
        if (!sections.count(section)) continue;
        const Key* match = nullptr;
        for (const Key& k : key_table())
            if (k.section == section && k.name == key) match = &k;
        if (!match) {
            problems.push_back(where + "unknown key '" + key + "' in [" + section + "]");
            continue;
        }
        if (!seen.insert(section + "." + key).second) {
            problems.push_back(where + "duplicate key '" + key + "' in [" + section + "]");
            continue;
        }
        try {
            match->set(c, value);
        } catch (const std::exception& e) {
            problems.push_back(where + section + "." + key + ": " + e.what());
        }
    }
    // a constant coefficient given by one bound takes that value at both ends
    for (auto [name, member] : {std::pair{"mobility", &ConstitutiveSpec::m}, std::pair{"nutrient_mobility", &ConstitutiveSpec::n},
                                std::pair{"viscosity", &ConstitutiveSpec::eta}, std::pair{"bulk_viscosity", &ConstitutiveSpec::lambda}}) {
        BoundedCoefficient& bc = c.spec.*member;
        if (bc.kind != CoefficientKind::Constant) continue;
        bool lo = seen.count(std::string("constitutive.") + name + "_lo") > 0;
        bool hi = seen.count(std::string("constitutive.") + name + "_hi") > 0;
        if (lo && !hi) bc.hi = bc.lo;
        else if (hi && !lo) bc.lo = bc.hi;
        else if (bc.lo != bc.hi)
            problems.push_back(std::string("constitutive.") + name + ": constant coefficient needs lo == hi");
    }
    if (problems.empty()) {
        for (auto& p : structural_problems(c)) problems.push_back(p);
        for (auto& p : assumption_problems(c)) problems.push_back(p);
    }
    if (!problems.empty()) throw ConfigError(problems);
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw std::runtime_error("config file '" + path.string() + "' does not exist");
    return parse_config(read_text(path));
}

std::string format_config(const RunConfig& cfg) {
    std::string out, section;
    for (const Key& k : key_table()) {
        if (k.section != section) {
            if (!section.empty()) out += "\n";
            section = k.section;
            out += "[" + section + "]\n";
        }
        out += k.name + " = " + k.get(cfg) + "\n";
    }
    return out;
}

void save_config(const RunConfig& cfg, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << format_config(cfg);
    close_out(out, path);
}

void validate_config(const RunConfig& cfg) {
    std::vector<std::string> p = structural_problems(cfg);
    for (auto& q : assumption_problems(cfg)) p.push_back(q);
    if (!p.empty()) throw ConfigError(p);
}

State initial_state_from(const RunConfig& cfg) {
    validate_config(cfg);
    const Grid g = cfg.grid();
    const Model m = cfg.model();
    const InitConfig& in = cfg.init;
    CellField phi0;
    switch (in.phi0) {
        case InitPreset::Uniform: phi0 = uniform_field(g, in.phi0_value); break;
        case InitPreset::TanhDisc: phi0 = tanh_disc(g, in.cx, in.cy, in.r, cfg.params.epsilon); break;
        case InitPreset::CosinePerturbation: phi0 = cosine_perturbation(g, in.mean, in.amplitude, in.modes); break;
    }
    CellField sigma0 = in.sigma0 == SigmaPreset::Uniform ? uniform_field(g, in.sigma0_value)
                                                         : nutrient_equilibrium(phi0, in.sigma0_value, cfg.params);
    if (!phi0.all_finite() || !sigma0.all_finite()) throw ConfigError({"init: initial fields are not finite"});
    const SchemeOptions o = cfg.scheme();
    State s = initial_state(phi0, sigma0, m, o);
    if (in.relax_steps > 0) s = relax_initial_state(s, m, in.relax_dt, in.relax_steps, o);
    return s;
}

SnapshotData snapshot_of(const State& s, const Grid& g) {
    if (!s.on(g)) throw std::invalid_argument("snapshot_of: state is not on the grid");
    SnapshotData d;
    d.header.t = s.t;
    d.header.grid = g;
    d.phi = s.phi;
    d.mu = s.mu;
    d.sigma = s.sigma;
    d.p = s.p;
    d.vx = CellField(g);
    d.vy = CellField(g);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            d.vx(i, j) = 0.5 * (s.v.u(i, j) + s.v.u(i + 1, j));
            d.vy(i, j) = 0.5 * (s.v.w(i, j) + s.v.w(i, j + 1));
        }
    return d;
}

void write_snapshot_csv(const State& s, const Grid& g, const fs::path& path) {
    SnapshotData d = snapshot_of(s, g);
    std::ofstream out = open_out(path);
    out << "# chb snapshot version=" << d.header.version << "\n";
    out << "# t=" << fmt(d.header.t) << "\n";
    out << "# grid Lx=" << fmt(g.Lx) << " Ly=" << fmt(g.Ly) << " nx=" << g.nx << " ny=" << g.ny << "\n";
    out << "# fields=phi,mu,sigma,p,vx,vy\n";
    out << "i,j,x,y,phi,mu,sigma,p,vx,vy\n";
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
            out << i << ',' << j << ',' << fmt(g.xc(i)) << ',' << fmt(g.yc(j)) << ',' << fmt(d.phi(i, j)) << ','
                << fmt(d.mu(i, j)) << ',' << fmt(d.sigma(i, j)) << ',' << fmt(d.p(i, j)) << ',' << fmt(d.vx(i, j))
                << ',' << fmt(d.vy(i, j)) << '\n';
    close_out(out, path);
}

SnapshotData read_snapshot_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    std::map<std::string, std::string> h;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error("read_snapshot_csv: " + path.string() + ": " + what);
    };
    while (std::getline(in, line) && !line.empty() && line[0] == '#')
        for (auto& [k, v] : header_fields(line.substr(1))) h[k] = v;
    for (const char* k : {"version", "t", "Lx", "Ly", "nx", "ny", "fields"})
        if (!h.count(k)) fail(std::string("missing header field ") + k);
    if (line != "i,j,x,y,phi,mu,sigma,p,vx,vy") fail("unexpected column header '" + line + "'");
    SnapshotData d;
    try {
        d.header.version = parse_int(h["version"]);
        d.header.t = parse_double(h["t"]);
        d.header.grid = make_grid(parse_double(h["Lx"]), parse_double(h["Ly"]), parse_int(h["nx"]), parse_int(h["ny"]));
    } catch (const std::exception& e) {
        fail(e.what());
    }
    d.header.fields = split(h["fields"], ',');
    const Grid& g = d.header.grid;
    CellField* cols[6] = {&d.phi, &d.mu, &d.sigma, &d.p, &d.vx, &d.vy};
    for (CellField* c : cols) *c = CellField(g);
    std::vector<bool> filled(static_cast<std::size_t>(g.cells()), false);
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != 10) fail("row " + std::to_string(rows) + " has " + std::to_string(parts.size()) + " columns");
        int i = parse_int(parts[0]), j = parse_int(parts[1]);
        if (i < 0 || j < 0 || i >= g.nx || j >= g.ny || filled[static_cast<std::size_t>(g.idx(i, j))])
            fail("bad or repeated cell index");
        filled[static_cast<std::size_t>(g.idx(i, j))] = true;
        for (int q = 0; q < 6; ++q) (*cols[q])(i, j) = parse_double(parts[static_cast<std::size_t>(4 + q)]);
        ++rows;
    }
    if (rows != g.cells()) fail("expected " + std::to_string(g.cells()) + " rows, found " + std::to_string(rows));
    return d;
}

void write_snapshot_vtk(const State& s, const Grid& g, const fs::path& path) {
    SnapshotData d = snapshot_of(s, g);
    std::ofstream out = open_out(path);
    out << "# vtk DataFile Version 3.0\n";
    out << "chb snapshot t=" << fmt(s.t) << "\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << g.nx + 1 << ' ' << g.ny + 1 << " 1\n";
    out << "ORIGIN 0 0 0\n";
    out << "SPACING " << fmt(g.hx) << ' ' << fmt(g.hy) << " 1\n";
    out << "CELL_DATA " << g.cells() << "\n";
    const std::pair<const char*, const CellField*> scalars[] = {
        {"phi", &d.phi}, {"mu", &d.mu}, {"sigma", &d.sigma}, {"p", &d.p}};
    for (const auto& [name, f] : scalars) {
        out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (std::size_t k = 0; k < f->size(); ++k) out << fmt((*f)[k]) << '\n';
    }
    out << "VECTORS v double\n";
    for (std::size_t k = 0; k < d.vx.size(); ++k) out << fmt(d.vx[k]) << ' ' << fmt(d.vy[k]) << " 0\n";
    close_out(out, path);
}

std::vector<std::string> timeseries_columns() {
    return {"t",           "energy",      "mass_phi",   "mass_sigma",      "diss_mu",      "diss_nsigma",
            "diss_visc",   "bnd_sigma_sq", "src_phi_mu", "src_sigma_N",     "bnd_income",   "budget_residual",
            "div_residual", "phi_min",    "phi_max",    "cg_iters_total"};
}

namespace {

std::array<double*, 16> row_fields(DiagnosticsRow& r) {
    return {&r.t,           &r.energy,       &r.mass_phi,    &r.mass_sigma,  &r.diss_mu,     &r.diss_nsigma,
            &r.diss_visc,   &r.bnd_sigma_sq, &r.src_phi_mu,  &r.src_sigma_N, &r.bnd_income,  &r.budget_residual,
            &r.div_residual, &r.phi_min,     &r.phi_max,     &r.cg_iters_total};
}

}  // namespace

void write_timeseries(const std::vector<DiagnosticsRow>& rows, const fs::path& path) {
    std::ofstream out = open_out(path);
    auto cols = timeseries_columns();
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n';
    for (DiagnosticsRow r : rows) {
        auto f = row_fields(r);
        for (std::size_t c = 0; c < f.size(); ++c) out << (c ? "," : "") << fmt(*f[c]);
        out << '\n';
    }
    close_out(out, path);
}

std::vector<DiagnosticsRow> read_timeseries(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || split(line, ',') != timeseries_columns())
        throw std::runtime_error("read_timeseries: " + path.string() + ": unexpected header");
    std::vector<DiagnosticsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != 16) throw std::runtime_error("read_timeseries: row with " + std::to_string(parts.size()) + " columns");
        DiagnosticsRow r;
        auto f = row_fields(r);
        for (std::size_t c = 0; c < 16; ++c) *f[c] = parse_double(parts[c]);
        rows.push_back(r);
    }
    return rows;
}

fs::path output_directory(const RunConfig& cfg) {
    fs::path dir(cfg.output.directory);
    const char* root = std::getenv("CHB_OUTPUT_ROOT");
    if (root && *root && dir.is_relative()) return fs::path(root) / dir;
    return dir;
}

RunOutcome execute(const RunConfig& cfg) {
    validate_config(cfg);
    RunOutcome oc;
    oc.directory = output_directory(cfg);
    fs::create_directories(oc.directory);
    DirectoryLock lock(oc.directory);

    const Grid g = cfg.grid();
    const Model m = cfg.model();
    State s0 = initial_state_from(cfg);
    RunOptions ro;
    ro.steps = cfg.steps();
    ro.snapshot_every = cfg.snapshot_every;
    oc.result = run(s0, cfg.scheme(), m, ro);

    const fs::path config_copy = oc.directory / "config.ini";
    save_config(cfg, config_copy);
    oc.files.push_back(config_copy);
    if (cfg.output.timeseries) {
        fs::path p = oc.directory / "timeseries.csv";
        write_timeseries(oc.result.rows, p);
        oc.files.push_back(p);
    }
    for (const State& s : oc.result.snapshots) {
        char name[32];
        std::snprintf(name, sizeof name, "snapshot_%06lld", std::llround(s.t / cfg.dt));
        if (cfg.output.csv) {
            fs::path p = oc.directory / (std::string(name) + ".csv");
            write_snapshot_csv(s, g, p);
            oc.files.push_back(p);
        }
        if (cfg.output.vtk) {
            fs::path p = oc.directory / (std::string(name) + ".vtk");
            write_snapshot_vtk(s, g, p);
            oc.files.push_back(p);
        }
    }
    return oc;
}

}  // namespace chb
