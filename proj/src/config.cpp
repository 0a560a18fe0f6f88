#include "sqglab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <variant>

namespace sqglab {

namespace {

std::string describe(int line, const std::string& field, const std::string& msg) {
    std::string out = "config: ";
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!field.empty()) out += field + ": ";
    return out + msg;
}

}  // namespace

ConfigError::ConfigError(int line, std::string field, const std::string& msg)
    : std::runtime_error(describe(line, field, msg)), line_(line), field_(std::move(field)) {}

std::string datum_name(DatumKind d) {
    switch (d) {
        case DatumKind::Background: return "background";
        case DatumKind::Perturbed: return "perturbed";
        case DatumKind::Glued: return "glued";
        case DatumKind::ProductMode: return "product_mode";
        case DatumKind::Random: return "random";
    }
    return "?";
}

DatumKind parse_datum(const std::string& s) {
    for (DatumKind d : {DatumKind::Background, DatumKind::Perturbed, DatumKind::Glued, DatumKind::ProductMode,
                        DatumKind::Random})
        if (datum_name(d) == s) return d;
    throw std::invalid_argument("unknown datum '" + s + "' (background, perturbed, glued, product_mode, random)");
}

SolverConfig RunConfig::solver_config() const {
    SolverConfig c;
    c.dt = solver.dt;
    c.t_end = solver.t_end;
    c.dealias = solver.dealias;
    c.filter_strength = solver.filter_strength;
    c.filter_order = solver.filter_order;
    c.cfl_target = solver.cfl_target;
    return c;
}

Preset RunConfig::as_preset() const {
    const ConstructionBlock& b = construction;
    Preset p;
    p.name = b.preset;
    p.s = b.s;
    p.K = b.K;
    p.P = b.P;
    p.lambda = b.lambda;
    p.n = b.n;
    p.L = b.L;
    p.B = b.B;
    p.eta = b.eta;
    p.gamma = b.gamma;
    p.epsilon = b.epsilon;
    p.lambda_t = b.lambda_tilde;
    p.N_t = b.N_tilde;
    p.t_end = solver.t_end;
    p.cutoff = b.cutoff;
    return p;
}

RunConfig config_from_preset(const std::string& preset) {
    const Preset p = make_preset(preset);
    RunConfig c;
    ConstructionBlock& b = c.construction;
    b.preset = p.name;
    b.s = p.s;
    b.K = p.K;
    b.P = p.P;
    b.lambda = p.lambda;
    b.B = p.B;
    b.eta = p.eta;
    b.gamma = p.gamma;
    b.epsilon = p.epsilon;
    b.cutoff = p.cutoff;
    b.n = p.n;
    b.L = p.L;
    b.lambda_tilde = p.lambda_t;
    b.N_tilde = p.N_t;
    c.solver.t_end = p.t_end;
    return c;
}

// ---- parsing -----------------------------------------------------------------

namespace {

using Value = std::variant<double, bool, std::string, std::vector<double>>;

struct Entry {
    std::string field;  // table.key or key
    Value value;
    std::string raw;
    int line = 0;
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& tok, double& out) {
    if (tok.empty()) return false;
    const char* b = tok.data();
    const char* e = b + tok.size();
    if (*b == '+') ++b;
    const auto r = std::from_chars(b, e, out);
    return r.ec == std::errc() && r.ptr == e && std::isfinite(out);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '"' && (k == 0 || s[k - 1] != '\\')) in_str = !in_str;
        if (s[k] == '#' && !in_str) return s.substr(0, k);
    }
    return s;
}

Value parse_value(const std::string& raw, int line, const std::string& field) {
    if (raw.empty()) throw ConfigError(line, field, "missing value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') throw ConfigError(line, field, "unterminated string");
        std::string out;
        for (std::size_t k = 1; k + 1 < raw.size(); ++k) {
            if (raw[k] == '\\') {
                if (k + 2 >= raw.size() || (raw[k + 1] != '"' && raw[k + 1] != '\\'))
                    throw ConfigError(line, field, "unsupported escape in string");
                out += raw[++k];
            } else if (raw[k] == '"') {
                throw ConfigError(line, field, "unexpected quote inside string");
            } else {
                out += raw[k];
            }
        }
        return out;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '[') {
        if (raw.back() != ']') throw ConfigError(line, field, "unterminated array");
        std::vector<double> out;
        const std::string body = trim(raw.substr(1, raw.size() - 2));
        if (body.empty()) return out;
        std::stringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v;
            if (!parse_number(trim(item), v)) throw ConfigError(line, field, "array entry '" + trim(item) + "' is not a number");
            out.push_back(v);
        }
        if (body.back() == ',') throw ConfigError(line, field, "trailing comma in array");
        return out;
    }
    double v;
    if (!parse_number(raw, v)) throw ConfigError(line, field, "cannot parse value '" + raw + "'");
    return v;
}

const char* type_name(const Value& v) {
    switch (v.index()) {
        case 0: return "number";
        case 1: return "boolean";
        case 2: return "string";
        default: return "array";
    }
}

double as_double(const Entry& e) {
    if (const double* d = std::get_if<double>(&e.value)) return *d;
    throw ConfigError(e.line, e.field, std::string("expected a number, got ") + type_name(e.value));
}

long long as_int(const Entry& e) {
    const double d = as_double(e);
    if (d != std::floor(d) || std::abs(d) > 9.0e15 || e.raw.find_first_of(".eE") != std::string::npos)
        throw ConfigError(e.line, e.field, "expected an integer, got '" + e.raw + "'");
    return static_cast<long long>(d);
}

bool as_bool(const Entry& e) {
    if (const bool* b = std::get_if<bool>(&e.value)) return *b;
    throw ConfigError(e.line, e.field, std::string("expected true or false, got ") + type_name(e.value));
}

std::string as_string(const Entry& e) {
    if (const std::string* s = std::get_if<std::string>(&e.value)) return *s;
    throw ConfigError(e.line, e.field, std::string("expected a quoted string, got ") + type_name(e.value));
}

std::vector<double> as_list(const Entry& e) {
    if (const auto* v = std::get_if<std::vector<double>>(&e.value)) return *v;
    throw ConfigError(e.line, e.field, std::string("expected an array of numbers, got ") + type_name(e.value));
}

using Setter = std::function<void(RunConfig&, const Entry&)>;

int checked_int(const Entry& e) {
    const long long v = as_int(e);
    if (v < -2147483647LL || v > 2147483647LL) throw ConfigError(e.line, e.field, "integer out of range");
    return static_cast<int>(v);
}

const std::map<std::string, Setter>& schema() {
    static const std::map<std::string, Setter> m = {
        {"seed",
         [](RunConfig& c, const Entry& e) {
             std::uint64_t v = 0;
             const auto r = std::from_chars(e.raw.data(), e.raw.data() + e.raw.size(), v);
             if (r.ec != std::errc() || r.ptr != e.raw.data() + e.raw.size())
                 throw ConfigError(e.line, e.field, "expected a non-negative integer, got '" + e.raw + "'");
             c.seed = v;
         }},
        {"construction.preset", [](RunConfig& c, const Entry& e) { c.construction.preset = as_string(e); }},
        {"construction.s", [](RunConfig& c, const Entry& e) { c.construction.s = as_double(e); }},
        {"construction.K", [](RunConfig& c, const Entry& e) { c.construction.K = as_double(e); }},
        {"construction.P", [](RunConfig& c, const Entry& e) { c.construction.P = checked_int(e); }},
        {"construction.lambda", [](RunConfig& c, const Entry& e) { c.construction.lambda = as_double(e); }},
        {"construction.B", [](RunConfig& c, const Entry& e) { c.construction.B = as_double(e); }},
        {"construction.eta", [](RunConfig& c, const Entry& e) { c.construction.eta = as_double(e); }},
        {"construction.gamma", [](RunConfig& c, const Entry& e) { c.construction.gamma = as_double(e); }},
        {"construction.epsilon", [](RunConfig& c, const Entry& e) { c.construction.epsilon = as_double(e); }},
        {"construction.J", [](RunConfig& c, const Entry& e) { c.construction.J = checked_int(e); }},
        {"construction.ratio", [](RunConfig& c, const Entry& e) { c.construction.ratio = as_double(e); }},
        {"construction.cutoff", [](RunConfig& c, const Entry& e) { c.construction.cutoff = as_string(e); }},
        {"construction.n", [](RunConfig& c, const Entry& e) { c.construction.n = checked_int(e); }},
        {"construction.L", [](RunConfig& c, const Entry& e) { c.construction.L = as_double(e); }},
        {"construction.lambda_tilde", [](RunConfig& c, const Entry& e) { c.construction.lambda_tilde = as_double(e); }},
        {"construction.N_tilde", [](RunConfig& c, const Entry& e) { c.construction.N_tilde = as_double(e); }},
        {"construction.datum",
         [](RunConfig& c, const Entry& e) {
             try {
                 c.construction.datum = parse_datum(as_string(e));
             } catch (const std::invalid_argument& x) {
                 throw ConfigError(e.line, e.field, x.what());
             }
         }},
        {"construction.q", [](RunConfig& c, const Entry& e) { c.construction.q = checked_int(e); }},
        {"construction.band", [](RunConfig& c, const Entry& e) { c.construction.band = checked_int(e); }},
        {"solver.dt", [](RunConfig& c, const Entry& e) { c.solver.dt = as_double(e); }},
        {"solver.t_end", [](RunConfig& c, const Entry& e) { c.solver.t_end = as_double(e); }},
        {"solver.dealias", [](RunConfig& c, const Entry& e) { c.solver.dealias = as_bool(e); }},
        {"solver.filter_strength", [](RunConfig& c, const Entry& e) { c.solver.filter_strength = as_double(e); }},
        {"solver.filter_order", [](RunConfig& c, const Entry& e) { c.solver.filter_order = checked_int(e); }},
        {"solver.cfl_target", [](RunConfig& c, const Entry& e) { c.solver.cfl_target = as_double(e); }},
        {"output.dir", [](RunConfig& c, const Entry& e) { c.output.dir = as_string(e); }},
        {"output.diagnostics_every", [](RunConfig& c, const Entry& e) { c.output.diagnostics_every = checked_int(e); }},
        {"output.snapshot_every", [](RunConfig& c, const Entry& e) { c.output.snapshot_every = checked_int(e); }},
        {"output.spectral_snapshots", [](RunConfig& c, const Entry& e) { c.output.spectral_snapshots = as_bool(e); }},
        {"output.betas", [](RunConfig& c, const Entry& e) { c.output.betas = as_list(e); }},
    };
    return m;
}

const std::set<std::string> kTables{"construction", "solver", "output"};

}  // namespace

RunConfig parse_config(const std::string& text) {
    std::vector<Entry> entries;
    std::set<std::string> seen_tables, seen_fields;
    std::string table;
    std::istringstream in(text);
    std::string raw_line;
    int lineno = 0;
    while (std::getline(in, raw_line)) {
        ++lineno;
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(lineno, "", "malformed table header '" + line + "'");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!kTables.count(name)) throw ConfigError(lineno, name, "unknown table (construction, solver, output)");
            if (!seen_tables.insert(name).second) throw ConfigError(lineno, name, "table defined twice");
            table = name;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(lineno, "", "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty() || !(std::isalpha(static_cast<unsigned char>(key[0])) || key[0] == '_'))
            throw ConfigError(lineno, key, "invalid key");
        for (char ch : key)
            if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_')) throw ConfigError(lineno, key, "invalid key");
        const std::string field = table.empty() ? key : table + "." + key;
        if (!schema().count(field)) throw ConfigError(lineno, field, "unknown key");
        if (!seen_fields.insert(field).second) throw ConfigError(lineno, field, "key given twice");
        const std::string raw = trim(line.substr(eq + 1));
        entries.push_back({field, parse_value(raw, lineno, field), raw, lineno});
    }
    if (entries.empty()) throw ConfigError(0, "", "empty configuration (no keys); defaults are never implied");

    RunConfig c;
    for (const auto& e : entries)
        if (e.field == "construction.preset") {
            try {
                c = config_from_preset(as_string(e));
            } catch (const std::invalid_argument& x) {
                throw ConfigError(e.line, e.field, x.what());
            }
        }
    std::map<std::string, int> lines;
    for (const auto& e : entries) {
        schema().at(e.field)(c, e);
        lines[e.field] = e.line;
    }
    try {
        validate_config(c);
    } catch (const ConfigError& x) {
        // A joint constraint ("construction.s/gamma/eta/epsilon") points at the
        // last line that set one of its fields.
        int line = 0;
        const std::string& f = x.field();
        const auto dot = f.find('.');
        const std::string table_prefix = dot == std::string::npos ? "" : f.substr(0, dot + 1);
        std::size_t start = table_prefix.size();
        while (start <= f.size()) {
            const auto slash = std::min(f.find('/', start), f.size());
            const auto it = lines.find(table_prefix + f.substr(start, slash - start));
            if (it != lines.end()) line = std::max(line, it->second);
            start = slash + 1;
        }
        if (line == 0) throw;
        const std::string msg = x.what();
        const std::string prefix = "config: " + f + ": ";
        throw ConfigError(line, f, msg.rfind(prefix, 0) == 0 ? msg.substr(prefix.size()) : msg);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(0, "", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

void validate_config(const RunConfig& c) {
    const ConstructionBlock& b = c.construction;
    auto fail = [](const std::string& field, const std::string& msg) { throw ConfigError(0, field, msg); };
    if (b.n < 16 || b.n % 2) fail("construction.n", "grid size must be even and at least 16");
    if (!(b.L > 0)) fail("construction.L", "domain length must be positive");
    if (b.P < 1) fail("construction.P", "P must be at least 1");
    if (b.J < 1) fail("construction.J", "J must be at least 1");
    if (!(b.ratio > 1)) fail("construction.ratio", "ratio must exceed 1");
    if (b.q < 0) fail("construction.q", "q must be non-negative");
    if (b.band < 0 || b.band > b.n / 3) fail("construction.band", "band must lie in [0, n/3]");
    if (b.lambda_tilde < 0) fail("construction.lambda_tilde", "must be non-negative (0 selects lambda^B)");
    if (b.N_tilde < 0) fail("construction.N_tilde", "must be non-negative (0 selects lambda_t^{1-eta})");
    try {
        CutoffSpec::parse(b.cutoff);
    } catch (const std::exception& e) {
        fail("construction.cutoff", e.what());
    }
    const SolverBlock& s = c.solver;
    if (s.dt < 0) fail("solver.dt", "dt must be non-negative (0 selects the CFL step)");
    if (!(s.t_end > 0)) fail("solver.t_end", "t_end must be positive");
    if (!(s.cfl_target > 0 && s.cfl_target <= 0.5)) fail("solver.cfl_target", "cfl_target must lie in (0, 0.5]");
    if (s.filter_strength < 0) fail("solver.filter_strength", "must be non-negative");
    if (s.filter_order < 2) fail("solver.filter_order", "must be at least 2");
    const OutputBlock& o = c.output;
    if (o.diagnostics_every < 1) fail("output.diagnostics_every", "must be at least 1");
    if (o.snapshot_every < 0) fail("output.snapshot_every", "must be non-negative");
    if (o.dir.empty()) fail("output.dir", "must not be empty");

    // Construction invariants apply to the data that use the background.
    if (b.datum == DatumKind::ProductMode || b.datum == DatumKind::Random) return;
    try {
        validate_exponents(b.s, b.gamma, b.eta, b.epsilon);
    } catch (const std::exception& e) {
        fail("construction.s/gamma/eta/epsilon", e.what());
    }
    try {
        const Grid g = c.grid();
        const BackgroundParams bp = make_background_params(b.s, b.K, b.P, b.lambda, g);
        if (b.datum == DatumKind::Perturbed)
            make_perturbation_params(bp, b.B, b.eta, b.gamma, b.epsilon, g, b.lambda_tilde, b.N_tilde);
        if (b.datum == DatumKind::Glued) plan_glued(glue_schedule(c.as_preset(), b.J, b.ratio, true), g);
    } catch (const std::exception& e) {
        fail("construction.lambda", e.what());
    }
}

// ---- serialisation ---------------------------------------------------------

namespace {

std::string num(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    std::string s(buf, r.ptr);
    // Keep doubles recognisable as such; integers are written without a point.
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
    const ConstructionBlock& b = c.construction;
    std::ostringstream o;
    o << "seed = " << c.seed << "\n\n[construction]\n"
      << "preset = " << quote(b.preset) << "\n"
      << "datum = " << quote(datum_name(b.datum)) << "\n"
      << "s = " << num(b.s) << "\nK = " << num(b.K) << "\nP = " << b.P << "\nlambda = " << num(b.lambda) << "\n"
      << "B = " << num(b.B) << "\neta = " << num(b.eta) << "\ngamma = " << num(b.gamma) << "\nepsilon = " << num(b.epsilon)
      << "\n"
      << "J = " << b.J << "\nratio = " << num(b.ratio) << "\ncutoff = " << quote(b.cutoff) << "\n"
      << "n = " << b.n << "\nL = " << num(b.L) << "\n"
      << "lambda_tilde = " << num(b.lambda_tilde) << "\nN_tilde = " << num(b.N_tilde) << "\n"
      << "q = " << b.q << "\nband = " << b.band << "\n\n[solver]\n"
      << "dt = " << num(c.solver.dt) << "\nt_end = " << num(c.solver.t_end) << "\n"
      << "dealias = " << (c.solver.dealias ? "true" : "false") << "\n"
      << "filter_strength = " << num(c.solver.filter_strength) << "\nfilter_order = " << c.solver.filter_order << "\n"
      << "cfl_target = " << num(c.solver.cfl_target) << "\n\n[output]\n"
      << "dir = " << quote(c.output.dir) << "\n"
      << "diagnostics_every = " << c.output.diagnostics_every << "\n"
      << "snapshot_every = " << c.output.snapshot_every << "\n"
      << "spectral_snapshots = " << (c.output.spectral_snapshots ? "true" : "false") << "\n"
      << "betas = [";
    for (std::size_t k = 0; k < c.output.betas.size(); ++k) o << (k ? ", " : "") << num(c.output.betas[k]);
    o << "]\n";
    return o.str();
}

bool operator==(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

// ---- resolved parameters and data -----------------------------------------

nlohmann::json resolved_metadata(const RunConfig& c) {
    using nlohmann::json;
    const ConstructionBlock& b = c.construction;
    const Grid g = c.grid();
    json j;
    j["datum"] = datum_name(b.datum);
    j["n"] = g.n;
    j["domain_length"] = g.L;
    j["seed"] = c.seed;
    j["config"] = serialize_config(c);
    if (b.datum == DatumKind::ProductMode) {
        j["q"] = b.q;
        return j;
    }
    if (b.datum == DatumKind::Random) {
        j["band"] = b.band;
        return j;
    }
    auto bg = [](const BackgroundParams& p) {
        return json{{"s", p.s},
                    {"K", p.K},
                    {"P", p.P},
                    {"lambda_requested", p.lambda_requested},
                    {"lambda", p.lambda},
                    {"N", p.N},
                    {"k_lattice", p.k_lattice},
                    {"k", p.k},
                    {"amplitude", p.amplitude()},
                    {"center", p.center()},
                    {"annulus", {0.5 * p.center(), 2.0 * p.center()}},
                    {"sigma_predicted", std::log(p.N) / std::sqrt(2.0)}};
    };
    auto pert = [](const PerturbationParams& q, const BackgroundParams& p) {
        return json{{"lambda_tilde", q.lambda_t}, {"N_tilde", q.N_t},         {"kp", q.kp},
                    {"kp_lattice", q.kp_lattice}, {"amplitude", q.amplitude(p)}, {"desk_override", q.desk_override}};
    };
    if (b.datum == DatumKind::Glued) {
        json pieces = json::array();
        for (const auto& m : plan_glued(glue_schedule(c.as_preset(), b.J, b.ratio, true), g)) {
            json pj{{"j", m.j}, {"background", bg(m.background)}, {"annulus", {m.r_inner, m.r_outer}}};
            pj["perturbation"] = pert(m.perturbation, m.background);
            pieces.push_back(pj);
        }
        j["pieces"] = pieces;
        return j;
    }
    const BackgroundParams bp = make_background_params(b.s, b.K, b.P, b.lambda, g);
    j["background"] = bg(bp);
    if (b.datum == DatumKind::Perturbed)
        j["perturbation"] =
            pert(make_perturbation_params(bp, b.B, b.eta, b.gamma, b.epsilon, g, b.lambda_tilde, b.N_tilde), bp);
    return j;
}

ScalarField build_datum(const RunConfig& c) {
    const ConstructionBlock& b = c.construction;
    const Grid g = c.grid();
    switch (b.datum) {
        case DatumKind::ProductMode: {
            const double q = b.q * g.kunit();
            return ScalarField::sample(g, [q](double x, double y) { return std::sin(q * x) * std::sin(q * y); });
        }
        case DatumKind::Random: {
            // Band-limited: independent normal cos/sin amplitudes for |k|_inf <= band,
            // damped like (1 + |k|^2)^{-1}.
            std::mt19937_64 rng(c.seed);
            std::normal_distribution<double> nd(0.0, 1.0);
            ScalarField f(g, 0.0);
            const double ku = g.kunit();
            for (int k1 = -b.band; k1 <= b.band; ++k1)
                for (int k2 = 0; k2 <= b.band; ++k2) {
                    if (k2 == 0 && k1 < 0) continue;
                    const double damp = 1.0 / (1.0 + k1 * k1 + k2 * k2);
                    const double a = nd(rng) * damp, s = (k1 == 0 && k2 == 0) ? 0.0 : nd(rng) * damp;
                    for (int i = 0; i < g.n; ++i)
                        for (int j = 0; j < g.n; ++j) {
                            const double ph = ku * (k1 * g.coord(i) + k2 * g.coord(j));
                            f.at(i, j) += a * std::cos(ph) + s * std::sin(ph);
                        }
                }
            return f;
        }
        case DatumKind::Glued: return make_glued(glue_schedule(c.as_preset(), b.J, b.ratio, true), g).theta;
        case DatumKind::Background:
        case DatumKind::Perturbed: {
            const BackgroundParams bp = make_background_params(b.s, b.K, b.P, b.lambda, g);
            const CutoffSpec cut = CutoffSpec::parse(b.cutoff);
            ScalarField th = make_background(bp, cut, g);
            if (b.datum == DatumKind::Perturbed)
                th += make_perturbation(
                    bp, make_perturbation_params(bp, b.B, b.eta, b.gamma, b.epsilon, g, b.lambda_tilde, b.N_tilde), cut, g);
            return th;
        }
    }
    throw std::logic_error("unhandled datum");
}

}  // namespace sqglab
