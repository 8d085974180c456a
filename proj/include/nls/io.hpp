#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nls/confinement.hpp"
#include "nls/continuation.hpp"
#include "nls/reduction.hpp"

namespace nls::io {

using json = nlohmann::ordered_json;

// bumped whenever the envelope layout or the cache record format changes
inline constexpr std::uint32_t schema_version = 1;

// Configuration problems are reported before any solve starts and map to a
// distinct exit code, unlike SolverError.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// every float that leaves the process goes through this; 17 significant
// digits round-trip a double exactly
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// One run of the tool: a command plus the flat bag of knobs the subcommands
// read. Fields a command does not use are ignored by it but still echoed.
struct RunConfig {
    std::string command; // ground-state | scan | sweep | reduce | confine | verify

    // problem parameters
    int N = 3;
    double q = 3.0;
    double t = 1.0;
    double lambda = 1.0;
    bool crit = true;
    double a = 1.0;  // prescribed mass (reduce)
    double mu = 0.0; // requested coupling (reduce); 0 builds the curve only
    double p = 4.0;  // confined exponent

    // grids; zero means "derive a default"
    double t_min = 0.0, t_max = 0.0;
    int points = 0;
    double d_min = 0.0, d_max = 0.0;
    int n_scan = 160;
    int ns = 0, nz = 0;
    double S = 0.0, Z = 0.0;

    // tolerances
    double ctol = 1e-5; // certificate acceptance
    double tol = 1e-10; // confined Euler-Lagrange residual

    // orchestration
    int workers = 1;
    std::string outdir = ".";
    std::string cache_dir; // empty: $NLS_CACHE_DIR, then .nls-cache
    bool cold_check = false;

    Params params() const {
        Params P;
        P.N = N;
        P.q = q;
        P.t = t;
        P.lambda = lambda;
        P.crit = crit;
        return P;
    }

    ScanOptions scan_options() const {
        ScanOptions so;
        so.d_min = d_min;
        so.d_max = d_max;
        so.n_scan = n_scan;
        so.ground.ctol = ctol;
        return so;
    }

    confined::SolveOptions confine_options() const {
        confined::SolveOptions so;
        so.tol = tol;
        if (ns > 0) so.mesh.ns = ns;
        if (nz > 0) so.mesh.nz = nz;
        if (S > 0.0) so.mesh.S = S;
        if (Z > 0.0) so.mesh.Z = Z;
        return so;
    }

    void validate() const {
        static const std::vector<std::string> known = {"ground-state", "scan",    "sweep",
                                                       "reduce",       "confine", "verify"};
        bool ok = false;
        for (const auto& c : known) ok = ok || c == command;
        if (!ok)
            throw ConfigError("unknown command '" + command +
                              "' (expected ground-state|scan|sweep|reduce|confine|verify)");
        if (workers < 1) throw ConfigError("workers: need >= 1");
        if (!(ctol > 0.0)) throw ConfigError("ctol: need > 0");
        if (!(tol > 0.0)) throw ConfigError("tol: need > 0");
        if (outdir.empty()) throw ConfigError("outdir: empty path");

        const bool radial = command == "ground-state" || command == "scan" ||
                            command == "sweep" || command == "reduce";
        try {
            if (radial) params().validate();
            if (command == "confine") confine_options().mesh.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (radial) {
            if (n_scan < 8) throw ConfigError("n-scan: need >= 8");
            if (d_min < 0.0 || d_max < 0.0) throw ConfigError("d-min/d-max: need >= 0");
            if (d_min > 0.0 && d_max > 0.0 && !(d_min < d_max))
                throw ConfigError("d-min/d-max: need d-min < d-max");
        }
        if (command == "sweep") {
            if (!(t_min > 0.0 && t_min < t_max))
                throw ConfigError("sweep: need 0 < t-min < t-max");
            if (points < 2) throw ConfigError("sweep: need points >= 2");
        }
        if (command == "reduce") {
            if (!(a > 0.0)) throw ConfigError("reduce: need a > 0");
            if (mu < 0.0) throw ConfigError("reduce: need mu >= 0");
            if (points > 0 && !(t_min > 0.0 && t_min < t_max))
                throw ConfigError("reduce: need 0 < t-min < t-max when points is set");
        }
        if (command == "confine") {
            if (!(p > 2.0 && p < 6.0)) throw ConfigError("confine: need 2 < p < 6");
            if (points >= 2) {
                if (!(t_min > 0.0 && t_min < t_max))
                    throw ConfigError("confine: need 0 < t-min < t-max");
            } else if (points != 0) {
                throw ConfigError("confine: points must be 0 (single t) or >= 2");
            } else if (!(t > 0.0)) {
                throw ConfigError("confine: need t > 0");
            }
        }
    }
};

// Sorted key=value view of the whole config: the flat file format, the
// envelope echo and the input hash all share it.
inline std::map<std::string, std::string> flat_echo(const RunConfig& c) {
    std::map<std::string, std::string> kv;
    auto b = [](bool v) { return v ? "true" : "false"; };
    kv["command"] = c.command;
    kv["N"] = std::to_string(c.N);
    kv["q"] = fmt17(c.q);
    kv["t"] = fmt17(c.t);
    kv["lambda"] = fmt17(c.lambda);
    kv["crit"] = b(c.crit);
    kv["a"] = fmt17(c.a);
    kv["mu"] = fmt17(c.mu);
    kv["p"] = fmt17(c.p);
    kv["t-min"] = fmt17(c.t_min);
    kv["t-max"] = fmt17(c.t_max);
    kv["points"] = std::to_string(c.points);
    kv["d-min"] = fmt17(c.d_min);
    kv["d-max"] = fmt17(c.d_max);
    kv["n-scan"] = std::to_string(c.n_scan);
    kv["ns"] = std::to_string(c.ns);
    kv["nz"] = std::to_string(c.nz);
    kv["S"] = fmt17(c.S);
    kv["Z"] = fmt17(c.Z);
    kv["ctol"] = fmt17(c.ctol);
    kv["tol"] = fmt17(c.tol);
    kv["workers"] = std::to_string(c.workers);
    kv["outdir"] = c.outdir;
    kv["cache-dir"] = c.cache_dir;
    kv["cold-check"] = b(c.cold_check);
    return kv;
}

inline std::string canonical(const RunConfig& c) {
    std::string s;
    for (const auto& [k, v] : flat_echo(c)) s += k + "=" + v + "\n";
    return s;
}

// Set one field from its flat key; keys are exactly the CLI flag names.
inline void apply_kv(RunConfig& cfg, const std::string& key, const std::string& val) {
    auto bad = [&]() -> ConfigError {
        return ConfigError("bad value '" + val + "' for key '" + key + "'");
    };
    auto as_d = [&] {
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(val, &pos);
        } catch (const std::exception&) {
            throw bad();
        }
        if (pos != val.size()) throw bad();
        return v;
    };
    auto as_i = [&] {
        std::size_t pos = 0;
        int v = 0;
        try {
            v = std::stoi(val, &pos);
        } catch (const std::exception&) {
            throw bad();
        }
        if (pos != val.size()) throw bad();
        return v;
    };
    auto as_b = [&] {
        if (val == "true" || val == "1" || val == "yes") return true;
        if (val == "false" || val == "0" || val == "no") return false;
        throw bad();
    };
    if (key == "command") cfg.command = val;
    else if (key == "N") cfg.N = as_i();
    else if (key == "q") cfg.q = as_d();
    else if (key == "t") cfg.t = as_d();
    else if (key == "lambda") cfg.lambda = as_d();
    else if (key == "crit") cfg.crit = as_b();
    else if (key == "a") cfg.a = as_d();
    else if (key == "mu") cfg.mu = as_d();
    else if (key == "p") cfg.p = as_d();
    else if (key == "t-min") cfg.t_min = as_d();
    else if (key == "t-max") cfg.t_max = as_d();
    else if (key == "points") cfg.points = as_i();
    else if (key == "d-min") cfg.d_min = as_d();
    else if (key == "d-max") cfg.d_max = as_d();
    else if (key == "n-scan") cfg.n_scan = as_i();
    else if (key == "ns") cfg.ns = as_i();
    else if (key == "nz") cfg.nz = as_i();
    else if (key == "S") cfg.S = as_d();
    else if (key == "Z") cfg.Z = as_d();
    else if (key == "ctol") cfg.ctol = as_d();
    else if (key == "tol") cfg.tol = as_d();
    else if (key == "workers") cfg.workers = as_i();
    else if (key == "outdir") cfg.outdir = val;
    else if (key == "cache-dir") cfg.cache_dir = val;
    else if (key == "cold-check") cfg.cold_check = as_b();
    else throw ConfigError("unknown config key '" + key + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

// Flat key=value file, '#' comments, one assignment per line.
inline RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(file.string() + ":" + std::to_string(lineno) +
                              ": expected key=value");
        try {
            apply_kv(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// profile cache

// Converged shooting solutions keyed by every input that influences them:
// parameters, height window and all integrator/certificate tolerances. A hit
// returns the stored record bit for bit, so cached and fresh runs emit
// identical payloads.
class Cache {
  public:
    explicit Cache(const std::string& override_dir) {
        std::string d = override_dir;
        if (d.empty())
            if (const char* env = std::getenv("NLS_CACHE_DIR")) d = env;
        if (d.empty()) d = ".nls-cache";
        dir_ = d;
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        enabled_ = !ec;
        if (ec) std::cerr << "cache: cannot create " << dir_.string() << ", caching off\n";
    }
    Cache(const Cache&) = delete;
    Cache& operator=(const Cache&) = delete;

    const std::filesystem::path& dir() const { return dir_; }
    int hits() const { return hits_.load(); }
    int misses() const { return misses_.load(); }

    std::optional<SolutionRecord> lookup(const std::string& key) const {
        if (!enabled_) return std::nullopt;
        const auto path = entry(key);
        std::ifstream f(path, std::ios::binary);
        if (!f) {
            ++misses_;
            return std::nullopt;
        }
        char magic[4] = {};
        std::uint32_t ver = 0;
        f.read(magic, 4);
        f.read(reinterpret_cast<char*>(&ver), sizeof ver);
        if (!f || std::string_view(magic, 4) != "NLSC") {
            std::cerr << "cache: corrupt entry ignored: " << path.string() << "\n";
            ++misses_;
            return std::nullopt;
        }
        if (ver != schema_version) {
            std::cerr << "cache: schema " << ver << " != " << schema_version
                      << ", ignoring " << path.string() << "\n";
            ++misses_;
            return std::nullopt;
        }
        SolutionRecord rec;
        if (!read_record(f, rec) || f.peek() != std::ifstream::traits_type::eof()) {
            std::cerr << "cache: corrupt entry ignored: " << path.string() << "\n";
            ++misses_;
            return std::nullopt;
        }
        ++hits_;
        return rec;
    }

    void store(const std::string& key, const SolutionRecord& rec) const {
        if (!enabled_) return;
        const auto path = entry(key);
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream f(tmp, std::ios::binary);
            if (!f) return;
            f.write("NLSC", 4);
            const std::uint32_t ver = schema_version;
            f.write(reinterpret_cast<const char*>(&ver), sizeof ver);
            write_record(f, rec);
            if (!f) return;
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
    }

  private:
    std::filesystem::path entry(const std::string& key) const {
        return dir_ / (hex64(fnv1a64(key)) + ".rec");
    }

    template <class T>
    static void put(std::ofstream& f, const T& v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    template <class T>
    static bool get(std::ifstream& f, T& v) {
        f.read(reinterpret_cast<char*>(&v), sizeof v);
        return bool(f);
    }
    static void put_vec(std::ofstream& f, const std::vector<double>& v) {
        const std::uint64_t n = v.size();
        put(f, n);
        f.write(reinterpret_cast<const char*>(v.data()),
                std::streamsize(n * sizeof(double)));
    }
    static bool get_vec(std::ifstream& f, std::vector<double>& v) {
        std::uint64_t n = 0;
        if (!get(f, n) || n > (1u << 28)) return false;
        v.resize(n);
        f.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(double)));
        return bool(f);
    }
    static void put_quad(std::ofstream& f, const QuadratureSums& q) {
        put(f, q.mass);
        put(f, q.grad);
        put(f, q.qnorm);
        put(f, q.crit);
        put(f, std::uint8_t(q.tail_included));
    }
    static bool get_quad(std::ifstream& f, QuadratureSums& q) {
        std::uint8_t ti = 0;
        if (!(get(f, q.mass) && get(f, q.grad) && get(f, q.qnorm) && get(f, q.crit) &&
              get(f, ti)))
            return false;
        q.tail_included = ti;
        return true;
    }

    static void write_record(std::ofstream& f, const SolutionRecord& rec) {
        const Params& P = rec.profile.params;
        put(f, std::int32_t(P.N));
        put(f, P.q);
        put(f, P.t);
        put(f, P.lambda);
        put(f, std::uint8_t(P.crit));
        put(f, rec.d);
        put(f, rec.d_error);
        put(f, std::int32_t(rec.branch));
        const TailModel& tm = rec.profile.tail;
        put(f, tm.A);
        put(f, tm.kappa);
        put(f, tm.r_start);
        put(f, tm.fit_rms);
        put(f, std::uint8_t(tm.valid));
        put(f, rec.profile.d);
        put_quad(f, rec.profile.quad);
        put(f, rec.cert.energy);
        put(f, rec.cert.nehari_res);
        put(f, rec.cert.pohozaev_res);
        put(f, rec.cert.level_gap);
        put_quad(f, rec.cert.norms);
        put_vec(f, rec.profile.r);
        put_vec(f, rec.profile.u);
        put_vec(f, rec.profile.du);
    }
    static bool read_record(std::ifstream& f, SolutionRecord& rec) {
        Params& P = rec.profile.params;
        std::int32_t n32 = 0, br = 0;
        std::uint8_t crit = 0, valid = 0;
        if (!(get(f, n32) && get(f, P.q) && get(f, P.t) && get(f, P.lambda) && get(f, crit)))
            return false;
        P.N = n32;
        P.crit = crit;
        if (!(get(f, rec.d) && get(f, rec.d_error) && get(f, br))) return false;
        rec.branch = Branch(br);
        TailModel& tm = rec.profile.tail;
        if (!(get(f, tm.A) && get(f, tm.kappa) && get(f, tm.r_start) && get(f, tm.fit_rms) &&
              get(f, valid)))
            return false;
        tm.valid = valid;
        if (!get(f, rec.profile.d)) return false;
        if (!get_quad(f, rec.profile.quad)) return false;
        if (!(get(f, rec.cert.energy) && get(f, rec.cert.nehari_res) &&
              get(f, rec.cert.pohozaev_res) && get(f, rec.cert.level_gap)))
            return false;
        if (!get_quad(f, rec.cert.norms)) return false;
        return get_vec(f, rec.profile.r) && get_vec(f, rec.profile.u) &&
               get_vec(f, rec.profile.du) &&
               rec.profile.u.size() == rec.profile.r.size() &&
               rec.profile.du.size() == rec.profile.r.size();
    }

    std::filesystem::path dir_;
    bool enabled_ = false;
    mutable std::atomic<int> hits_{0}, misses_{0};
};

inline std::string ground_key(const Params& P, const ScanOptions& o) {
    std::string s = "ground\n";
    s += "N=" + std::to_string(P.N) + "\n";
    s += "q=" + fmt17(P.q) + "\n";
    s += "t=" + fmt17(P.t) + "\n";
    s += "lambda=" + fmt17(P.lambda) + "\n";
    s += std::string("crit=") + (P.crit ? "1" : "0") + "\n";
    s += "d_min=" + fmt17(o.d_min) + "\n";
    s += "d_max=" + fmt17(o.d_max) + "\n";
    s += "n_scan=" + std::to_string(o.n_scan) + "\n";
    s += "rtol=" + fmt17(o.ground.shot.rtol) + "\n";
    s += "atol_scale=" + fmt17(o.ground.shot.atol_scale) + "\n";
    s += "r_max=" + fmt17(o.ground.shot.r_max) + "\n";
    s += "dense=" + std::to_string(o.ground.shot.dense_per_step) + "\n";
    s += "max_steps=" + std::to_string(o.ground.shot.max_steps) + "\n";
    s += "bisect_rel=" + fmt17(o.ground.bisect_rel) + "\n";
    s += "cert_rtol=" + fmt17(o.ground.cert_rtol) + "\n";
    s += "cert_atol=" + fmt17(o.ground.cert_atol) + "\n";
    s += "trunc_frac=" + fmt17(o.ground.trunc_frac) + "\n";
    s += "ctol=" + fmt17(o.ground.ctol) + "\n";
    return s;
}

// ---------------------------------------------------------------------------
// envelope and CSV emission

// The JSON envelope: everything a run prints lives under "records", which is
// byte-deterministic for a fixed config; "stats" holds wall time and cache
// counters and is the only part allowed to differ between identical runs.
struct Envelope {
    json j;

    explicit Envelope(const RunConfig& cfg) {
        j["schema_version"] = schema_version;
        j["command"] = cfg.command;
        json echo = json::object();
        for (const auto& [k, v] : flat_echo(cfg)) echo[k] = v;
        j["config"] = echo;
        j["input_hash"] = hex64(fnv1a64(canonical(cfg)));
        j["records"] = json::object();
        j["warnings"] = json::array();
        j["errors"] = json::array();
        j["status"] = "ok";
    }

    json& records() { return j["records"]; }
    void warn(const std::string& what) { j["warnings"].push_back(what); }
    void fail(const std::string& what) {
        j["errors"].push_back(what);
        j["status"] = "solver_error";
    }

    std::filesystem::path write(const std::filesystem::path& outdir, double wall_ms,
                                const Cache& cache) {
        j["stats"] = json{{"wall_ms", wall_ms},
                          {"cache_hits", cache.hits()},
                          {"cache_misses", cache.misses()}};
        const auto path = outdir / "envelope.json";
        std::ofstream out(path, std::ios::binary);
        out << j.dump(2) << "\n";
        return path;
    }
};

class Csv {
  public:
    Csv(const std::filesystem::path& path, const std::string& header)
        : path_(path), f_(path, std::ios::binary) {
        if (!f_) throw ConfigError("cannot write " + path.string());
        f_ << header << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            f_ << (i ? "," : "") << cells[i];
        f_ << "\n";
    }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
    std::ofstream f_;
};

namespace detail {

inline json record_json(const SolutionRecord& rec) {
    const Certificate& c = rec.cert;
    return json{{"branch", to_string(rec.branch)},
                {"d", rec.d},
                {"d_error", rec.d_error},
                {"energy", c.energy},
                {"level_gap", c.level_gap},
                {"rel_nehari", c.rel_nehari()},
                {"rel_pohozaev", c.rel_pohozaev()},
                {"sup_norm", rec.profile.sup_norm()},
                {"mass", c.norms.mass},
                {"grad", c.norms.grad},
                {"qnorm", c.norms.qnorm},
                {"crit_norm", c.norms.crit},
                {"n_grid", rec.profile.r.size()},
                {"tail", json{{"A", rec.profile.tail.A},
                              {"kappa", rec.profile.tail.kappa},
                              {"r_start", rec.profile.tail.r_start},
                              {"valid", rec.profile.tail.valid}}}};
}

// cached single-branch solve; the ground record or nothing
inline std::optional<SolutionRecord> cached_ground(const Params& P, const ScanOptions& so,
                                                   const Cache& cache) {
    const std::string key = ground_key(P, so);
    if (auto hit = cache.lookup(key)) return hit;
    auto res = find_positive_solutions(P, so);
    for (auto& r : res.records)
        if (r.branch == Branch::ground_state) {
            cache.store(key, r);
            return std::move(r);
        }
    return std::nullopt;
}

inline int run_ground(const RunConfig& cfg, Envelope& env, Cache& cache, std::ostream& out) {
    const Params P = cfg.params();
    const ScanOptions so = cfg.scan_options();
    const auto rec = cached_ground(P, so, cache);
    if (!rec) {
        env.records()["found"] = false;
        out << "no certified ground state in the scanned height window\n";
        env.fail("no certified ground state in the scanned height window");
        return 3;
    }
    env.records()["found"] = true;
    env.records()["bubble_level"] = bubble_level(P.N);
    env.records()["ground_state"] = record_json(*rec);

    Csv csv(cfg.outdir + "/profile.csv", "r,u,du");
    const RadialProfile& pr = rec->profile;
    for (std::size_t i = 0; i < pr.r.size(); ++i)
        csv.row({fmt17(pr.r[i]), fmt17(pr.u[i]), fmt17(pr.du[i])});

    out << "ground state at t = " << fmt17(P.t) << ": d = " << fmt17(rec->d) << " +- "
        << fmt17(rec->d_error) << "\n";
    out << "energy = " << fmt17(rec->cert.energy) << " (gap to the bubble level "
        << fmt17(rec->cert.level_gap) << ")\n";
    out << "residuals: nehari " << fmt17(rec->cert.rel_nehari()) << ", pohozaev "
        << fmt17(rec->cert.rel_pohozaev()) << "\n";
    out << "wrote " << csv.path().string() << " (" << pr.r.size() << " rows)\n";
    return 0;
}

inline int run_scan(const RunConfig& cfg, Envelope& env, Cache&, std::ostream& out) {
    const Params P = cfg.params();
    const auto res = find_positive_solutions(P, cfg.scan_options());
    for (const auto& f : res.failures) env.warn(f);

    env.records()["bubble_level"] = bubble_level(P.N);
    env.records()["n_heights"] = res.d_grid.size();
    env.records()["n_solutions"] = res.records.size();
    json sols = json::array();
    for (const auto& rec : res.records) sols.push_back(record_json(rec));
    env.records()["solutions"] = sols;

    Csv csv(cfg.outdir + "/solutions.csv",
            "branch,d,d_error,energy,sup_norm,mass,grad,qnorm,crit_norm,"
            "rel_nehari,rel_pohozaev");
    for (const auto& rec : res.records)
        csv.row({to_string(rec.branch), fmt17(rec.d), fmt17(rec.d_error),
                 fmt17(rec.cert.energy), fmt17(rec.profile.sup_norm()),
                 fmt17(rec.cert.norms.mass), fmt17(rec.cert.norms.grad),
                 fmt17(rec.cert.norms.qnorm), fmt17(rec.cert.norms.crit),
                 fmt17(rec.cert.rel_nehari()), fmt17(rec.cert.rel_pohozaev())});

    out << res.records.size() << " positive solutions at t = " << fmt17(P.t) << " over "
        << res.d_grid.size() << " heights\n";
    for (const auto& rec : res.records)
        out << "  " << to_string(rec.branch) << ": d = " << fmt17(rec.d)
            << ", energy = " << fmt17(rec.cert.energy)
            << ", sup = " << fmt17(rec.profile.sup_norm()) << "\n";
    out << "wrote " << csv.path().string() << "\n";
    return 0;
}

inline int run_sweep(const RunConfig& cfg, Envelope& env, Cache&, std::ostream& out) {
    const Params P = cfg.params();
    const auto grid = geom_grid(cfg.t_min, cfg.t_max, cfg.points);
    SweepResult sw = sweep(P, grid, cfg.scan_options(), cfg.workers);
    for (const auto& f : sw.failures) env.warn(f);
    for (const auto& v : sw.violations)
        env.warn(v.what + " at t=" + fmt17(v.t) + " by " + fmt17(v.amount));

    const double worst = derivative_identity_check(sw);
    env.records()["bubble_level"] = bubble_level(P.N);
    env.records()["t_star"] =
        json{{"lo", sw.t_star.lo}, {"hi", sw.t_star.hi}, {"found", sw.t_star.found()}};
    env.records()["derivative_worst_rel"] = worst;
    env.records()["n_violations"] = sw.violations.size();
    json samples = json::array();
    for (const auto& s : sw.samples)
        samples.push_back(json{{"t", s.t},
                               {"m", s.m},
                               {"below_bubble", s.below_bubble},
                               {"n_solutions", s.n_solutions},
                               {"vq_norm", s.vq},
                               {"sup_norm_1", s.sup1},
                               {"sup_norm_2", s.sup2},
                               {"energy_2", s.energy2},
                               {"d_ground", s.d_ground}});
    env.records()["samples"] = samples;

    Csv csv(cfg.outdir + "/m_of_t.csv", "t,m,vq_norm,n_solutions,sup_norm_1,sup_norm_2");
    for (const auto& s : sw.samples)
        csv.row({fmt17(s.t), fmt17(s.m), fmt17(s.vq), std::to_string(s.n_solutions),
                 fmt17(s.sup1), fmt17(s.sup2)});

    if (sw.samples.empty()) {
        env.fail("sweep produced no samples");
        out << "sweep produced no samples\n";
        return 3;
    }
    out << sw.samples.size() << " of " << grid.size() << " sweep points converged\n";
    if (sw.t_star.found())
        out << "onset bracket: " << fmt17(sw.t_star.lo) << " < t* < " << fmt17(sw.t_star.hi)
            << "\n";
    else
        out << "onset not bracketed: no sub-bubble sample above t = " << fmt17(sw.t_star.lo)
            << "\n";
    out << "worst relative m'(t) identity violation: " << fmt17(worst) << "\n";
    if (!sw.violations.empty())
        out << sw.violations.size() << " invariant violations (see envelope warnings)\n";
    out << "wrote " << csv.path().string() << "\n";
    return 0;
}

inline int run_reduce(const RunConfig& cfg, Envelope& env, Cache& cache, std::ostream& out) {
    Params base = cfg.params();
    base.lambda = 1.0;
    const double lo = cfg.points > 0 ? cfg.t_min : 1.0;
    const double hi = cfg.points > 0 ? cfg.t_max : 1e4;
    const int n = cfg.points > 0 ? cfg.points : 25;
    const ScanOptions so = cfg.scan_options();
    const GroundProvider provider = [&](const Params& Pt) {
        return cached_ground(Pt, so, cache);
    };

    // sample the curve with the worker pool, assemble in grid order
    const auto ts = geom_grid(lo, hi, n);
    const auto got = par::map<std::optional<SolutionRecord>>(
        ts.size(), cfg.workers, [&](std::size_t i) {
            Params Pt = base;
            Pt.t = ts[i];
            return provider(Pt);
        });
    ReductionCurve curve;
    curve.base = base;
    curve.a = cfg.a;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (got[i])
            curve.points.push_back(make_reduction_point(*got[i], cfg.a));
        else
            curve.t_failed.push_back(ts[i]);
    }

    env.records()["a"] = cfg.a;
    env.records()["t_grid"] = json{{"lo", lo}, {"hi", hi}, {"n", n}};
    json pts = json::array();
    for (const auto& pt : curve.points)
        pts.push_back(json{{"t", pt.t},
                           {"mu", pt.mu},
                           {"lambda", pt.lambda},
                           {"vq_norm", pt.vq},
                           {"residual", pt.F},
                           {"energy", pt.energy},
                           {"d", pt.d}});
    env.records()["points"] = pts;
    env.records()["t_failed"] = curve.t_failed;

    Csv csv(cfg.outdir + "/mu_of_t.csv", "t,mu,lambda,vq_norm,energy,d");
    for (const auto& pt : curve.points)
        csv.row({fmt17(pt.t), fmt17(pt.mu), fmt17(pt.lambda), fmt17(pt.vq),
                 fmt17(pt.energy), fmt17(pt.d)});
    out << "wrote " << csv.path().string() << " (" << curve.points.size() << " of " << n
        << " points)\n";

    if (curve.points.empty()) {
        env.fail("no certified solutions anywhere in the sampled window");
        out << "no certified solutions anywhere in the sampled window\n";
        return 3;
    }

    const CurveSupremum sup = mu_supremum(curve, provider);
    env.records()["sup"] = json{{"mu", sup.mu}, {"t", sup.t}, {"err", sup.err}};
    out << "sup mu_t = " << fmt17(sup.mu) << " at t = " << fmt17(sup.t) << " (err "
        << fmt17(sup.err) << ")\n";

    if (!(cfg.mu > 0.0)) return 0;
    env.records()["mu"] = cfg.mu;
    const auto sols = solve_normalized(curve, cfg.mu, provider);
    if (sols.empty()) {
        if (cfg.mu > sup.mu) {
            env.records()["nonexistence"] = true;
            out << "no normalized solution at mu = " << fmt17(cfg.mu)
                << " (mu > sup mu_t = " << fmt17(sup.mu) << ")\n";
            return 0;
        }
        env.fail("no bracket for mu = " + fmt17(cfg.mu) +
                 " inside the sampled window; widen t-min/t-max or add points");
        out << "no bracket for mu = " << fmt17(cfg.mu) << " inside the sampled window\n";
        return 3;
    }
    env.records()["nonexistence"] = false;
    json js = json::array();
    for (const auto& s : sols)
        js.push_back(json{{"mu", s.mu},
                          {"t", s.t},
                          {"lambda", s.lambda},
                          {"mass", s.u.quad.mass},
                          {"action", s.action},
                          {"energy", s.cert.energy},
                          {"mass_res", s.mass_res},
                          {"rel_nehari", s.cert.rel_nehari()},
                          {"rel_pohozaev", s.cert.rel_pohozaev()},
                          {"sup_norm", s.u.sup_norm()}});
    env.records()["solutions"] = js;

    Csv ncsv(cfg.outdir + "/normalized.csv",
             "mu,t,lambda,mass,action,energy,mass_res,rel_nehari,rel_pohozaev");
    for (const auto& s : sols)
        ncsv.row({fmt17(s.mu), fmt17(s.t), fmt17(s.lambda), fmt17(s.u.quad.mass),
                  fmt17(s.action), fmt17(s.cert.energy), fmt17(s.mass_res),
                  fmt17(s.cert.rel_nehari()), fmt17(s.cert.rel_pohozaev())});

    out << sols.size() << " normalized solutions at mu = " << fmt17(cfg.mu)
        << ", a = " << fmt17(cfg.a) << "\n";
    for (const auto& s : sols)
        out << "  lambda = " << fmt17(s.lambda) << ", action = " << fmt17(s.action)
            << ", mass residual = " << fmt17(s.mass_res) << "\n";
    out << "wrote " << ncsv.path().string() << "\n";
    return 0;
}

inline json confine_point_json(const confined::SweepPoint& pt) {
    return json{{"t", pt.t},
                {"r_t", pt.r_t},
                {"mass", pt.mass},
                {"grad", pt.grad},
                {"pnorm", pt.pnorm},
                {"pot_over_t2", pt.pot_t2},
                {"energy", pt.energy},
                {"pohozaev_defect", pt.defect},
                {"stationarity_res", pt.stat_res},
                {"d2_at_1", pt.d2_at_1},
                {"h1_vs_free", pt.h1_vs_free},
                {"residual", pt.residual},
                {"iters", pt.iters}};
}

inline std::vector<std::string> confine_point_row(const confined::SweepPoint& pt) {
    return {fmt17(pt.t),        fmt17(pt.r_t),      fmt17(pt.mass),
            fmt17(pt.grad),     fmt17(pt.pnorm),    fmt17(pt.pot_t2),
            fmt17(pt.energy),   fmt17(pt.defect),   fmt17(pt.stat_res),
            fmt17(pt.d2_at_1),  fmt17(pt.h1_vs_free), fmt17(pt.residual),
            std::to_string(pt.iters)};
}

inline confined::SweepPoint confine_point(const confined::State& st,
                                          const RadialProfile& free_prof) {
    confined::SweepPoint pt;
    pt.t = st.t;
    pt.mass = st.norms.mass;
    pt.grad = st.norms.grad;
    pt.pnorm = st.norms.pnorm;
    pt.pot_t2 = st.norms.pot / (st.t * st.t);
    pt.energy = st.energy;
    pt.defect = st.pohozaev_defect();
    pt.residual = st.residual;
    pt.iters = st.iters;
    pt.h1_vs_free =
        confined::h1_rel_diff(st.mesh, st.w, confined::profile_seed(st.mesh, free_prof));
    if (st.bracket() > 0.0 && st.p > 10.0 / 3.0) {
        const confined::Normalized nr = confined::normalize(st);
        pt.r_t = nr.r;
        pt.stat_res = confined::stationarity_residual(nr.norms, st.p);
        pt.d2_at_1 = confined::fibering_tau(nr.norms, st.p, 1.0).d2;
    }
    return pt;
}

inline int run_confine(const RunConfig& cfg, Envelope& env, Cache& cache, std::ostream& out) {
    confined::SolveOptions so = cfg.confine_options();

    // the free-limit soliton is shared by every t (and is cacheable)
    Params Pf;
    Pf.N = 3;
    Pf.q = cfg.p;
    Pf.t = 1.0;
    Pf.lambda = 1.0;
    Pf.crit = false;
    const ScanOptions so_free;
    auto free_rec = cached_ground(Pf, so_free, cache);
    if (!free_rec) throw SolverError("confine: no certified free soliton for p = " + fmt17(cfg.p));
    so.free_profile = &free_rec->profile;

    env.records()["p"] = cfg.p;
    env.records()["free_soliton"] = record_json(*free_rec);
    env.records()["mesh"] = json{{"S", so.mesh.S}, {"Z", so.mesh.Z},
                                 {"ns", so.mesh.ns}, {"nz", so.mesh.nz}};

    const std::string header =
        "t,r_t,mass,grad,pnorm,pot_over_t2,energy,pohozaev_defect,"
        "stationarity_res,d2_at_1,h1_vs_free,residual,iters";

    if (cfg.points >= 2) {
        const auto ts = geom_grid(cfg.t_min, cfg.t_max, cfg.points);
        const confined::Sweep sw = confined::sweep(cfg.p, ts, so);
        for (const auto& f : sw.failures) env.warn(f);
        json pts = json::array();
        for (const auto& pt : sw.points) pts.push_back(confine_point_json(pt));
        env.records()["points"] = pts;

        Csv csv(cfg.outdir + "/confine.csv", header);
        for (const auto& pt : sw.points) csv.row(confine_point_row(pt));
        Csv lcsv(cfg.outdir + "/lambda_of_r.csv", "r,lambda");
        for (auto it = sw.points.rbegin(); it != sw.points.rend(); ++it)
            if (it->r_t > 0.0) lcsv.row({fmt17(it->r_t), fmt17(it->t)});

        if (cfg.cold_check) {
            // rebuild the warm chain and compare a cold solve at every t
            json arr = json::array();
            std::optional<confined::State> prev;
            double worst = 0.0;
            for (auto it = ts.rbegin(); it != ts.rend(); ++it) {
                const confined::State warm =
                    confined::solve(cfg.p, *it, so, prev ? &*prev : nullptr);
                const confined::State cold = confined::solve(cfg.p, *it, so);
                double dmax = 0.0, peak = 0.0;
                for (std::size_t k = 0; k < warm.w.size(); ++k) {
                    dmax = std::max(dmax, std::abs(warm.w[k] - cold.w[k]));
                    peak = std::max(peak, cold.w[k]);
                }
                const double rel = dmax / peak;
                arr.push_back(json{{"t", *it}, {"sup_rel_diff", rel}});
                worst = std::max(worst, rel);
                prev = warm;
            }
            std::reverse(arr.begin(), arr.end());
            env.records()["cold_check"] = arr;
            env.records()["cold_check_worst"] = worst;
            out << "warm/cold sup-norm agreement: worst relative difference " << fmt17(worst)
                << "\n";
        }

        if (sw.points.empty()) {
            env.fail("confined sweep produced no points");
            out << "confined sweep produced no points\n";
            return 3;
        }
        out << sw.points.size() << " of " << ts.size() << " confined solves converged\n";
        out << "energy " << fmt17(sw.points.front().energy) << " at t = "
            << fmt17(sw.points.front().t) << " up to " << fmt17(sw.points.back().energy)
            << " at t = " << fmt17(sw.points.back().t) << "\n";
        out << "h1 gap to the free soliton at t = " << fmt17(sw.points.back().t) << ": "
            << fmt17(sw.points.back().h1_vs_free) << "\n";
        out << "wrote " << csv.path().string() << " and " << lcsv.path().string() << "\n";
        return 0;
    }

    const confined::State st = confined::solve(cfg.p, cfg.t, so);
    const confined::SweepPoint pt = confine_point(st, free_rec->profile);
    env.records()["point"] = confine_point_json(pt);
    Csv csv(cfg.outdir + "/confine.csv", header);
    csv.row(confine_point_row(pt));
    out << "confined ground state at t = " << fmt17(st.t) << ": energy = "
        << fmt17(st.energy) << ", residual = " << fmt17(st.residual) << " in " << st.iters
        << " iterations\n";
    if (pt.r_t > 0.0)
        out << "normalized pair: r = " << fmt17(pt.r_t) << ", lambda = " << fmt17(st.t)
            << ", T''(1) = " << fmt17(pt.d2_at_1) << "\n";
    out << "wrote " << csv.path().string() << "\n";
    return 0;
}

inline int run_verify(const RunConfig& cfg, Envelope& env, Cache&, std::ostream& out) {
    struct Check {
        std::string name;
        double value = 0.0, limit = 0.0;
    };
    std::vector<Check> checks;

    // Sobolev constant from quadrature against the closed Gamma formula
    for (int N : {3, 4}) {
        const double s = sobolev_constant(N), ref = sobolev_constant_reference(N);
        checks.push_back({"sobolev constant N=" + std::to_string(N),
                          std::abs(s - ref) / ref, 1e-6});
    }

    // bubble certificate and level
    {
        const RadialProfile b = bubble_profile(3, 1.0);
        const Certificate c = energy(b);
        checks.push_back({"bubble residuals N=3",
                          std::max(c.rel_nehari(), c.rel_pohozaev()), 1e-8});
        checks.push_back({"bubble level N=3", std::abs(c.level_gap) / bubble_level(3), 1e-8});
    }

    // free soliton: certificate plus the scaling identity grad = gamma_q qnorm
    {
        Params P;
        P.N = 3;
        P.q = 4.0;
        P.t = 1.0;
        P.lambda = 1.0;
        P.crit = false;
        const auto res = find_positive_solutions(P);
        double resid = 1.0, scale = 1.0;
        for (const auto& rec : res.records)
            if (rec.branch == Branch::ground_state) {
                resid = std::max(rec.cert.rel_nehari(), rec.cert.rel_pohozaev());
                scale = std::abs(rec.profile.quad.grad -
                                 P.gamma_q() * rec.profile.quad.qnorm) /
                        rec.profile.quad.grad;
            }
        checks.push_back({"soliton residuals q=4", resid, 1e-8});
        checks.push_back({"soliton scaling identity q=4", scale, 1e-8});
    }

    // critical ground state below the bubble level
    {
        Params P;
        P.N = 3;
        P.q = 3.0;
        P.t = 1e3;
        const auto res = find_positive_solutions(P);
        double resid = 1.0, gap = 1.0;
        const SolutionRecord* ground = nullptr;
        for (const auto& rec : res.records)
            if (rec.branch == Branch::ground_state) ground = &rec;
        if (ground) {
            resid = std::max(ground->cert.rel_nehari(), ground->cert.rel_pohozaev());
            gap = ground->cert.level_gap / bubble_level(3);
        }
        checks.push_back({"critical ground state residuals q=3 t=1e3", resid, 1e-5});
        checks.push_back({"ground level below the bubble", gap, 0.0});

        // reduction round trip through the normalized frame and back
        if (ground) {
            const double a = 1.0;
            const double mu =
                mu_of_t(P.t, ground->profile.quad.qnorm, a, ground->profile.params);
            const RadialProfile u = from_unit_frequency(ground->profile, mu);
            const RadialProfile v2 = to_unit_frequency(u);
            const auto& q0 = ground->profile.quad;
            const auto& q2 = v2.quad;
            const double round = std::max(
                {std::abs(q2.mass - q0.mass) / q0.mass, std::abs(q2.grad - q0.grad) / q0.grad,
                 std::abs(q2.qnorm - q0.qnorm) / q0.qnorm,
                 std::abs(q2.crit - q0.crit) / q0.crit});
            checks.push_back({"reduction round trip", round, 1e-12});
            checks.push_back(
                {"normalized mass identity", std::abs(u.quad.mass - a * a) / (a * a), 1e-5});
        } else {
            checks.push_back({"reduction round trip", 1.0, 1e-12});
            checks.push_back({"normalized mass identity", 1.0, 1e-5});
        }
    }

    // confined operator inverts its stencil
    {
        confined::Mesh m;
        m.ns = 64;
        m.nz = 128;
        const confined::Operator M(m, 2.0);
        std::vector<double> rhs(m.size()), x, back;
        std::uint32_t state = 12345;
        for (double& v : rhs) {
            state = state * 1664525u + 1013904223u;
            v = state / 4294967296.0 - 0.5;
        }
        M.solve(rhs, x);
        M.apply(x, back);
        double worst = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < rhs.size(); ++i) {
            worst = std::max(worst, std::abs(back[i] - rhs[i]));
            scale = std::max(scale, std::abs(rhs[i]));
        }
        checks.push_back({"confined stencil inversion", worst / scale, 1e-12});
    }

    // confined ground state closes its discrete Nehari identity
    {
        confined::SolveOptions so;
        so.mesh.ns = 128;
        so.mesh.nz = 256;
        const confined::State st = confined::solve(4.0, 5.0, so);
        checks.push_back({"confined solve residual p=4 t=5", st.residual, 1e-9});
        checks.push_back({"confined Nehari closure",
                          std::abs(st.quad_form() - st.norms.pnorm) / st.norms.pnorm, 1e-12});
    }

    int failed = 0;
    json arr = json::array();
    for (const auto& c : checks) {
        const bool pass = c.value < c.limit;
        failed += !pass;
        arr.push_back(
            json{{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", pass}});
        out << (pass ? "PASS  " : "FAIL  ") << c.name << " (value " << fmt17(c.value)
            << ", limit " << fmt17(c.limit) << ")\n";
    }
    env.records()["checks"] = arr;
    env.records()["n_failed"] = failed;
    if (failed) {
        env.fail(std::to_string(failed) + " verification checks failed");
        out << failed << " of " << checks.size() << " checks failed\n";
        return 3;
    }
    out << "all " << checks.size() << " checks passed\n";
    return 0;
}

} // namespace detail

// Dispatch a validated config: write the JSON envelope and the per-command
// CSVs under outdir. Returns 0 on success, 2 on configuration errors (no
// envelope) and 3 on solver failures (envelope written with the partial data
// and the error recorded).
inline int run(const RunConfig& cfg, std::ostream& out = std::cout) {
    try {
        cfg.validate();
        std::filesystem::create_directories(cfg.outdir);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    Envelope env(cfg);
    Cache cache(cfg.cache_dir);
    const auto t0 = std::chrono::steady_clock::now();
    int code = 0;
    try {
        if (cfg.command == "ground-state")
            code = detail::run_ground(cfg, env, cache, out);
        else if (cfg.command == "scan")
            code = detail::run_scan(cfg, env, cache, out);
        else if (cfg.command == "sweep")
            code = detail::run_sweep(cfg, env, cache, out);
        else if (cfg.command == "reduce")
            code = detail::run_reduce(cfg, env, cache, out);
        else if (cfg.command == "confine")
            code = detail::run_confine(cfg, env, cache, out);
        else
            code = detail::run_verify(cfg, env, cache, out);
    } catch (const std::exception& e) {
        env.fail(e.what());
        out << "error: " << e.what() << "\n";
        code = 3;
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    const auto path = env.write(cfg.outdir, ms, cache);
    out << "envelope: " << path.string() << "\n";
    return code;
}

} // namespace nls::io
