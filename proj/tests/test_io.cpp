#include <catch2/catch_amalgamated.hpp>

#include <nls/io.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace nls;
namespace fs = std::filesystem;

namespace {

// fresh scratch directory per test case, removed on destruction
struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() /
               ("nls_io_" + std::to_string((std::uint64_t(rd()) << 32) ^ rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

SolutionRecord sample_record() {
    SolutionRecord rec;
    rec.profile.params.N = 3;
    rec.profile.params.q = 3.25;
    rec.profile.params.t = 47.0;
    rec.profile.params.lambda = 2.0;
    rec.profile.params.crit = true;
    rec.d = 1.0 / 3.0;
    rec.d_error = 1e-11;
    rec.branch = Branch::blow_up_branch;
    rec.profile.d = rec.d;
    rec.profile.r = {0.25, 0.5, 1.0, 2.0};
    rec.profile.u = {0.3, 0.2, 0.1, 0.05};
    rec.profile.du = {-0.4, -0.2, -0.1, -0.025};
    rec.profile.tail = {0.7, 1.4142135623730951, 2.0, 3e-4, true};
    rec.profile.quad = {0.1, 0.2, 0.3, 0.4, true};
    rec.cert.energy = 4.273;
    rec.cert.nehari_res = 1e-9;
    rec.cert.pohozaev_res = -2e-9;
    rec.cert.level_gap = -1e-3;
    rec.cert.norms = {0.1, 0.2, 0.3, 0.4, true};
    return rec;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NLS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("wire format round-trips doubles exactly", "[io]") {
    for (double x : {1.0 / 3.0, 6.02e23, 1e-300, -0.1, 3.0669247818e6, 0.0})
        CHECK(std::stod(io::fmt17(x)) == x);
}

TEST_CASE("flat config files load and reject garbage", "[io]") {
    TempDir td;
    const auto file = td.path / "run.cfg";
    {
        std::ofstream f(file);
        f << "# scan setup\n"
          << "command = scan\n"
          << "q=2.5\n"
          << "t = 1000   # large coupling\n"
          << "crit = true\n"
          << "n-scan = 200\n"
          << "outdir = " << td.sub("out") << "\n";
    }
    const io::RunConfig cfg = io::load_config(file);
    CHECK(cfg.command == "scan");
    CHECK(cfg.q == 2.5);
    CHECK(cfg.t == 1000.0);
    CHECK(cfg.n_scan == 200);
    CHECK_NOTHROW(cfg.validate());

    // the echo holds every knob under its flag name
    const auto kv = io::flat_echo(cfg);
    CHECK(kv.at("q") == "2.5");
    CHECK(kv.at("n-scan") == "200");

    io::RunConfig c2;
    CHECK_THROWS_AS(io::apply_kv(c2, "qq", "3"), io::ConfigError);
    CHECK_THROWS_AS(io::apply_kv(c2, "q", "3.5x"), io::ConfigError);
    CHECK_THROWS_AS(io::apply_kv(c2, "points", ""), io::ConfigError);
    CHECK_THROWS_AS(io::apply_kv(c2, "crit", "maybe"), io::ConfigError);

    {
        std::ofstream f(file);
        f << "command scan\n";
    }
    CHECK_THROWS_AS(io::load_config(file), io::ConfigError);
    CHECK_THROWS_AS(io::load_config(td.path / "absent.cfg"), io::ConfigError);
}

TEST_CASE("config validation catches bad requests before solving", "[io]") {
    io::RunConfig cfg;
    cfg.command = "orbit";
    CHECK_THROWS_AS(cfg.validate(), io::ConfigError);

    cfg.command = "scan";
    cfg.n_scan = 4;
    CHECK_THROWS_AS(cfg.validate(), io::ConfigError);

    cfg = {};
    cfg.command = "sweep";
    CHECK_THROWS_AS(cfg.validate(), io::ConfigError); // no coupling window

    cfg = {};
    cfg.command = "confine";
    cfg.p = 6.5;
    CHECK_THROWS_AS(cfg.validate(), io::ConfigError);

    cfg = {};
    cfg.command = "scan";
    cfg.q = 7.0; // supercritical for N = 3
    CHECK_THROWS_AS(cfg.validate(), io::ConfigError);

    // a config error exits 2 and leaves no envelope behind
    TempDir td;
    cfg = {};
    cfg.command = "scan";
    cfg.n_scan = 4;
    cfg.outdir = td.sub("out");
    std::ostringstream sink;
    CHECK(io::run(cfg, sink) == 2);
    CHECK_FALSE(fs::exists(fs::path(cfg.outdir) / "envelope.json"));
}

TEST_CASE("cache round-trips records bit for bit", "[io]") {
    TempDir td;
    io::Cache cache(td.sub("cache"));
    const SolutionRecord rec = sample_record();
    const std::string key = "unit-test-key";
    cache.store(key, rec);

    const auto got = cache.lookup(key);
    REQUIRE(got.has_value());
    CHECK(got->d == rec.d);
    CHECK(got->d_error == rec.d_error);
    CHECK(got->branch == rec.branch);
    CHECK(got->profile.params.q == rec.profile.params.q);
    CHECK(got->profile.params.t == rec.profile.params.t);
    CHECK(got->profile.r == rec.profile.r);
    CHECK(got->profile.u == rec.profile.u);
    CHECK(got->profile.du == rec.profile.du);
    CHECK(got->profile.tail.A == rec.profile.tail.A);
    CHECK(got->profile.tail.kappa == rec.profile.tail.kappa);
    CHECK(got->profile.quad.mass == rec.profile.quad.mass);
    CHECK(got->cert.energy == rec.cert.energy);
    CHECK(got->cert.nehari_res == rec.cert.nehari_res);
    CHECK(got->cert.norms.crit == rec.cert.norms.crit);

    CHECK_FALSE(cache.lookup("some-other-key").has_value());

    // a corrupt entry is ignored, not trusted
    const auto entry = fs::path(td.sub("cache")) / (io::hex64(io::fnv1a64(key)) + ".rec");
    REQUIRE(fs::exists(entry));
    { std::ofstream f(entry, std::ios::binary); f << "XXXX not a record"; }
    CHECK_FALSE(cache.lookup(key).has_value());

    // so is one written under a different schema version
    {
        std::ofstream f(entry, std::ios::binary);
        f.write("NLSC", 4);
        const std::uint32_t bad = io::schema_version + 7;
        f.write(reinterpret_cast<const char*>(&bad), sizeof bad);
    }
    CHECK_FALSE(cache.lookup(key).has_value());

    // truncation counts as corruption
    cache.store(key, rec);
    fs::resize_file(entry, fs::file_size(entry) / 2);
    CHECK_FALSE(cache.lookup(key).has_value());
}

TEST_CASE("identical runs emit identical payloads", "[io]") {
    TempDir td;
    io::RunConfig cfg;
    cfg.command = "scan";
    cfg.q = 3.0;
    cfg.t = 30.0;
    cfg.outdir = td.sub("out");
    cfg.cache_dir = td.sub("cache");

    std::ostringstream s1;
    REQUIRE(io::run(cfg, s1) == 0);
    const std::string csv1 = slurp(fs::path(cfg.outdir) / "solutions.csv");
    auto env1 = io::json::parse(slurp(fs::path(cfg.outdir) / "envelope.json"));

    std::ostringstream s2;
    REQUIRE(io::run(cfg, s2) == 0);
    const std::string csv2 = slurp(fs::path(cfg.outdir) / "solutions.csv");
    auto env2 = io::json::parse(slurp(fs::path(cfg.outdir) / "envelope.json"));

    CHECK(csv1 == csv2);
    CHECK(s1.str() == s2.str());
    env1.erase("stats"); // wall time and cache counters may differ
    env2.erase("stats");
    CHECK(env1.dump() == env2.dump());
    CHECK(env1["records"]["n_solutions"].get<int>() >= 2);

    // the input hash tracks the config
    io::RunConfig other = cfg;
    other.q = 3.1;
    CHECK(io::Envelope(cfg).j["input_hash"] != io::Envelope(other).j["input_hash"]);
}

TEST_CASE("a cache hit reproduces the cold payload", "[io]") {
    TempDir td;
    io::RunConfig cfg;
    cfg.command = "ground-state";
    cfg.q = 3.0;
    cfg.t = 30.0;
    cfg.outdir = td.sub("out");
    cfg.cache_dir = td.sub("cache");

    std::ostringstream s1;
    REQUIRE(io::run(cfg, s1) == 0);
    auto env1 = io::json::parse(slurp(fs::path(cfg.outdir) / "envelope.json"));
    const std::string prof1 = slurp(fs::path(cfg.outdir) / "profile.csv");

    std::ostringstream s2;
    REQUIRE(io::run(cfg, s2) == 0);
    auto env2 = io::json::parse(slurp(fs::path(cfg.outdir) / "envelope.json"));
    const std::string prof2 = slurp(fs::path(cfg.outdir) / "profile.csv");

    CHECK(env2["stats"]["cache_hits"].get<int>() == 1);
    CHECK(env1["records"].dump() == env2["records"].dump());
    CHECK(prof1 == prof2);
}

TEST_CASE("solver failures exit 3 and leave a diagnosable envelope", "[io]") {
    TempDir td;
    io::RunConfig cfg;
    cfg.command = "ground-state";
    cfg.q = 3.0;
    cfg.t = 1e-3; // below the onset: no radial ground state survives the certificate
    cfg.outdir = td.sub("out");
    cfg.cache_dir = td.sub("cache");
    std::ostringstream sink;
    CHECK(io::run(cfg, sink) == 3);
    auto env = io::json::parse(slurp(fs::path(cfg.outdir) / "envelope.json"));
    CHECK(env["status"] == "solver_error");
    CHECK_FALSE(env["errors"].empty());
    CHECK(env["records"]["found"] == false);
}

TEST_CASE("the command line honors the exit code contract", "[io][cli]") {
    TempDir td;
    const std::string common = " --cache-dir " + td.sub("cache");

    CHECK(run_cli("scan --q 3 --t 30 --outdir " + td.sub("ok") + common) == 0);
    CHECK(slurp(fs::path(td.sub("ok")) / "solutions.csv")
              .starts_with("branch,d,d_error,energy,sup_norm"));

    CHECK(run_cli("scan --q 3 --t 30 --n-scan 4 --outdir " + td.sub("bad") + common) == 2);
    CHECK(run_cli("ground-state --q 3 --t 1e-3 --outdir " + td.sub("none") + common) == 3);
    CHECK(run_cli("") == 2);                    // no command
    CHECK(run_cli("scan --frobnicate") != 0);   // parse error

    // config file loads, flags override it
    const auto cfgfile = td.path / "run.cfg";
    {
        std::ofstream f(cfgfile);
        f << "command=scan\nq=3\nt=30\nn-scan=4\noutdir=" << td.sub("cfg")
          << "\ncache-dir=" << td.sub("cache") << "\n";
    }
    CHECK(run_cli("--config " + cfgfile.string()) == 2);
    CHECK(run_cli("scan --config " + cfgfile.string() + " --n-scan 160") == 0);
}
