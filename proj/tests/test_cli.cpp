#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "corpus.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;  // stdout and stderr
};

Run cli(const std::string& args) {
    const std::string cmd = std::string("'") + NS_CLI + "' " + args + " 2>&1";
    Run r;
    FILE* p = ::popen(cmd.c_str(), "r");
    REQUIRE(p);
    char buf[4096];
    for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, p)) > 0;) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const fs::path& tmp() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("ns_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

double field(const std::string& line, const std::string& key) {
    const auto at = line.find(key + "=");
    REQUIRE(at != std::string::npos);
    return std::stod(line.substr(at + key.size() + 1));
}

}  // namespace

TEST_CASE("sim writes tstop/dt + 1 rows") {
    const fs::path out = tmp() / "rc.csv";
    const Run r = cli("sim " + q(test_data::root() / "corpus" / "rc_lowpass.cir") + " --tstop 10u --dt 10n --out " + q(out));
    REQUIRE(r.code == 0);
    std::ifstream is(out);
    std::string header, line;
    std::getline(is, header);
    CHECK(header.rfind("time,", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 1001);
    CHECK(fs::exists(out.string() + ".manifest.json"));
}

TEST_CASE("sim error codes") {
    CHECK(cli("sim " + q(tmp() / "missing.cir")).code == 3);
    CHECK(cli("sim " + q(test_data::root() / "invalid" / "bad_value.cir")).code == 1);
    const Run nc = cli("sim " + q(test_data::root() / "nonconvergent.cir") + " --out " + q(tmp() / "nc.csv"));
    CHECK(nc.code == 2);
    CHECK(nc.out.find("t=1.0") != std::string::npos);
    CHECK(cli("sim " + q(test_data::root() / "corpus" / "rc_lowpass.cir") + " --out /nonexistent/dir/x.csv").code == 3);
    CHECK(cli("frobnicate").code == 1);
}

TEST_CASE("neuron labels") {
    const Run fs_run = cli("neuron --preset fs --current 10 --duration 1000 --out " + q(tmp() / "fs.csv") + " --spikes-out " +
                           q(tmp() / "fs.json"));
    REQUIRE(fs_run.code == 0);
    CHECK(fs_run.out.find("Tonic") != std::string::npos);
    std::ifstream js(tmp() / "fs.json");
    const std::string spikes{std::istreambuf_iterator<char>(js), {}};
    CHECK(spikes.find("\"spike_times_s\": []") == std::string::npos);

    const Run ib = cli("neuron --preset ib --current 10 --out " + q(tmp() / "ib.csv") + " --spikes-out " + q(tmp() / "ib.json"));
    CHECK(ib.out.find("InitialBurstThenTonic") != std::string::npos);
    const Run quiet = cli("neuron --preset rs --current 0 --out " + q(tmp() / "rs.csv") + " --spikes-out " + q(tmp() / "rs.json"));
    CHECK(quiet.out.find("Silent") != std::string::npos);
    CHECK(cli("neuron --preset tonic --out " + q(tmp() / "x.csv") + " --spikes-out " + q(tmp() / "x.json")).code == 1);
}

TEST_CASE("ampdemo") {
    const Run r = cli("ampdemo --outdir " + q(tmp() / "amp"));
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "savings") >= 0.95);
    for (const char* f : {"waveforms.csv", "power.json", "spikes.json", "amplifier.cir", "scenario.json", "manifest.json"}) {
        CHECK(fs::exists(tmp() / "amp" / f));
    }
    const Run zero = cli("ampdemo --vin-mv 0 --outdir " + q(tmp() / "amp0"));
    REQUIRE(zero.code == 0);
    CHECK(field(zero.out, "peak_on_v") < 0.1);
    CHECK(cli("ampdemo --outdir /proc/forbidden").code == 3);
}

TEST_CASE("power") {
    const Run r = cli("power --nswitch 0 --duty 0.01 --json " + q(tmp() / "p.json"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("0.990000") != std::string::npos);
    CHECK(fs::exists(tmp() / "p.json.manifest.json"));
    CHECK(cli("power --duty 0").out.find("1.000000") != std::string::npos);
    const Run bad = cli("power --tox 0");
    CHECK(bad.code == 1);
    CHECK(bad.out.find("tox") != std::string::npos);
    CHECK(cli("power --ibias -1").code == 1);
}

TEST_CASE("identical flags give identical outputs") {
    const std::string net = q(test_data::root() / "corpus" / "rc_lowpass.cir");
    REQUIRE(cli("sim " + net + " --out " + q(tmp() / "a.csv")).code == 0);
    REQUIRE(cli("sim " + net + " --out " + q(tmp() / "b.csv")).code == 0);
    CHECK(test_data::read(tmp() / "a.csv") == test_data::read(tmp() / "b.csv"));

    REQUIRE(cli("powerexp --nswitch 0 --duty 0.01,0.5 --jobs 2 --out " + q(tmp() / "e1.csv")).code == 0);
    REQUIRE(cli("powerexp --nswitch 0 --duty 0.01,0.5 --jobs 1 --out " + q(tmp() / "e2.csv")).code == 0);
    CHECK(test_data::read(tmp() / "e1.csv") == test_data::read(tmp() / "e2.csv"));

    REQUIRE(cli("ampdemo --outdir " + q(tmp() / "r1")).code == 0);
    REQUIRE(cli("ampdemo --outdir " + q(tmp() / "r2")).code == 0);
    for (const char* f : {"waveforms.csv", "power.json", "spikes.json", "scenario.json"}) {
        CHECK(test_data::read(tmp() / "r1" / f) == test_data::read(tmp() / "r2" / f));
    }
}

TEST_CASE("config file, flags take precedence") {
    const fs::path cfg = tmp() / "power.ini";
    std::ofstream(cfg) << "[power]\nnswitch=0\nduty=0.5\n";
    CHECK(cli("--config " + q(cfg) + " power").out.find("0.500000") != std::string::npos);
    const Run over = cli("--config " + q(cfg) + " power --duty 0.01");
    CHECK(over.out.find("0.990000") != std::string::npos);
    CHECK(over.out.find("0.500000") == std::string::npos);
}
