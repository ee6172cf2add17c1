#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "neuroswitch/engine.hpp"
#include "neuroswitch/scenarios.hpp"
#include "oracles.hpp"

using namespace neuroswitch;

namespace {

constexpr double kR = 1e3, kC = 1e-9, kTau = kR * kC;

const char* kRcStep = "V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n ic=0\n.end";

Waveforms rc_run(Method m, double dt, double tstop) {
    SimOptions o;
    o.method = m;
    o.dt = dt;
    o.tstop = tstop;
    return transient(parse_netlist(kRcStep), o);
}

double max_rc_error(Method m, double dt) {
    const Waveforms w = rc_run(m, dt, 5 * kTau);
    const auto v = w.node_column("out");
    double err = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) err = std::max(err, std::abs(v[r] - oracle::rc_step(w.times[r], kR, kC, 1.0)));
    return err;
}

std::size_t row_at(const Waveforms& w, double t) {
    std::size_t best = 0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        if (std::abs(w.times[r] - t) < std::abs(w.times[best] - t)) best = r;
    }
    return best;
}

}  // namespace

TEST_CASE("divider operating point") {
    const auto op = dc_operating_point(parse_netlist("V1 a 0 DC 3\nR1 a b 1k\nR2 b 0 2k\n.end"), SimOptions{});
    CHECK(op.node_voltages[2] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(op.source_currents.at("V1") == doctest::Approx(-1e-3).epsilon(1e-9));
    CHECK(op.kcl_margin <= 1.0);
}

TEST_CASE("diode-connected NMOS settles at the quadratic root") {
    const auto n = parse_netlist(".model nm NMOS vt=0.5 kp=100u\nVDD vdd 0 DC 3.3\nR1 vdd d 10k\nM1 d d 0 0 nm W=1u L=1u\n.end");
    const auto op = dc_operating_point(n, SimOptions{});
    const double expect = oracle::diode_nmos(3.3, 1e4, 100e-6, 0.5);
    CHECK(expect == doctest::Approx(2.06905).epsilon(1e-5));
    CHECK(op.node_voltages[static_cast<std::size_t>(*n.find_node("d"))] == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("voltage-source loop is singular") {
    CHECK_THROWS_AS(dc_operating_point(parse_netlist("V1 a 0 DC 1\nV2 a 0 DC 2\nR1 a 0 1k\n.end"), SimOptions{}),
                    SingularMatrix);
}

TEST_CASE("Newton iteration cap gives NonConvergence") {
    SimOptions o;
    o.max_nr_iters = 1;
    const auto n = parse_netlist(".model nm NMOS\nVDD vdd 0 DC 3.3\nR1 vdd d 10k\nM1 d d 0 0 nm W=1u L=1u\n.end");
    CHECK_THROWS_AS(dc_operating_point(n, o), NonConvergence);
}

TEST_CASE("transient failure names the time") {
    const auto n = parse_netlist(
        ".model nm NMOS\nVDD vdd 0 DC 1\nM1 vdd vdd 0 0 nm W=1u L=1u\nI1 0 x PULSE(0 1m 1u 1n 1n 1u)\n.end");
    SimOptions o;
    o.dt = 10e-9;
    o.tstop = 2e-6;
    try {
        transient(n, o);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.time() > 1e-6);
        CHECK(e.time() < 1.1e-6);
        CHECK(std::string(e.what()).find("t=") != std::string::npos);
    }
}

TEST_CASE("RC step at dt = RC/100 under trapezoidal") {
    const Waveforms w = rc_run(Method::Trapezoidal, kTau / 100, 2 * kTau);
    const double v = w.node_column("out")[row_at(w, kTau)];
    CHECK(std::abs(v - 0.6321) / 0.6321 < 0.01);
    CHECK(v == doctest::Approx(oracle::rc_step(kTau, kR, kC, 1.0)).epsilon(1e-3));
    for (double m : w.kcl_margin) CHECK(m <= 1.0);
}

TEST_CASE("discharge from ic decreases stored energy") {
    SimOptions o;
    o.dt = kTau / 50;
    o.tstop = 5 * kTau;
    const Waveforms w = transient(parse_netlist("R1 out 0 1k\nC1 out 0 1n ic=1\n.end"), o);
    const auto v = w.node_column("out");
    CHECK(v[0] == doctest::Approx(1.0));
    for (std::size_t r = 1; r < v.size(); ++r) CHECK(0.5 * kC * v[r] * v[r] < 0.5 * kC * v[r - 1] * v[r - 1]);
    CHECK(v.back() == doctest::Approx(std::exp(-5.0)).epsilon(0.01));
}

TEST_CASE("integration order under step halving") {
    const double trap = max_rc_error(Method::Trapezoidal, kTau / 50) / max_rc_error(Method::Trapezoidal, kTau / 100);
    const double be = max_rc_error(Method::BackwardEuler, kTau / 50) / max_rc_error(Method::BackwardEuler, kTau / 100);
    CAPTURE(trap);
    CAPTURE(be);
    CHECK(trap >= 3.0);
    CHECK(trap <= 5.0);
    CHECK(be >= 1.7);
    CHECK(be <= 2.3);
}

TEST_CASE("DC source into 1 ohm for 1 s") {
    SimOptions o;
    o.dt = 1e-3;
    o.tstop = 1.0;
    const Waveforms w = transient(parse_netlist("V1 a 0 DC 1\nR1 a 0 1\n.end"), o);
    const auto p = measure_branch_power(w, {"V1"});
    CHECK(p.per_source_energy.at("V1") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.total_avg_power == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("RC charge energy and balance") {
    const Waveforms w = rc_run(Method::Trapezoidal, kTau / 100, 10 * kTau);
    const double source = measure_branch_power(w, {"V1"}).per_source_energy.at("V1");
    CHECK(source == doctest::Approx(kC * 1.0 * 1.0).epsilon(0.01));

    const auto vin = w.node_column("in");
    const auto vout = w.node_column("out");
    double dissipated = 0.0;
    for (std::size_t r = 1; r < w.rows(); ++r) {
        const double p0 = (vin[r - 1] - vout[r - 1]) * (vin[r - 1] - vout[r - 1]) / kR;
        const double p1 = (vin[r] - vout[r]) * (vin[r] - vout[r]) / kR;
        dissipated += 0.5 * (p0 + p1) * (w.times[r] - w.times[r - 1]);
    }
    const double stored = 0.5 * kC * (vout.back() * vout.back() - vout.front() * vout.front());
    CHECK(std::abs(source - (dissipated + stored)) / source < 1e-3);
}

TEST_CASE("windowed power uses only samples inside the window") {
    SimOptions o;
    o.dt = 0.01;
    o.tstop = 2.0;
    const Waveforms w = transient(parse_netlist("V1 a 0 PWL(0 1 1 1 1.01 2)\nR1 a 0 1\n.end"), o);
    CHECK(measure_branch_power(w, {"V1"}, std::pair{0.0, 1.0}).total_avg_power == doctest::Approx(1.0));
    CHECK(measure_branch_power(w, {"V1"}, std::pair{1.2, 2.0}).total_avg_power == doctest::Approx(4.0));
    CHECK_THROWS_AS(measure_branch_power(w, {"V9"}), InvalidArgument);
}

TEST_CASE("first step and switch changes use backward Euler") {
    SimOptions o;
    o.dt = 1e-9;
    o.tstop = 400e-9;
    const Waveforms w = transient(
        parse_netlist("VC c 0 PULSE(0 3.3 100n 1n 1n 100n)\nV1 a 0 DC 1\nS1 a b c 0 ron=1 roff=1g vt=1.65\nR1 b o 1k\nC1 o 0 10p\n.end"),
        o);
    CHECK(w.step_method[1] == Method::BackwardEuler);
    CHECK(w.step_method[2] == Method::Trapezoidal);
    int forced = 0;
    for (std::size_t r = 2; r < w.rows(); ++r) forced += w.step_method[r] == Method::BackwardEuler;
    CHECK(forced == 2);  // one after closing, one after opening
    const std::size_t closed = row_at(w, 101e-9);
    CHECK(w.step_method[closed + 1] == Method::BackwardEuler);
}

TEST_CASE("switched amplifier held on stays at its operating point") {
    AmpSpec spec;
    const AmpDesign d = design_amplifier(spec);
    const Netlist n = build_switched_amp(spec, d, GateSpec{}, DcWave{2e-3});
    const auto op = dc_operating_point(n, SimOptions{});
    SimOptions o;
    o.dt = 1e-9;
    o.tstop = 100e-9;
    const Waveforms w = transient(n, o);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        for (std::size_t i = 1; i < w.node_names.size(); ++i) {
            CHECK(std::abs(w.voltage(r, i) - op.node_voltages[i]) <= 1e-3 * std::abs(op.node_voltages[i]) + 1e-6);
        }
        CHECK(w.kcl_margin[r] <= 1.0);
    }
}

TEST_CASE("transient is deterministic") {
    const auto a = rc_run(Method::Trapezoidal, kTau / 37, 3 * kTau);
    const auto b = rc_run(Method::Trapezoidal, kTau / 37, 3 * kTau);
    CHECK(a == b);
}

TEST_CASE("row count and CSV layout") {
    SimOptions o;
    o.dt = 10e-9;
    o.tstop = 10e-6;
    const Waveforms w = transient(parse_netlist(kRcStep), o);
    CHECK(w.rows() == 1001);
    std::ostringstream os;
    write_waveforms_csv(w, os);
    std::istringstream is(os.str());
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    CHECK(header == "time,in,out,I(V1)");
    CHECK(first == "0.00000000e+00,1.00000000e+00,0.00000000e+00,-1.00000000e-03");
    std::size_t lines = 2;
    for (std::string l; std::getline(is, l);) ++lines;
    CHECK(lines == 1002);
}

TEST_CASE("options are validated") {
    SimOptions o;
    o.dt = 0.0;
    CHECK_THROWS_AS(check_options(o, true), InvalidArgument);
    o = SimOptions{};
    o.reltol = -1;
    CHECK_THROWS_AS(check_options(o, false), InvalidArgument);
}
