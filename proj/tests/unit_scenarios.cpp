#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "neuroswitch/scenarios.hpp"

using namespace neuroswitch;

namespace {

const AmpDesign& design() {
    static const AmpDesign d = design_amplifier(AmpSpec{});
    return d;
}

double vout_at(const Netlist& n) {
    const auto op = dc_operating_point(n, SimOptions{});
    return op.node_voltages[static_cast<std::size_t>(*n.find_node("vout"))];
}

const Fig4Result& fig4_default() {
    static const Fig4Result r = run_fig4(Fig4Config{});
    return r;
}

}  // namespace

TEST_CASE("designed gain is within 20% of the target") {
    const AmpDesign& d = design();
    CAPTURE(d.pair_wl);
    CAPTURE(d.gain);
    CHECK(std::abs(d.gain - 1000.0) <= 200.0);
    CHECK(d.tail_current == doctest::Approx(10e-6).epsilon(0.01));
    CHECK(std::abs(d.vout_offset) < 1e-3);
}

TEST_CASE("switches on: 2 mV input swings the output by about 2 V") {
    const AmpSpec spec;
    const double zero = vout_at(build_switched_amp(spec, design(), GateSpec{}, DcWave{0.0}));
    const double two = vout_at(build_switched_amp(spec, design(), GateSpec{}, DcWave{2e-3}));
    const double swing = std::abs(two - zero);
    CAPTURE(swing);
    CHECK(swing >= 1.6);
    CHECK(swing <= 2.4);
}

TEST_CASE("switches off: the output collapses to ground") {
    GateSpec off;
    off.control = DcWave{0.0};
    CHECK(std::abs(vout_at(build_switched_amp(AmpSpec{}, design(), off, DcWave{2e-3}))) < 50e-3);
}

TEST_CASE("unreachable gain") {
    AmpSpec spec;
    spec.target_gain = 1e9;
    CHECK_THROWS_AS(design_amplifier(spec), GainUnachievable);
}

TEST_CASE("spec and gate validation") {
    AmpSpec spec;
    spec.target_gain = 0.0;
    CHECK_THROWS_AS(check_spec(spec), InvalidArgument);
    spec = AmpSpec{};
    spec.vss = 1.0;
    CHECK_THROWS_AS(check_spec(spec), InvalidArgument);
    spec.vss = 0.0;
    CHECK_NOTHROW(check_spec(spec));

    GateSpec low;
    low.control = PulseWave{0.0, 1.0, 0.0, 1e-9, 1e-9, 1e-7, 1e-6};  // never reaches vt
    CHECK_THROWS_AS(build_switched_amp(AmpSpec{}, design(), low, DcWave{0.0}), InvalidArgument);
}

TEST_CASE("generated amplifier netlist round-trips") {
    const Netlist n = build_switched_amp(AmpSpec{}, design(), GateSpec{}, DcWave{2e-3});
    CHECK(n.find_node("vout"));
    CHECK(n.find_node("v1"));
    CHECK(n.find_node("v2"));
    for (const char* name : {"M1", "M2", "M3", "M4", "M5", "M6", "S1", "S2"}) CHECK(n.find_element(name));
    CHECK(parse_netlist(serialize_netlist(n)) == n);
}

TEST_CASE("static power is close to the six-device model") {
    const AmpSpec spec;
    const double measured = always_on_power(spec, design(), 2e-3);
    const double predicted = 6.0 * design().tail_current * (spec.vdd - spec.vss);
    CAPTURE(measured);
    CAPTURE(predicted);
    CHECK(std::abs(measured - predicted) <= 0.3 * predicted);
}

TEST_CASE("neuron-gated run at defaults") {
    const Fig4Result& r = fig4_default();
    CAPTURE(r.peak_on_min);
    CAPTURE(r.peak_on_max);
    CAPTURE(r.peak_off);
    CHECK(r.train.spike_times.size() >= 3);
    CHECK(r.median_isi >= 1e-6);
    CHECK(r.median_isi <= 10e-6);
    CHECK(r.dt == doctest::Approx(r.pulse_width / 50));
    CHECK(r.peak_on_min >= 1.7);
    CHECK(r.peak_on_max <= 2.3);
    CHECK(r.peak_off < 0.1);
    CHECK(r.measured_savings >= 0.95);
    CHECK(r.measured_avg <= 0.02 * r.measured_on);
    CHECK(r.rec.duty_inferred >= 0.008);
    CHECK(r.rec.duty_inferred <= 0.012);
    CHECK(std::abs(r.output_on_fraction - r.commanded_duty) <= 0.2 * r.commanded_duty);
    for (double m : r.waves.kcl_margin) CHECK(m <= 1.0);
}

TEST_CASE("zero input stays in the offset band") {
    Fig4Config cfg;
    cfg.vin_diff = 0.0;
    const Fig4Result r = run_fig4(cfg);
    CHECK(r.peak_on_max < 50e-3);
    CHECK(r.peak_off < 50e-3);
}

TEST_CASE("silent neuron is rejected") {
    Fig4Config cfg;
    cfg.drive = 0.0;
    CHECK_THROWS_AS(run_fig4(cfg), InvalidArgument);
}

TEST_CASE("manifest is reproducible") {
    const Fig4Result again = run_fig4(Fig4Config{});
    std::ostringstream a, b;
    write_fig4_manifest(Fig4Config{}, fig4_default(), a);
    write_fig4_manifest(Fig4Config{}, again, b);
    CHECK(a.str() == b.str());
    CHECK(again.waves == fig4_default().waves);
}

TEST_CASE("power experiment") {
    PowerExperimentConfig cfg;
    cfg.inputs.n_switch = 0;
    const std::vector<double> duties{0.01, 0.1, 0.5, 1.0};
    const PowerExperiment e = run_power_experiment(cfg, duties, 4);
    REQUIRE(e.rows.size() == duties.size());
    for (std::size_t i = 0; i < duties.size(); ++i) CHECK(e.rows[i].duty == duties[i]);

    CHECK(e.rows[0].analytic_savings == doctest::Approx(0.99).epsilon(1e-12));
    CHECK(e.rows[0].measured_savings >= 0.95);
    CHECK(e.rows[0].measured_savings <= 0.995);
    CHECK(e.rows[3].analytic_savings == 0.0);
    CHECK(std::abs(e.rows[3].measured_savings) < 1e-6);

    for (std::size_t i = 1; i < e.rows.size(); ++i) CHECK(e.rows[i].measured_p_avg >= e.rows[i - 1].measured_p_avg);
    for (const auto& row : e.rows) {
        CAPTURE(row.duty);
        CHECK(std::abs(row.output_on_fraction - row.duty) <= 0.2 * row.duty);
    }

    const PowerExperiment serial = run_power_experiment(cfg, duties, 1);
    std::ostringstream a, b;
    write_power_experiment_csv(e, a);
    write_power_experiment_csv(serial, b);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("duty,analytic_p_avg_w,analytic_savings,measured_p_avg_w,measured_savings,output_on_fraction\n", 0) == 0);

    const PowerExperiment pair = run_power_experiment(cfg, {0.01, 0.5});
    REQUIRE(pair.rows.size() == 2);
    CHECK(pair.rows[1].duty == 0.5);
}
