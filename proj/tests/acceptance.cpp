// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "neuroswitch/engine.hpp"
#include "neuroswitch/neuron.hpp"
#include "neuroswitch/power.hpp"
#include "neuroswitch/scenarios.hpp"
#include "oracles.hpp"

using namespace neuroswitch;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Check {
    bool ok = true;
    std::ostringstream notes;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            notes << " [failed: " << what << "]";
        }
    }
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

void savings_claim(Check& c) {
    const auto t0 = Clock::now();
    PowerModelInputs in;
    in.n_switch = 0;
    in.duty = 0.01;
    const double analytic = analytic_power(in).savings_fraction;
    c.expect(std::abs(analytic - 0.99) <= 1e-12, "analytic savings 0.99 to 1e-12");
    const Fig4Result r = run_fig4(Fig4Config{});
    c.expect(r.measured_savings >= 0.95, "measured savings >= 0.95");
    const double elapsed = seconds_since(t0);
    c.expect(elapsed < 10.0, "runtime < 10 s");
    c.notes << fmt("analytic=%.15f measured=%.4f duty=%.4f runtime=%.2fs", analytic, r.measured_savings,
                   r.commanded_duty, elapsed);
}

void output_claim(Check& c) {
    const auto t0 = Clock::now();
    const Fig4Result r = run_fig4(Fig4Config{});
    const double elapsed = seconds_since(t0);
    c.expect(std::abs(r.design.gain - 1000.0) <= 200.0, "gain within 20% of 1000");
    c.expect(r.peak_on_min >= 1.7 && r.peak_on_max <= 2.3, "ON peaks in [1.7, 2.3] V");
    c.expect(r.peak_off < 0.1, "OFF |vout| < 0.1 V");
    c.expect(elapsed < 30.0, "runtime < 30 s");
    c.notes << fmt("gain=%.1f peak_on=[%.4f, %.4f] V peak_off=%.2e V runtime=%.2fs", r.design.gain, r.peak_on_min,
                   r.peak_on_max, r.peak_off, elapsed);
}

void spike_gating(Check& c) {
    const Fig4Result r = run_fig4(Fig4Config{});
    const double period_us = r.median_isi * 1e6;
    const double rel = std::abs(r.output_on_fraction - r.commanded_duty) / r.commanded_duty;
    c.expect(period_us >= 1.0 && period_us <= 10.0, "median period in [1, 10] us");
    c.expect(r.commanded_duty >= 0.01 && rel <= 0.2, "ON fraction within 20% of commanded duty");
    c.notes << fmt("median_period=%.3f us commanded_duty=%.5f on_fraction=%.5f rel_err=%.3f", period_us,
                   r.commanded_duty, r.output_on_fraction, rel);
}

void firing_patterns(Check& c) {
    struct Case {
        PatternClass cls;
        FiringLabel want;
    };
    const Case cases[] = {{PatternClass::RS, FiringLabel::Tonic},
                          {PatternClass::FS, FiringLabel::Tonic},
                          {PatternClass::IB, FiringLabel::InitialBurstThenTonic},
                          {PatternClass::CH, FiringLabel::Chattering}};
    std::size_t rs_count = 0, fs_count = 0;
    for (const auto& k : cases) {
        const IzhParams p = preset(k.cls);
        const SpikeTrain train = run_neuron(p, DcWave{10.0}, 1000.0, 0.1).train;
        const FiringLabel got = classify_pattern(train);
        const auto fine = oracle::izhikevich(p.a, p.b, p.c, p.d, 10.0, 1000.0, 0.01);
        double worst = 0.0;
        bool enough = train.spike_times.size() >= 5 && fine.size() >= 5;
        for (std::size_t i = 0; enough && i < 5; ++i) {
            worst = std::max(worst, std::abs(train.spike_times[i] / p.time_scale - fine[i]));
        }
        const std::string name(to_string(k.cls));
        c.expect(got == k.want, name + " label " + std::string(to_string(k.want)));
        c.expect(enough && worst < 2.0, name + " first 5 spikes within 2 ms of the oracle");
        if (k.cls == PatternClass::RS) rs_count = train.spike_times.size();
        if (k.cls == PatternClass::FS) fs_count = train.spike_times.size();
        c.notes << name << "=" << to_string(got) << fmt("(dmax=%.2fms) ", worst);
    }
    c.expect(fs_count > rs_count, "FS rate > RS rate");
    c.notes << "rates RS=" << rs_count << " FS=" << fs_count << " per 1000 ms";
}

void equation_oracle(Check& c) {
    std::mt19937_64 rng(5);
    auto logu = [&](double lo, double hi) {
        return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
    };
    std::uniform_int_distribution<int> core(1, 20), sw(0, 12);
    std::uniform_real_distribution<double> duty(0.0, 1.0);
    long double worst = 0.0L;
    bool off_zero = true;
    for (int i = 0; i < 100; ++i) {
        const PowerModelInputs in{logu(1e-11, 1e-10), logu(1e-14, 1e-10), logu(1e-9, 1e-7), logu(1e3, 1e9),
                                  logu(0.5, 5.0),     logu(0.1, 5.0),     logu(1e-7, 1e-3), core(rng),
                                  sw(rng),            duty(rng)};
        const PowerReport r = analytic_power(in);
        const auto o = oracle::power(in.eps, in.area, in.tox, in.f, in.vdd, in.vss, in.i_bias, in.n_core, in.n_switch,
                                     in.duty);
        const std::pair<long double, double> pairs[] = {
            {o.c_device, r.c_device},     {o.c_eff, r.c_eff},           {o.p_dyn, r.p_dynamic_device},
            {o.p_static, r.p_static_device}, {o.p_static_circuit, r.p_static_circuit},
            {o.p_unswitched, r.p_total_unswitched}, {o.p_on, r.p_total_switched_on},
            {o.p_avg, r.p_average_switched}, {o.savings, r.savings_fraction}};
        for (const auto& [want, got] : pairs) {
            if (want != 0.0L) worst = std::max(worst, std::fabs((got - want) / want));
        }
        off_zero = off_zero && r.p_total_switched_off == 0.0;
    }
    PowerModelInputs six;
    const PowerReport r6 = analytic_power(six);
    c.expect(worst <= 1e-12L, "100 random inputs within 1e-12 relative");
    c.expect(r6.c_eff == 6.0 * r6.c_device, "c_eff == 6 c_device");
    c.expect(off_zero, "OFF power identically 0");
    c.notes << fmt("max_rel_err=%.3Le c_eff/c_device=%.17g", worst, r6.c_eff / r6.c_device);
}

void engine_numerics(Check& c) {
    const double R = 1e3, C = 1e-9, tau = R * C;
    const Netlist n = parse_netlist("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1n ic=0\n.end");
    auto run = [&](Method m, double dt, double tstop) {
        SimOptions o;
        o.method = m;
        o.dt = dt;
        o.tstop = tstop;
        return transient(n, o);
    };
    auto max_err = [&](double dt) {
        const Waveforms w = run(Method::Trapezoidal, dt, 5 * tau);
        const auto v = w.node_column("out");
        double e = 0.0;
        for (std::size_t r = 0; r < w.rows(); ++r) e = std::max(e, std::abs(v[r] - oracle::rc_step(w.times[r], R, C, 1.0)));
        return e;
    };

    const Waveforms w = run(Method::Trapezoidal, tau / 100, 10 * tau);
    const auto vin = w.node_column("in");
    const auto vout = w.node_column("out");
    double worst_rel = 0.0, kcl = 0.0, dissipated = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double want = oracle::rc_step(w.times[r], R, C, 1.0);
        if (w.times[r] >= tau / 10) worst_rel = std::max(worst_rel, std::abs(vout[r] - want) / want);
        kcl = std::max(kcl, w.kcl_margin[r]);
        if (r > 0) {
            const double p0 = (vin[r - 1] - vout[r - 1]) * (vin[r - 1] - vout[r - 1]) / R;
            const double p1 = (vin[r] - vout[r]) * (vin[r] - vout[r]) / R;
            dissipated += 0.5 * (p0 + p1) * (w.times[r] - w.times[r - 1]);
        }
    }
    const double source = measure_branch_power(w, {"V1"}).per_source_energy.at("V1");
    const double stored = 0.5 * C * (vout.back() * vout.back() - vout.front() * vout.front());
    const double balance = std::abs(source - dissipated - stored) / source;
    const double ratio = max_err(tau / 50) / max_err(tau / 100);

    c.expect(worst_rel < 0.01, "RC step error < 1% at dt = RC/100");
    c.expect(balance < 1e-3, "energy balance within 0.1%");
    c.expect(kcl <= 1.0, "KCL residual bound at every accepted point");
    c.expect(ratio >= 3.0 && ratio <= 5.0, "trapezoidal error ratio in [3, 5]");
    c.notes << fmt("rc_rel_err=%.2e balance=%.2e kcl_margin=%.3f trap_ratio=%.3f", worst_rel, balance, kcl, ratio);
}

void parser_round_trip(Check& c) {
    std::vector<std::pair<std::string, std::string>> texts;
    for (const auto& f : test_data::corpus_files()) texts.emplace_back(f.filename().string(), test_data::read(f));
    const AmpSpec spec;
    texts.emplace_back("generated amplifier",
                       serialize_netlist(build_switched_amp(spec, design_amplifier(spec), GateSpec{}, DcWave{2e-3})));
    std::size_t ok = 0;
    for (const auto& [name, text] : texts) {
        try {
            const Netlist a = parse_netlist(text);
            const Netlist b = parse_netlist(serialize_netlist(a));
            if (a == b) {
                ++ok;
            } else {
                c.notes << " [changed: " << name << "]";
            }
        } catch (const Error& e) {
            c.notes << " [" << name << ": " << e.what() << "]";
        }
    }
    const auto invalid = test_data::invalid_files();
    std::size_t diag_ok = 0;
    for (const auto& f : invalid) {
        const auto want = test_data::expectation(f);
        const std::string text = test_data::read(f);
        try {
            const Netlist n = parse_netlist(text);
            const auto d = validate(n);
            if (want.warning && d.size() == 1 && to_string(d[0].code) == want.code && d[0].line == want.line) ++diag_ok;
        } catch (const ParseError& e) {
            if (!want.warning && to_string(e.code()) == want.code && e.line() == want.line) ++diag_ok;
        }
    }
    c.expect(texts.size() >= 16 && ok == texts.size(), "corpus round-trips unchanged");
    c.expect(!invalid.empty() && diag_ok == invalid.size(), "invalid fixtures give the specified diagnostics");
    c.notes << "round_trip=" << ok << "/" << texts.size() << " diagnostics=" << diag_ok << "/" << invalid.size();
}

void switch_overhead(Check& c) {
    const double b = breakeven_duty(6, 4);
    bool decreasing = true;
    double prev = 2.0, first = 0.0;
    for (int n = 0; n <= 12; ++n) {
        PowerModelInputs in;
        in.n_switch = n;
        in.duty = 0.01;
        const double s = analytic_power(in).savings_fraction;
        if (n == 0) first = s;
        decreasing = decreasing && s < prev;
        prev = s;
    }
    c.expect(b == 0.6, "breakeven_duty(6, 4) == 0.6");
    c.expect(decreasing, "savings strictly decreasing in n_switch");
    c.notes << fmt("breakeven=%.17g savings(n=0)=%.4f savings(n=12)=%.4f", b, first, prev);
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<void(Check&)>> criteria[] = {
        {"99% savings at 1% duty", savings_claim},
        {"2 V output from 2 mV input", output_claim},
        {"spike-gated switching", spike_gating},
        {"firing-pattern suite", firing_patterns},
        {"power equation oracle", equation_oracle},
        {"engine numerics", engine_numerics},
        {"parser round-trip and diagnostics", parser_round_trip},
        {"switch overhead", switch_overhead},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [title, fn] : criteria) {
        ++index;
        Check c;
        try {
            fn(c);
        } catch (const std::exception& e) {
            c.ok = false;
            c.notes << " [exception: " << e.what() << "]";
        }
        failed += !c.ok;
        std::printf("%s criterion %d: %s: %s\n", c.ok ? "PASS" : "FAIL", index, title, c.notes.str().c_str());
    }
    return failed == 0 ? 0 : 1;
}
