#include "neuroswitch/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "neuroswitch/devices.hpp"

namespace neuroswitch {

namespace {

constexpr double kGainProbe = 10e-6;
constexpr double kGainTolerance = 0.2;
constexpr double kOutputHigh = 1.0;  // |vout| above this counts as amplified

SimOptions design_options() {
    SimOptions o;
    o.reltol = 1e-6;
    o.vabstol = 1e-9;
    return o;
}

Waveform affine(const Waveform& w, double scale, double offset) {
    return std::visit(
        [&](const auto& x) -> Waveform {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, DcWave>) {
                return DcWave{offset + scale * x.value};
            } else if constexpr (std::is_same_v<T, PulseWave>) {
                PulseWave p = x;
                p.v1 = offset + scale * x.v1;
                p.v2 = offset + scale * x.v2;
                return p;
            } else if constexpr (std::is_same_v<T, PwlWave>) {
                PwlWave p = x;
                for (auto& pt : p.points) pt.second = offset + scale * pt.second;
                return p;
            } else {
                return SineWave{offset + scale * x.offset, scale * x.amplitude, x.frequency};
            }
        },
        w);
}

std::pair<double, double> waveform_range(const Waveform& w) {
    return std::visit(
        [](const auto& x) -> std::pair<double, double> {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, DcWave>) {
                return {x.value, x.value};
            } else if constexpr (std::is_same_v<T, PulseWave>) {
                return {std::min(x.v1, x.v2), std::max(x.v1, x.v2)};
            } else if constexpr (std::is_same_v<T, PwlWave>) {
                double lo = x.points.front().second, hi = lo;
                for (const auto& pt : x.points) {
                    lo = std::min(lo, pt.second);
                    hi = std::max(hi, pt.second);
                }
                return {lo, hi};
            } else {
                const double a = std::abs(x.amplitude);
                return {x.offset - a, x.offset + a};
            }
        },
        w);
}

void add_mos(Netlist& n, const std::string& name, const std::string& d, const std::string& g,
             const std::string& s, const std::string& b, const std::string& model, double wl, double l) {
    n.add_element({name, ElementKind::Mosfet, {d, g, s, b}, MosfetParams{model, wl * l, l}});
}

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double rail_power(const AmpSpec& spec, const OperatingPoint& op) {
    return -(spec.vdd * op.source_currents.at("VDD") + spec.vss * op.source_currents.at("VSS"));
}

double drain_current(const Netlist& n, const OperatingPoint& op, std::string_view name) {
    const Element* e = n.find_element(name);
    const auto& m = std::get<MosfetParams>(e->params);
    auto v = [&](const std::string& node) { return op.node_voltages[static_cast<std::size_t>(*n.find_node(node))]; };
    const double vs = v(e->nodes[2]);
    return mosfet_eval(*n.find_model(m.model), m.w, m.l, v(e->nodes[1]) - vs, v(e->nodes[0]) - vs).id;
}

double vnode(const Netlist& n, const OperatingPoint& op, std::string_view name) {
    return op.node_voltages[static_cast<std::size_t>(*n.find_node(name))];
}

struct Sized {
    AmpDesign design;
    std::vector<double> guess;
};

// Tunes r_bias for the tail current and load_wl for zero output at zero input,
// then measures the gain by a two-point DC perturbation.
Sized size_at(const AmpSpec& spec, double pair_wl, AmpDesign d, std::vector<double> guess) {
    d.pair_wl = pair_wl;
    const SimOptions opts = design_options();
    const GateSpec on{DcWave{spec.vdd}, SwitchParams{100.0, 1e15, 0.5 * spec.vdd}};
    const DeviceModel& nm = spec.nmos_mirror;
    OperatingPoint op;
    Netlist n;
    for (int iter = 0; iter < 20; ++iter) {
        n = build_switched_amp(spec, d, on, DcWave{0.0});
        op = dc_operating_point(n, opts, guess.empty() ? nullptr : &guess);
        guess = op.node_voltages;
        const double tail = -drain_current(n, op, "M5");
        const double i_load = drain_current(n, op, "M1");
        const double vout = vnode(n, op, "vout");
        d.tail_current = tail;
        d.vout_offset = vout;
        if (std::abs(vout) < 1e-6 && std::abs(tail / spec.i_bias - 1.0) < 1e-6) break;
        d.r_bias *= tail / spec.i_bias;
        const double vgs = -vnode(n, op, "vssi");
        const double vov = vgs - nm.vt;
        if (!(vov > 0) || !(i_load > 0)) throw GainUnachievable("load cannot be biased for zero output offset");
        d.load_wl = 2.0 * i_load / (nm.kp * vov * vov * (1.0 + nm.lambda * vgs));
    }
    Netlist probe = build_switched_amp(spec, d, on, DcWave{kGainProbe});
    const OperatingPoint op1 = dc_operating_point(probe, opts, &guess);
    d.gain = (vnode(probe, op1, "vout") - vnode(n, op, "vout")) / kGainProbe;
    return {d, guess};
}

}  // namespace

void check_spec(const AmpSpec& s) {
    if (!(s.target_gain > 0)) throw InvalidArgument("target_gain must be > 0");
    if (!(s.vdd > 0) || !(s.vss <= 0)) throw InvalidArgument("rails must straddle 0 (vdd > 0 >= vss)");
    if (!(s.i_bias > 0) || !(s.length > 0) || !(s.tail_wl > 0) || !(s.reference_ratio > 0)) {
        throw InvalidArgument("i_bias, length, tail_wl and reference_ratio must be > 0");
    }
    if (!(s.vcm > s.vss) || !(s.vcm < s.vdd)) throw InvalidArgument("vcm must lie between the rails");
    for (double wl : s.pair_wl_grid) {
        if (!(wl > 0)) throw InvalidArgument("pair_wl_grid entries must be > 0");
    }
}

AmpDesign design_amplifier(const AmpSpec& spec) {
    check_spec(spec);
    std::vector<double> grid = spec.pair_wl_grid;
    if (grid.empty()) {
        for (int k = -24; k <= 72; ++k) grid.push_back(std::pow(10.0, k / 24.0));
    }

    // Starting sizes from the square law.
    AmpDesign d;
    const DeviceModel& pm = spec.pmos_mirror;
    const double i_ref = spec.reference_ratio * spec.i_bias;
    const double vsg6 = pm.vt + std::sqrt(2.0 * i_ref / (pm.kp * spec.tail_wl * spec.reference_ratio));
    d.r_bias = (spec.vdd - spec.vss - vsg6) / i_ref;
    const double vgs1 = -spec.vss;
    d.load_wl = spec.i_bias / (spec.nmos_mirror.kp * (vgs1 - spec.nmos_mirror.vt) * (vgs1 - spec.nmos_mirror.vt));

    std::optional<AmpDesign> best;
    std::vector<double> guess;
    for (double wl : grid) {
        Sized s;
        try {
            s = size_at(spec, wl, d, guess);
        } catch (const Error&) {
            continue;  // this size cannot be biased
        }
        guess = s.guess;
        d = s.design;
        const double err = std::abs(s.design.gain / spec.target_gain - 1.0);
        if (!best || err < std::abs(best->gain / spec.target_gain - 1.0)) best = s.design;
        if (s.design.gain > 1.5 * spec.target_gain) break;
    }
    if (!best || std::abs(best->gain / spec.target_gain - 1.0) > kGainTolerance) {
        throw GainUnachievable("no pair size in the search grid reaches a gain within 20% of " +
                               format_value(spec.target_gain) +
                               (best ? " (closest " + format_value(best->gain) + ")" : std::string()));
    }
    return *best;
}

Netlist build_switched_amp(const AmpSpec& spec, const AmpDesign& d, const GateSpec& gate, const Waveform& vin_diff) {
    check_spec(spec);
    if (!(d.pair_wl > 0) || !(d.load_wl > 0) || !(d.r_bias > 0)) throw InvalidArgument("design sizes must be > 0");
    const auto [lo, hi] = waveform_range(gate.control);
    if (!std::holds_alternative<DcWave>(gate.control) && !(lo < gate.sw.vt && gate.sw.vt <= hi)) {
        throw InvalidArgument("control levels must span the switch threshold");
    }

    Netlist n;
    n.title = "switched differential amplifier";
    n.add_model(spec.nmos_mirror);
    n.add_model(spec.pmos_mirror);
    n.add_model(spec.pmos_gain);
    const double l = spec.length;
    n.add_element({"VDD", ElementKind::VSource, {"vdd", "0"}, SourceParams{DcWave{spec.vdd}}});
    n.add_element({"VSS", ElementKind::VSource, {"vss", "0"}, SourceParams{DcWave{spec.vss}}});
    n.add_element({"VCTRL", ElementKind::VSource, {"ctrl", "0"}, SourceParams{gate.control}});
    n.add_element({"V1", ElementKind::VSource, {"v1", "0"}, SourceParams{affine(vin_diff, 0.5, spec.vcm)}});
    n.add_element({"V2", ElementKind::VSource, {"v2", "0"}, SourceParams{affine(vin_diff, -0.5, spec.vcm)}});
    n.add_element({"S1", ElementKind::Switch, {"vdd", "vddi", "ctrl", "0"}, gate.sw});
    n.add_element({"S2", ElementKind::Switch, {"vssi", "vss", "ctrl", "0"}, gate.sw});
    add_mos(n, "M6", "bias", "bias", "vddi", "vddi", spec.pmos_mirror.name, spec.tail_wl * spec.reference_ratio, l);
    n.add_element({"RB", ElementKind::Resistor, {"bias", "vssi"}, ResistorParams{d.r_bias}});
    add_mos(n, "M5", "tail", "bias", "vddi", "vddi", spec.pmos_mirror.name, spec.tail_wl, l);
    add_mos(n, "M3", "mir", "v1", "tail", "vddi", spec.pmos_gain.name, d.pair_wl, l);
    add_mos(n, "M4", "vout", "v2", "tail", "vddi", spec.pmos_gain.name, d.pair_wl, l);
    add_mos(n, "M1", "mir", "mir", "vssi", "vssi", spec.nmos_mirror.name, d.load_wl, l);
    add_mos(n, "M2", "vout", "mir", "vssi", "vssi", spec.nmos_mirror.name, d.load_wl, l);
    n.analyses.push_back(OpAnalysis{});
    return n;
}

Netlist build_switched_amp(const AmpSpec& spec, const GateSpec& gate, const Waveform& vin_diff) {
    return build_switched_amp(spec, design_amplifier(spec), gate, vin_diff);
}

double always_on_power(const AmpSpec& spec, const AmpDesign& design, double vin_diff) {
    const Netlist n = build_switched_amp(spec, design, GateSpec{}, DcWave{vin_diff});
    return rail_power(spec, dc_operating_point(n, SimOptions{}));
}

Fig4Result run_fig4(const Fig4Config& cfg) {
    Fig4Result r;
    IzhParams p = preset(cfg.preset);
    p.time_scale = cfg.time_scale;
    if (!(cfg.duration > 0) || !(cfg.time_scale > 0)) throw InvalidArgument("duration and time_scale must be > 0");
    r.train = run_neuron(p, DcWave{cfg.drive}, cfg.duration / cfg.time_scale, cfg.neuron_dt_ms).train;
    const auto& ts = r.train.spike_times;

    if (ts.size() >= 2) {
        std::vector<double> isi;
        for (std::size_t i = 0; i + 1 < ts.size(); ++i) isi.push_back(ts[i + 1] - ts[i]);
        r.median_isi = median_of(isi);
    }
    if (cfg.pulse_width > 0) {
        r.pulse_width = cfg.pulse_width;
    } else {
        if (ts.size() < 2) {
            throw InvalidArgument("run_fig4: preset " + std::string(to_string(cfg.preset)) +
                        " fires fewer than two spikes at the configured drive");
        }
        if (!(cfg.duty > 0 && cfg.duty <= 1)) throw InvalidArgument("duty must lie in (0, 1]");
        r.pulse_width = cfg.duty * r.median_isi;
    }
    if (ts.empty()) {
        throw InvalidArgument("run_fig4: preset " + std::string(to_string(cfg.preset)) + " is silent at the configured drive");
    }

    const Waveform control = spikes_to_control(r.train, r.pulse_width, cfg.v_high, cfg.v_low);
    r.design = design_amplifier(cfg.amp);
    r.netlist = build_switched_amp(cfg.amp, r.design, GateSpec{control, cfg.sw}, DcWave{cfg.vin_diff});

    SimOptions opts;
    opts.dt = r.pulse_width / 50.0;
    opts.tstop = cfg.duration;
    r.dt = opts.dt;
    try {
        r.waves = transient(r.netlist, opts);
    } catch (const NonConvergence& e) {
        throw NonConvergence(e.time(), e.last_iterate(), std::string("run_fig4: ") + e.what());
    }

    const auto t = r.waves.times;
    const auto vout = r.waves.node_column("vout");
    const auto on = control_intervals(r.train, r.pulse_width);
    double on_time = 0.0;
    for (const auto& [s, e] : on) on_time += std::min(e, cfg.duration) - s;
    r.commanded_duty = on_time / cfg.duration;

    std::size_t high = 0;
    for (double v : vout) high += std::abs(v) > kOutputHigh;
    r.output_on_fraction = static_cast<double>(high) / static_cast<double>(vout.size());

    r.peak_on_min = std::numeric_limits<double>::infinity();
    r.peak_on_max = 0.0;
    for (const auto& [s, e] : on) {
        if (e > cfg.duration) continue;
        double peak = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] >= s && t[i] <= e) peak = std::max(peak, std::abs(vout[i]));
        }
        r.peak_on_min = std::min(r.peak_on_min, peak);
        r.peak_on_max = std::max(r.peak_on_max, peak);
    }
    if (r.peak_on_max == 0.0) r.peak_on_min = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (source_value(control, t[i]) <= cfg.v_low) r.peak_off = std::max(r.peak_off, std::abs(vout[i]));
    }

    const double margin = 0.1 * r.pulse_width;
    const auto& first = on.front();
    r.measured_on =
        measure_branch_power(r.waves, kRailSources, std::pair{first.first + margin, first.second - margin})
            .total_avg_power;
    r.measured_avg = measure_branch_power(r.waves, kRailSources).total_avg_power;
    r.measured_savings = r.measured_on > 0 ? 1.0 - r.measured_avg / r.measured_on : 0.0;

    PowerModelInputs in;
    in.eps = cfg.amp.pmos_gain.eps;
    in.tox = cfg.amp.pmos_gain.tox;
    in.area = r.design.pair_wl * cfg.amp.length * cfg.amp.length;
    in.f = r.median_isi > 0 ? 1.0 / r.median_isi : 1.0 / cfg.duration;
    in.vdd = cfg.amp.vdd;
    in.vss = -cfg.amp.vss;
    in.i_bias = r.design.tail_current;
    in.duty = std::clamp(r.commanded_duty, 0.0, 1.0);
    r.analytic = analytic_power(in);
    r.rec = reconcile(r.analytic, r.measured_on, r.measured_avg);
    return r;
}

PowerExperiment run_power_experiment(const PowerExperimentConfig& cfg, const std::vector<double>& duties, int jobs) {
    check_inputs(cfg.inputs);
    if (cfg.periods <= 0) throw InvalidArgument("periods must be > 0");
    const auto analytic = duty_sweep(cfg.inputs, duties);

    PowerExperiment out;
    out.design = design_amplifier(cfg.amp);
    out.measured_always_on = always_on_power(cfg.amp, out.design, cfg.vin_diff);
    out.rows.resize(duties.size());
    std::vector<std::exception_ptr> errors(duties.size());

    auto run_one = [&](std::size_t k) {
        const double duty = duties[k];
        const double period = 1.0 / cfg.inputs.f;
        Waveform control;
        double dt = period / 50.0;
        if (duty >= 1.0) {
            control = DcWave{cfg.v_high};
        } else if (duty <= 0.0) {
            control = DcWave{cfg.v_low};
        } else {
            // ON time between edge midpoints equals duty * period.
            const double edge = std::min(duty, 1.0 - duty) * period / 10.0;
            control = PulseWave{cfg.v_low, cfg.v_high, 0.0, edge, edge, duty * period - edge, period};
            dt = std::min(duty, 0.5) * period / 50.0;
        }
        const Netlist n = build_switched_amp(cfg.amp, out.design, GateSpec{control, cfg.sw}, DcWave{cfg.vin_diff});
        SimOptions opts;
        opts.dt = dt;
        opts.tstop = cfg.periods * period;
        const Waveforms w = transient(n, opts);
        const auto vout = w.node_column("vout");
        std::size_t high = 0;
        for (double v : vout) high += std::abs(v) > kOutputHigh;

        PowerExperimentRow& row = out.rows[k];
        row.duty = duty;
        row.analytic_p_avg = analytic[k].p_average_switched;
        row.analytic_savings = analytic[k].savings_fraction;
        row.measured_p_avg = measure_branch_power(w, kRailSources).total_avg_power;
        row.measured_savings = 1.0 - row.measured_p_avg / out.measured_always_on;
        row.output_on_fraction = static_cast<double>(high) / static_cast<double>(vout.size());
    };

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < duties.size(); k = next++) {
            try {
                run_one(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), duties.size());
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

void write_fig4_manifest(const Fig4Config& cfg, const Fig4Result& r, std::ostream& os) {
    nlohmann::ordered_json j;
    auto& in = j["inputs"];
    in["vdd"] = cfg.amp.vdd;
    in["vss"] = cfg.amp.vss;
    in["vcm"] = cfg.amp.vcm;
    in["target_gain"] = cfg.amp.target_gain;
    in["i_bias"] = cfg.amp.i_bias;
    in["length"] = cfg.amp.length;
    in["tail_wl"] = cfg.amp.tail_wl;
    in["reference_ratio"] = cfg.amp.reference_ratio;
    for (const DeviceModel* m : {&cfg.amp.nmos_mirror, &cfg.amp.pmos_mirror, &cfg.amp.pmos_gain}) {
        in["models"][m->name] = {{"polarity", m->polarity == Polarity::NMOS ? "nmos" : "pmos"},
                                 {"vt", m->vt},
                                 {"kp", m->kp},
                                 {"lambda", m->lambda},
                                 {"tox", m->tox},
                                 {"eps", m->eps}};
    }
    in["preset"] = to_string(cfg.preset);
    in["drive"] = cfg.drive;
    in["time_scale"] = cfg.time_scale;
    in["neuron_dt_ms"] = cfg.neuron_dt_ms;
    in["duration_s"] = cfg.duration;
    in["pulse_width_s"] = cfg.pulse_width;
    in["duty"] = cfg.duty;
    in["vin_diff_v"] = cfg.vin_diff;
    in["v_high"] = cfg.v_high;
    in["v_low"] = cfg.v_low;
    in["switch"] = {{"ron", cfg.sw.ron}, {"roff", cfg.sw.roff}, {"vt", cfg.sw.vt}};

    auto& d = j["design"];
    d["pair_wl"] = r.design.pair_wl;
    d["load_wl"] = r.design.load_wl;
    d["r_bias"] = r.design.r_bias;
    d["gain"] = r.design.gain;
    d["vout_offset"] = r.design.vout_offset;
    d["tail_current"] = r.design.tail_current;

    auto& res = j["results"];
    res["spikes"] = r.train.spike_times.size();
    res["median_isi_s"] = r.median_isi;
    res["pulse_width_s"] = r.pulse_width;
    res["dt_s"] = r.dt;
    res["commanded_duty"] = r.commanded_duty;
    res["output_on_fraction"] = r.output_on_fraction;
    res["peak_on_min_v"] = r.peak_on_min;
    res["peak_on_max_v"] = r.peak_on_max;
    res["peak_off_v"] = r.peak_off;
    res["measured_on_w"] = r.measured_on;
    res["measured_avg_w"] = r.measured_avg;
    res["measured_savings"] = r.measured_savings;
    res["on_ratio"] = r.rec.on_ratio;
    res["avg_ratio"] = r.rec.avg_ratio;
    res["duty_inferred"] = r.rec.duty_inferred;
    os << j.dump(2) << '\n';
}

void write_power_experiment_csv(const PowerExperiment& e, std::ostream& os) {
    os << "duty,analytic_p_avg_w,analytic_savings,measured_p_avg_w,measured_savings,output_on_fraction\n";
    char buf[192];
    for (const auto& r : e.rows) {
        std::snprintf(buf, sizeof(buf), "%.8e,%.8e,%.8e,%.8e,%.8e,%.8e\n", r.duty, r.analytic_p_avg,
                      r.analytic_savings, r.measured_p_avg, r.measured_savings, r.output_on_fraction);
        os << buf;
    }
}

}  // namespace neuroswitch
