#include "neuroswitch/neuroswitch.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>

#include "neuroswitch/engine.hpp"
#include "neuroswitch/neuron.hpp"
#include "neuroswitch/power.hpp"
#include "neuroswitch/scenarios.hpp"

using namespace neuroswitch;

struct ns_netlist {
    Netlist n;
};
struct ns_waveforms {
    Waveforms w;
};
struct ns_neuron_run {
    NeuronRun run;
};
struct ns_fig4 {
    Fig4Config cfg;
    Fig4Result r;
};
struct ns_power_experiment {
    PowerExperiment e;
};

namespace {

thread_local std::string g_error;

class IoError : public Error {
public:
    using Error::Error;
};

ns_status fail(ns_status s, const std::string& msg) {
    g_error = msg;
    return s;
}

template <class F>
ns_status guard(F&& f) {
    try {
        f();
        return NS_OK;
    } catch (const ParseError& e) {
        return fail(NS_ERR_PARSE, e.what());
    } catch (const NonConvergence& e) {
        return fail(NS_ERR_NUMERIC, e.what());
    } catch (const SingularMatrix& e) {
        return fail(NS_ERR_NUMERIC, e.what());
    } catch (const GainUnachievable& e) {
        return fail(NS_ERR_NUMERIC, e.what());
    } catch (const InvalidArgument& e) {
        return fail(NS_ERR_INVALID_ARGUMENT, e.what());
    } catch (const IoError& e) {
        return fail(NS_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(NS_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(NS_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(NS_ERR_INTERNAL, "unknown error");
    }
}

void require(const void* p, const char* what) {
    if (!p) throw InvalidArgument(std::string(what) + " is null");
}

char* dup(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <class W>
void write_file(const std::filesystem::path& path, W&& writer) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    writer(os);
    os.flush();
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

SimOptions to_cpp(const ns_sim_options* o) {
    SimOptions s;
    if (!o) return s;
    s.method = o->method == NS_METHOD_BE ? Method::BackwardEuler : Method::Trapezoidal;
    s.dt = o->dt;
    s.tstop = o->tstop;
    s.reltol = o->reltol;
    s.vabstol = o->vabstol;
    s.iabstol = o->iabstol;
    s.max_nr_iters = o->max_nr_iters;
    s.gmin = o->gmin;
    return s;
}

PowerModelInputs to_cpp(const ns_power_inputs& in) {
    return {in.eps, in.area, in.tox, in.f, in.vdd, in.vss, in.i_bias, in.n_core, in.n_switch, in.duty};
}

ns_power_report to_c(const PowerReport& r) {
    return {r.c_device,           r.c_eff,
            r.p_dynamic_device,   r.p_static_device,
            r.p_static_circuit,   r.p_total_unswitched,
            r.p_total_switched_on, r.p_total_switched_off,
            r.p_average_switched, r.savings_fraction};
}

PowerReport to_cpp(const ns_power_report& r) {
    return {r.c_device,           r.c_eff,
            r.p_dynamic_device,   r.p_static_device,
            r.p_static_circuit,   r.p_total_unswitched,
            r.p_total_switched_on, r.p_total_switched_off,
            r.p_average_switched, r.savings_fraction};
}

void copy_column(const std::vector<double>& col, double* out, size_t cap) {
    require(out, "output buffer");
    const size_t n = std::min(cap, col.size());
    std::copy(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(n), out);
}

}  // namespace

extern "C" {

const char* ns_version(void) { return "0.1.0"; }

const char* ns_last_error(void) { return g_error.c_str(); }

void ns_string_free(char* s) { delete[] s; }

ns_status ns_parse_value(const char* text, double* out) {
    return guard([&] {
        require(text, "text");
        require(out, "out");
        const auto v = parse_value(text);
        if (!v) throw InvalidArgument(std::string("'") + text + "' is not a number");
        *out = *v;
    });
}

ns_status ns_netlist_parse(const char* text, ns_netlist** out) {
    return guard([&] {
        require(text, "text");
        require(out, "out");
        *out = new ns_netlist{parse_netlist(text)};
    });
}

ns_status ns_netlist_parse_file(const char* path, ns_netlist** out) {
    return guard([&] {
        require(path, "path");
        require(out, "out");
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError(std::string("cannot read '") + path + "'");
        std::ostringstream ss;
        ss << is.rdbuf();
        *out = new ns_netlist{parse_netlist(ss.str())};
    });
}

void ns_netlist_free(ns_netlist* n) { delete n; }

ns_status ns_netlist_serialize(const ns_netlist* n, char** out) {
    return guard([&] {
        require(n, "netlist");
        require(out, "out");
        *out = dup(serialize_netlist(n->n));
    });
}

ns_status ns_netlist_diagnostics(const ns_netlist* n, char** out) {
    return guard([&] {
        require(n, "netlist");
        require(out, "out");
        std::string text;
        for (const auto& d : validate(n->n)) {
            text += "line " + std::to_string(d.line) + ": " + std::string(to_string(d.code)) + ": " + d.message + "\n";
        }
        *out = dup(text);
    });
}

size_t ns_netlist_element_count(const ns_netlist* n) { return n ? n->n.elements.size() : 0; }

size_t ns_netlist_node_count(const ns_netlist* n) { return n ? n->n.node_count() : 0; }

ns_status ns_netlist_tran(const ns_netlist* n, int* found, double* step, double* stop) {
    return guard([&] {
        require(n, "netlist");
        require(found, "found");
        *found = 0;
        for (const auto& a : n->n.analyses) {
            if (const auto* t = std::get_if<TranAnalysis>(&a)) {
                *found = 1;
                if (step) *step = t->step;
                if (stop) *stop = t->stop;
            }
        }
    });
}

void ns_sim_options_default(ns_sim_options* o) {
    if (!o) return;
    const SimOptions s;
    *o = {NS_METHOD_TRAP, s.dt, s.tstop, s.reltol, s.vabstol, s.iabstol, s.max_nr_iters, s.gmin};
}

ns_status ns_transient(const ns_netlist* n, const ns_sim_options* o, ns_waveforms** out) {
    return guard([&] {
        require(n, "netlist");
        require(out, "out");
        *out = new ns_waveforms{transient(n->n, to_cpp(o))};
    });
}

void ns_waveforms_free(ns_waveforms* w) { delete w; }

size_t ns_waveforms_rows(const ns_waveforms* w) { return w ? w->w.rows() : 0; }

ns_status ns_waveforms_node(const ns_waveforms* w, const char* node, double* out, size_t cap) {
    return guard([&] {
        require(w, "waveforms");
        require(node, "node");
        copy_column(w->w.node_column(node), out, cap);
    });
}

ns_status ns_waveforms_times(const ns_waveforms* w, double* out, size_t cap) {
    return guard([&] {
        require(w, "waveforms");
        copy_column(w->w.times, out, cap);
    });
}

ns_status ns_waveforms_write_csv(const ns_waveforms* w, const char* path) {
    return guard([&] {
        require(w, "waveforms");
        require(path, "path");
        write_file(path, [&](std::ostream& os) { write_waveforms_csv(w->w, os); });
    });
}

ns_status ns_waveforms_source_power(const ns_waveforms* w, const char* source, double* watts) {
    return guard([&] {
        require(w, "waveforms");
        require(source, "source");
        require(watts, "watts");
        *watts = measure_branch_power(w->w, {source}).total_avg_power;
    });
}

ns_status ns_dc_node_voltage(const ns_netlist* n, const ns_sim_options* o, const char* node, double* v) {
    return guard([&] {
        require(n, "netlist");
        require(node, "node");
        require(v, "v");
        const auto idx = n->n.find_node(node);
        if (!idx) throw InvalidArgument(std::string("unknown node '") + node + "'");
        *v = dc_operating_point(n->n, to_cpp(o)).node_voltages[static_cast<size_t>(*idx)];
    });
}

ns_status ns_neuron_preset(const char* key, ns_neuron_params* out) {
    return guard([&] {
        require(key, "key");
        require(out, "out");
        const IzhParams p = preset(std::string_view(key));
        *out = {p.a, p.b, p.c, p.d, p.v_peak, p.time_scale};
    });
}

ns_status ns_neuron_simulate(const ns_neuron_params* p, double current, double duration_ms, double dt_ms,
                             ns_neuron_run** out) {
    return guard([&] {
        require(p, "params");
        require(out, "out");
        const IzhParams ip{p->a, p->b, p->c, p->d, p->v_peak, p->time_scale};
        *out = new ns_neuron_run{run_neuron(ip, DcWave{current}, duration_ms, dt_ms)};
    });
}

void ns_neuron_free(ns_neuron_run* r) { delete r; }

size_t ns_neuron_spike_count(const ns_neuron_run* r) { return r ? r->run.train.spike_times.size() : 0; }

ns_status ns_neuron_spike_times(const ns_neuron_run* r, double* out, size_t cap) {
    return guard([&] {
        require(r, "run");
        copy_column(r->run.train.spike_times, out, cap);
    });
}

ns_status ns_neuron_classify(const ns_neuron_run* r, double skip, const char** label) {
    return guard([&] {
        require(r, "run");
        require(label, "label");
        // to_string returns views of string literals, so data() is NUL-terminated.
        *label = to_string(classify_pattern(r->run.train, skip)).data();
    });
}

ns_status ns_neuron_write_trace_csv(const ns_neuron_run* r, const char* path) {
    return guard([&] {
        require(r, "run");
        require(path, "path");
        write_file(path, [&](std::ostream& os) { write_trace_csv(r->run, os); });
    });
}

ns_status ns_neuron_write_spikes_json(const ns_neuron_run* r, const char* path) {
    return guard([&] {
        require(r, "run");
        require(path, "path");
        write_file(path, [&](std::ostream& os) { write_spike_json(r->run.train, os); });
    });
}

void ns_power_inputs_default(ns_power_inputs* in) {
    if (!in) return;
    const PowerModelInputs d;
    *in = {d.eps, d.area, d.tox, d.f, d.vdd, d.vss, d.i_bias, d.n_core, d.n_switch, d.duty};
}

ns_status ns_power_analyze(const ns_power_inputs* in, ns_power_report* out) {
    return guard([&] {
        require(in, "inputs");
        require(out, "out");
        *out = to_c(analytic_power(to_cpp(*in)));
    });
}

ns_status ns_power_dynamic_alt(const ns_power_inputs* in, double* watts) {
    return guard([&] {
        require(in, "inputs");
        require(watts, "watts");
        *watts = dynamic_power_eq3(to_cpp(*in));
    });
}

ns_status ns_power_write_json(const ns_power_report* r, const char* path) {
    return guard([&] {
        require(r, "report");
        require(path, "path");
        write_file(path, [&](std::ostream& os) { write_power_json(to_cpp(*r), os); });
    });
}

ns_status ns_power_duty_sweep_csv(const ns_power_inputs* in, const double* duties, size_t n, const char* path) {
    return guard([&] {
        require(in, "inputs");
        require(path, "path");
        if (n > 0) require(duties, "duties");
        const auto rows = duty_sweep(to_cpp(*in), std::vector<double>(duties, duties + n));
        write_file(path, [&](std::ostream& os) { write_duty_sweep_csv(rows, os); });
    });
}

ns_status ns_breakeven_duty(int n_core, int n_switch, double* out) {
    return guard([&] {
        require(out, "out");
        *out = breakeven_duty(n_core, n_switch);
    });
}

void ns_fig4_config_default(ns_fig4_config* c) {
    if (!c) return;
    const Fig4Config d;
    *c = {"fs",        d.drive,  d.time_scale,    d.neuron_dt_ms, d.duration,     d.pulse_width,
          d.duty,      d.vin_diff, d.v_high,      d.v_low,        d.sw.ron,       d.sw.roff,
          d.sw.vt,     d.amp.vdd, d.amp.vss,      d.amp.vcm,      d.amp.target_gain, d.amp.i_bias};
}

ns_status ns_fig4_run(const ns_fig4_config* c, ns_fig4** out) {
    return guard([&] {
        require(c, "config");
        require(out, "out");
        Fig4Config cfg;
        if (c->preset) {
            const auto cls = parse_pattern_class(c->preset);
            if (!cls) throw InvalidArgument(std::string("'") + c->preset + "' is not a preset");
            cfg.preset = *cls;
        }
        cfg.drive = c->drive;
        cfg.time_scale = c->time_scale;
        cfg.neuron_dt_ms = c->neuron_dt_ms;
        cfg.duration = c->duration;
        cfg.pulse_width = c->pulse_width;
        cfg.duty = c->duty;
        cfg.vin_diff = c->vin_diff;
        cfg.v_high = c->v_high;
        cfg.v_low = c->v_low;
        cfg.sw = {c->ron, c->roff, c->switch_vt};
        cfg.amp.vdd = c->vdd;
        cfg.amp.vss = c->vss;
        cfg.amp.vcm = c->vcm;
        cfg.amp.target_gain = c->target_gain;
        cfg.amp.i_bias = c->i_bias;
        auto holder = std::make_unique<ns_fig4>();
        holder->cfg = cfg;
        holder->r = run_fig4(cfg);
        *out = holder.release();
    });
}

void ns_fig4_free(ns_fig4* r) { delete r; }

ns_status ns_fig4_summarize(const ns_fig4* f, ns_fig4_summary* out) {
    return guard([&] {
        require(f, "result");
        require(out, "out");
        const Fig4Result& r = f->r;
        *out = {r.train.spike_times.size(), r.median_isi,       r.pulse_width,    r.dt,
                r.design.gain,              r.commanded_duty,   r.output_on_fraction, r.peak_on_min,
                r.peak_on_max,              r.peak_off,         r.measured_on,    r.measured_avg,
                r.measured_savings,         r.rec.on_ratio,     r.rec.avg_ratio,  r.rec.duty_inferred};
    });
}

ns_status ns_fig4_write_artifacts(const ns_fig4* f, const char* outdir) {
    return guard([&] {
        require(f, "result");
        require(outdir, "outdir");
        const std::filesystem::path dir(outdir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
        write_file(dir / "waveforms.csv", [&](std::ostream& os) { write_waveforms_csv(f->r.waves, os); });
        write_file(dir / "power.json", [&](std::ostream& os) { write_power_json(f->r.analytic, os); });
        write_file(dir / "spikes.json", [&](std::ostream& os) { write_spike_json(f->r.train, os); });
        write_file(dir / "amplifier.cir", [&](std::ostream& os) { os << serialize_netlist(f->r.netlist); });
        write_file(dir / "scenario.json", [&](std::ostream& os) { write_fig4_manifest(f->cfg, f->r, os); });
    });
}

ns_status ns_power_experiment_run(const ns_power_inputs* in, const double* duties, size_t n, double vin_diff,
                                  int jobs, ns_power_experiment** out) {
    return guard([&] {
        require(in, "inputs");
        require(out, "out");
        if (n > 0) require(duties, "duties");
        PowerExperimentConfig cfg;
        cfg.inputs = to_cpp(*in);
        cfg.vin_diff = vin_diff;
        *out = new ns_power_experiment{run_power_experiment(cfg, std::vector<double>(duties, duties + n), jobs)};
    });
}

void ns_power_experiment_free(ns_power_experiment* e) { delete e; }

size_t ns_power_experiment_rows(const ns_power_experiment* e) { return e ? e->e.rows.size() : 0; }

ns_status ns_power_experiment_row_at(const ns_power_experiment* e, size_t i, ns_power_experiment_row* out) {
    return guard([&] {
        require(e, "experiment");
        require(out, "out");
        if (i >= e->e.rows.size()) throw InvalidArgument("row index out of range");
        const auto& r = e->e.rows[i];
        *out = {r.duty, r.analytic_p_avg, r.analytic_savings, r.measured_p_avg, r.measured_savings,
                r.output_on_fraction};
    });
}

double ns_power_experiment_always_on(const ns_power_experiment* e) { return e ? e->e.measured_always_on : 0.0; }

ns_status ns_power_experiment_write_csv(const ns_power_experiment* e, const char* path) {
    return guard([&] {
        require(e, "experiment");
        require(path, "path");
        write_file(path, [&](std::ostream& os) { write_power_experiment_csv(e->e, os); });
    });
}

}  // extern "C"
