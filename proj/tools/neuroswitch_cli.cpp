// neuroswitch command-line front end. Links only the C API.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuroswitch/neuroswitch.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNumeric = 2, kIo = 3 };

int exit_code(ns_status s) {
    switch (s) {
    case NS_OK: return kOk;
    case NS_ERR_PARSE:
    case NS_ERR_INVALID_ARGUMENT: return kUsage;
    case NS_ERR_IO: return kIo;
    case NS_ERR_NUMERIC:
    case NS_ERR_INTERNAL: return kNumeric;
    }
    return kNumeric;
}

struct Failure {
    int code;
};

void check(ns_status s) {
    if (s == NS_OK) return;
    std::cerr << "error: " << ns_last_error() << '\n';
    throw Failure{exit_code(s)};
}

std::string sha256_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return "";
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        EVP_DigestUpdate(ctx, buf, static_cast<size_t>(is.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char h[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(h, sizeof(h), "%02x", md[i]);
        hex += h;
    }
    return hex;
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const fs::path& path, const std::string& command, const json& params,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["parameters"] = params;
    json& in = m["input_hashes"] = json::object();
    for (const auto& p : inputs) in[p] = sha256_file(p);
    json& out = m["output_hashes"] = json::object();
    for (const auto& p : outputs) out[p] = sha256_file(p);
    m["tool_version"] = ns_version();
    if (const char* seed = std::getenv("NEUROSWITCH_SEED")) m["seed"] = seed;
    m["timestamp"] = utc_now();
    std::ofstream os(path);
    os << m.dump(2) << '\n';
    if (!os) {
        std::cerr << "error: cannot write manifest '" << path.string() << "'\n";
        throw Failure{kIo};
    }
}

fs::path manifest_for(const std::string& output) { return fs::path(output + ".manifest.json"); }

// Rewrites values such as 10u or 2meg as plain numbers before conversion.
const CLI::Validator kEngineering(
    [](std::string& text) -> std::string {
        double v = 0.0;
        if (ns_parse_value(text.c_str(), &v) != NS_OK) return ns_last_error();
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        text = buf;
        return {};
    },
    "VALUE", "engineering");

struct PowerFlags {
    ns_power_inputs in{};
    std::vector<double> duties;
};

void add_power_flags(CLI::App* app, PowerFlags& pf) {
    ns_power_inputs_default(&pf.in);
    app->add_option("--eps", pf.in.eps, "oxide permittivity (F/m)")->transform(kEngineering)->capture_default_str();
    app->add_option("--area", pf.in.area, "gate area per transistor (m^2)")->transform(kEngineering)->capture_default_str();
    app->add_option("--tox", pf.in.tox, "oxide thickness (m)")->transform(kEngineering)->capture_default_str();
    app->add_option("--f", pf.in.f, "switching frequency (Hz)")->transform(kEngineering)->capture_default_str();
    app->add_option("--vdd", pf.in.vdd, "positive rail (V)")->transform(kEngineering)->capture_default_str();
    app->add_option("--vss", pf.in.vss, "negative rail magnitude (V)")->transform(kEngineering)->capture_default_str();
    app->add_option("--ibias", pf.in.i_bias, "bias current per device (A)")->transform(kEngineering)->capture_default_str();
    app->add_option("--ncore", pf.in.n_core, "transistors in the gated circuit")->capture_default_str();
    app->add_option("--nswitch", pf.in.n_switch, "switch transistors")->capture_default_str();
    app->add_option("--duty", pf.duties, "duty cycle(s), comma separated")->delimiter(',');
}

json power_params(const PowerFlags& pf) {
    return {{"eps", pf.in.eps},         {"area", pf.in.area},   {"tox", pf.in.tox},
            {"f", pf.in.f},             {"vdd", pf.in.vdd},     {"vss", pf.in.vss},
            {"ibias", pf.in.i_bias},    {"ncore", pf.in.n_core}, {"nswitch", pf.in.n_switch},
            {"duty", pf.duties}};
}

void print_row(const char* name, double v, const char* unit) { std::printf("%-22s %.6e %s\n", name, v, unit); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neuron-gated power-switching simulator"};
    app.set_config("--config", "", "key=value file mirroring the flags; flags take precedence");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ns_version()));

    // sim
    auto* sim = app.add_subcommand("sim", "transient simulation of a netlist");
    std::string sim_path, sim_out = "waveforms.csv", sim_method = "trap";
    double sim_tstop = 0.0, sim_dt = 0.0;
    sim->add_option("netlist", sim_path, "netlist file")->required();
    sim->add_option("--tstop", sim_tstop, "end time (s); defaults to the .tran stop")->transform(kEngineering);
    sim->add_option("--dt", sim_dt, "time step (s); defaults to the .tran step")->transform(kEngineering);
    sim->add_option("--method", sim_method, "integration method")
        ->check(CLI::IsMember({"be", "trap"}))
        ->capture_default_str();
    sim->add_option("--out", sim_out, "waveform CSV")->capture_default_str();

    // neuron
    auto* neuron = app.add_subcommand("neuron", "Izhikevich neuron run and firing-pattern label");
    std::string n_preset = "fs", n_out = "trace.csv", n_spikes = "spikes.json";
    double n_current = 10.0, n_duration = 1000.0, n_dt = 0.1, n_skip = 0.1;
    neuron->add_option("--preset", n_preset, "rs, ib, ch, fs, lts, tc or rz")->capture_default_str();
    neuron->add_option("--current", n_current, "constant input current")->capture_default_str();
    neuron->add_option("--duration", n_duration, "duration (model ms)")->capture_default_str();
    neuron->add_option("--dt", n_dt, "step (model ms)")->capture_default_str();
    neuron->add_option("--skip", n_skip, "leading fraction ignored by the tonic test")->capture_default_str();
    neuron->add_option("--out", n_out, "trace CSV")->capture_default_str();
    neuron->add_option("--spikes-out", n_spikes, "spike-train JSON")->capture_default_str();

    // ampdemo
    auto* amp = app.add_subcommand("ampdemo", "neuron-gated switched amplifier");
    ns_fig4_config fc{};
    ns_fig4_config_default(&fc);
    std::string a_preset = "fs", a_outdir = "ampdemo";
    double a_vin_mv = fc.vin_diff * 1e3;
    amp->add_option("--preset", a_preset, "neuron preset driving the switches")->capture_default_str();
    amp->add_option("--vin-mv", a_vin_mv, "differential input (mV)")->capture_default_str();
    amp->add_option("--pulse-width", fc.pulse_width, "ON pulse width (s); 0 = duty x median ISI")
        ->transform(kEngineering)
        ->capture_default_str();
    amp->add_option("--duty", fc.duty, "duty used when the pulse width is automatic")->capture_default_str();
    amp->add_option("--duration", fc.duration, "simulated time (s)")->transform(kEngineering)->capture_default_str();
    amp->add_option("--current", fc.drive, "neuron input current")->capture_default_str();
    amp->add_option("--outdir", a_outdir, "output directory")->capture_default_str();

    // power
    auto* power = app.add_subcommand("power", "analytic power model");
    PowerFlags pf;
    std::string p_json, p_csv;
    add_power_flags(power, pf);
    power->add_option("--json", p_json, "PowerReport JSON for the first duty");
    power->add_option("--csv", p_csv, "duty sweep CSV");

    // powerexp
    auto* pexp = app.add_subcommand("powerexp", "simulated duty sweep against the analytic model");
    PowerFlags ef;
    std::string e_out = "power_experiment.csv";
    double e_vin_mv = 2.0;
    int e_jobs = 1;
    add_power_flags(pexp, ef);
    pexp->add_option("--vin-mv", e_vin_mv, "differential input (mV)")->capture_default_str();
    pexp->add_option("--jobs", e_jobs, "concurrent simulations")->check(CLI::PositiveNumber)->capture_default_str();
    pexp->add_option("--out", e_out, "result CSV")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) {
            ns_netlist* n = nullptr;
            check(ns_netlist_parse_file(sim_path.c_str(), &n));
            std::unique_ptr<ns_netlist, decltype(&ns_netlist_free)> hold(n, ns_netlist_free);
            char* diags = nullptr;
            check(ns_netlist_diagnostics(n, &diags));
            if (*diags) std::cerr << diags;
            ns_string_free(diags);

            ns_sim_options o;
            ns_sim_options_default(&o);
            int has_tran = 0;
            double step = 0.0, stop = 0.0;
            check(ns_netlist_tran(n, &has_tran, &step, &stop));
            o.dt = sim_dt > 0 ? sim_dt : step;
            o.tstop = sim_tstop > 0 ? sim_tstop : stop;
            if (!(o.dt > 0) || !(o.tstop > 0)) {
                std::cerr << "error: give --tstop and --dt or a .tran directive\n";
                return kUsage;
            }
            o.method = sim_method == "be" ? NS_METHOD_BE : NS_METHOD_TRAP;
            ns_waveforms* w = nullptr;
            check(ns_transient(n, &o, &w));
            std::unique_ptr<ns_waveforms, decltype(&ns_waveforms_free)> wh(w, ns_waveforms_free);
            check(ns_waveforms_write_csv(w, sim_out.c_str()));
            write_manifest(manifest_for(sim_out), "sim",
                           {{"netlist", sim_path}, {"tstop", o.tstop}, {"dt", o.dt}, {"method", sim_method},
                            {"out", sim_out}},
                           {sim_path}, {sim_out});
            std::printf("%zu rows written to %s\n", ns_waveforms_rows(w), sim_out.c_str());
        } else if (*neuron) {
            ns_neuron_params p;
            check(ns_neuron_preset(n_preset.c_str(), &p));
            ns_neuron_run* r = nullptr;
            check(ns_neuron_simulate(&p, n_current, n_duration, n_dt, &r));
            std::unique_ptr<ns_neuron_run, decltype(&ns_neuron_free)> hold(r, ns_neuron_free);
            check(ns_neuron_write_trace_csv(r, n_out.c_str()));
            check(ns_neuron_write_spikes_json(r, n_spikes.c_str()));
            const char* label = nullptr;
            check(ns_neuron_classify(r, n_skip, &label));
            write_manifest(manifest_for(n_out), "neuron",
                           {{"preset", n_preset}, {"current", n_current}, {"duration", n_duration}, {"dt", n_dt},
                            {"skip", n_skip}, {"out", n_out}, {"spikes_out", n_spikes}},
                           {}, {n_out, n_spikes});
            std::printf("%s\n", label);
        } else if (*amp) {
            fc.preset = a_preset.c_str();
            fc.vin_diff = a_vin_mv * 1e-3;
            ns_fig4* r = nullptr;
            check(ns_fig4_run(&fc, &r));
            std::unique_ptr<ns_fig4, decltype(&ns_fig4_free)> hold(r, ns_fig4_free);
            check(ns_fig4_write_artifacts(r, a_outdir.c_str()));
            ns_fig4_summary s;
            check(ns_fig4_summarize(r, &s));
            const fs::path dir(a_outdir);
            std::vector<std::string> outs;
            for (const char* f : {"waveforms.csv", "power.json", "spikes.json", "amplifier.cir", "scenario.json"}) {
                outs.push_back((dir / f).string());
            }
            write_manifest(dir / "manifest.json", "ampdemo",
                           {{"preset", a_preset}, {"vin_mv", a_vin_mv}, {"pulse_width", fc.pulse_width},
                            {"duty", fc.duty}, {"duration", fc.duration}, {"current", fc.drive},
                            {"outdir", a_outdir}},
                           {}, outs);
            std::printf(
                "on_power_w=%.6e avg_power_w=%.6e savings=%.6f duty_inferred=%.6f peak_on_v=%.6f peak_off_v=%.6f "
                "gain=%.2f spikes=%zu\n",
                s.measured_on, s.measured_avg, s.measured_savings, s.duty_inferred, s.peak_on_max, s.peak_off, s.gain,
                s.spikes);
        } else if (*power) {
            if (pf.duties.empty()) pf.duties.push_back(pf.in.duty);
            std::vector<ns_power_report> reports;
            for (double d : pf.duties) {
                ns_power_inputs in = pf.in;
                in.duty = d;
                ns_power_report r;
                check(ns_power_analyze(&in, &r));
                reports.push_back(r);
            }
            const ns_power_report& r0 = reports.front();
            print_row("c_device", r0.c_device, "F");
            print_row("c_eff", r0.c_eff, "F");
            print_row("p_dynamic_device", r0.p_dynamic_device, "W");
            print_row("p_static_device", r0.p_static_device, "W");
            print_row("p_static_circuit", r0.p_static_circuit, "W");
            print_row("p_total_unswitched", r0.p_total_unswitched, "W");
            print_row("p_total_switched_on", r0.p_total_switched_on, "W");
            print_row("p_total_switched_off", r0.p_total_switched_off, "W");
            std::printf("%-12s %-22s %s\n", "duty", "p_average_switched_w", "savings_fraction");
            for (std::size_t i = 0; i < reports.size(); ++i) {
                std::printf("%-12g %-22.6e %.6f\n", pf.duties[i], reports[i].p_average_switched,
                            reports[i].savings_fraction);
            }
            std::vector<std::string> outs;
            if (!p_json.empty()) {
                check(ns_power_write_json(&r0, p_json.c_str()));
                outs.push_back(p_json);
            }
            if (!p_csv.empty()) {
                check(ns_power_duty_sweep_csv(&pf.in, pf.duties.data(), pf.duties.size(), p_csv.c_str()));
                outs.push_back(p_csv);
            }
            if (!outs.empty()) write_manifest(manifest_for(outs.front()), "power", power_params(pf), {}, outs);
        } else if (*pexp) {
            if (ef.duties.empty()) ef.duties = {0.01, 0.1, 0.5, 1.0};
            ns_power_experiment* e = nullptr;
            check(ns_power_experiment_run(&ef.in, ef.duties.data(), ef.duties.size(), e_vin_mv * 1e-3, e_jobs, &e));
            std::unique_ptr<ns_power_experiment, decltype(&ns_power_experiment_free)> hold(e,
                                                                                            ns_power_experiment_free);
            check(ns_power_experiment_write_csv(e, e_out.c_str()));
            json params = power_params(ef);
            params["vin_mv"] = e_vin_mv;
            params["jobs"] = e_jobs;
            params["out"] = e_out;
            write_manifest(manifest_for(e_out), "powerexp", params, {}, {e_out});
            std::printf("always_on_w=%.6e\n", ns_power_experiment_always_on(e));
            std::printf("%-8s %-16s %-16s %-16s %s\n", "duty", "analytic_sav", "measured_sav", "measured_avg_w",
                        "on_fraction");
            for (std::size_t i = 0; i < ns_power_experiment_rows(e); ++i) {
                ns_power_experiment_row row;
                check(ns_power_experiment_row_at(e, i, &row));
                std::printf("%-8g %-16.6f %-16.6f %-16.6e %.6f\n", row.duty, row.analytic_savings,
                            row.measured_savings, row.measured_p_avg, row.output_on_fraction);
            }
        }
    } catch (const Failure& f) {
        return f.code;
    }
    return kOk;
}
