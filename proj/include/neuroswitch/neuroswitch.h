#ifndef NEUROSWITCH_H
#define NEUROSWITCH_H

/* C interface to the neuroswitch simulator.
 *
 * Every fallible call returns an ns_status; on failure ns_last_error() holds a
 * message for the calling thread until its next failing call. Objects are
 * opaque handles released with their matching *_free function. Strings
 * returned through char** are released with ns_string_free.
 */

#include <stddef.h>

#if defined(_WIN32)
#define NS_API __declspec(dllexport)
#else
#define NS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ns_status {
    NS_OK = 0,
    NS_ERR_PARSE = 1,
    NS_ERR_NUMERIC = 2,
    NS_ERR_IO = 3,
    NS_ERR_INVALID_ARGUMENT = 4,
    NS_ERR_INTERNAL = 5
} ns_status;

NS_API const char* ns_version(void);
NS_API const char* ns_last_error(void);
NS_API void ns_string_free(char* s);

/* Number with an optional engineering suffix (f p n u m k meg g). */
NS_API ns_status ns_parse_value(const char* text, double* out);

/* Netlists */

typedef struct ns_netlist ns_netlist;

NS_API ns_status ns_netlist_parse(const char* text, ns_netlist** out);
/* NS_ERR_IO when the file cannot be read. */
NS_API ns_status ns_netlist_parse_file(const char* path, ns_netlist** out);
NS_API void ns_netlist_free(ns_netlist* n);
NS_API ns_status ns_netlist_serialize(const ns_netlist* n, char** out);
/* Validation findings, one "line N: code: message" per line; empty when clean. */
NS_API ns_status ns_netlist_diagnostics(const ns_netlist* n, char** out);
NS_API size_t ns_netlist_element_count(const ns_netlist* n);
NS_API size_t ns_netlist_node_count(const ns_netlist* n);
/* Last .tran directive; *found is 0 when there is none. */
NS_API ns_status ns_netlist_tran(const ns_netlist* n, int* found, double* step, double* stop);

/* Simulation */

typedef enum ns_method { NS_METHOD_BE = 0, NS_METHOD_TRAP = 1 } ns_method;

typedef struct ns_sim_options {
    ns_method method;
    double dt;
    double tstop;
    double reltol;
    double vabstol;
    double iabstol;
    int max_nr_iters;
    double gmin;
} ns_sim_options;

NS_API void ns_sim_options_default(ns_sim_options* o);

typedef struct ns_waveforms ns_waveforms;

/* NS_ERR_NUMERIC on non-convergence; the message names the failing time. */
NS_API ns_status ns_transient(const ns_netlist* n, const ns_sim_options* o, ns_waveforms** out);
NS_API void ns_waveforms_free(ns_waveforms* w);
NS_API size_t ns_waveforms_rows(const ns_waveforms* w);
/* Copies min(rows, cap) samples of a node voltage column. */
NS_API ns_status ns_waveforms_node(const ns_waveforms* w, const char* node, double* out, size_t cap);
NS_API ns_status ns_waveforms_times(const ns_waveforms* w, double* out, size_t cap);
NS_API ns_status ns_waveforms_write_csv(const ns_waveforms* w, const char* path);
/* Average power delivered by a voltage source over the whole run. */
NS_API ns_status ns_waveforms_source_power(const ns_waveforms* w, const char* source, double* watts);

/* Node voltage at the DC operating point. */
NS_API ns_status ns_dc_node_voltage(const ns_netlist* n, const ns_sim_options* o, const char* node, double* v);

/* Neuron */

typedef struct ns_neuron_params {
    double a, b, c, d;
    double v_peak;
    double time_scale;
} ns_neuron_params;

/* Keys rs, ib, ch, fs, lts, tc, rz; NS_ERR_INVALID_ARGUMENT otherwise. */
NS_API ns_status ns_neuron_preset(const char* key, ns_neuron_params* out);

typedef struct ns_neuron_run ns_neuron_run;

NS_API ns_status ns_neuron_simulate(const ns_neuron_params* p, double current, double duration_ms, double dt_ms,
                                    ns_neuron_run** out);
NS_API void ns_neuron_free(ns_neuron_run* r);
NS_API size_t ns_neuron_spike_count(const ns_neuron_run* r);
NS_API ns_status ns_neuron_spike_times(const ns_neuron_run* r, double* out, size_t cap);
/* Label text is static: Tonic, Bursting, Chattering, InitialBurstThenTonic,
 * Silent or SilentOrInsufficient. */
NS_API ns_status ns_neuron_classify(const ns_neuron_run* r, double skip, const char** label);
NS_API ns_status ns_neuron_write_trace_csv(const ns_neuron_run* r, const char* path);
NS_API ns_status ns_neuron_write_spikes_json(const ns_neuron_run* r, const char* path);

/* Power model */

typedef struct ns_power_inputs {
    double eps;
    double area;
    double tox;
    double f;
    double vdd;
    double vss;
    double i_bias;
    int n_core;
    int n_switch;
    double duty;
} ns_power_inputs;

typedef struct ns_power_report {
    double c_device;
    double c_eff;
    double p_dynamic_device;
    double p_static_device;
    double p_static_circuit;
    double p_total_unswitched;
    double p_total_switched_on;
    double p_total_switched_off;
    double p_average_switched;
    double savings_fraction;
} ns_power_report;

NS_API void ns_power_inputs_default(ns_power_inputs* in);
/* NS_ERR_INVALID_ARGUMENT names the offending field. */
NS_API ns_status ns_power_analyze(const ns_power_inputs* in, ns_power_report* out);
NS_API ns_status ns_power_dynamic_alt(const ns_power_inputs* in, double* watts);
NS_API ns_status ns_power_write_json(const ns_power_report* r, const char* path);
NS_API ns_status ns_power_duty_sweep_csv(const ns_power_inputs* in, const double* duties, size_t n, const char* path);
NS_API ns_status ns_breakeven_duty(int n_core, int n_switch, double* out);

/* Neuron-gated amplifier run */

typedef struct ns_fig4_config {
    const char* preset;
    double drive;
    double time_scale;
    double neuron_dt_ms;
    double duration;    /* s */
    double pulse_width; /* s; 0 picks duty * median ISI */
    double duty;
    double vin_diff;    /* V */
    double v_high;
    double v_low;
    double ron;
    double roff;
    double switch_vt;
    double vdd;
    double vss;
    double vcm;
    double target_gain;
    double i_bias;
} ns_fig4_config;

typedef struct ns_fig4_summary {
    size_t spikes;
    double median_isi;
    double pulse_width;
    double dt;
    double gain;
    double commanded_duty;
    double output_on_fraction;
    double peak_on_min;
    double peak_on_max;
    double peak_off;
    double measured_on;
    double measured_avg;
    double measured_savings;
    double on_ratio;
    double avg_ratio;
    double duty_inferred;
} ns_fig4_summary;

typedef struct ns_fig4 ns_fig4;

NS_API void ns_fig4_config_default(ns_fig4_config* c);
NS_API ns_status ns_fig4_run(const ns_fig4_config* c, ns_fig4** out);
NS_API void ns_fig4_free(ns_fig4* r);
NS_API ns_status ns_fig4_summarize(const ns_fig4* r, ns_fig4_summary* out);
/* Writes waveforms.csv, power.json, spikes.json, amplifier.cir and scenario.json. */
NS_API ns_status ns_fig4_write_artifacts(const ns_fig4* r, const char* outdir);

/* Duty-cycle power experiment */

typedef struct ns_power_experiment ns_power_experiment;

typedef struct ns_power_experiment_row {
    double duty;
    double analytic_p_avg;
    double analytic_savings;
    double measured_p_avg;
    double measured_savings;
    double output_on_fraction;
} ns_power_experiment_row;

/* Pulse control at period 1/in->f for each duty, on up to `jobs` threads.
 * Rows keep the order of `duties`. */
NS_API ns_status ns_power_experiment_run(const ns_power_inputs* in, const double* duties, size_t n, double vin_diff,
                                         int jobs, ns_power_experiment** out);
NS_API void ns_power_experiment_free(ns_power_experiment* e);
NS_API size_t ns_power_experiment_rows(const ns_power_experiment* e);
NS_API ns_status ns_power_experiment_row_at(const ns_power_experiment* e, size_t i, ns_power_experiment_row* out);
NS_API double ns_power_experiment_always_on(const ns_power_experiment* e);
NS_API ns_status ns_power_experiment_write_csv(const ns_power_experiment* e, const char* path);

#ifdef __cplusplus
}
#endif

#endif
