#pragma once

// Analytic power model of a duty-cycled (power-gated) circuit and its
// reconciliation against simulated supply power.
//
// Per-device dynamic power is f * C * (Vdd + Vss)^2 with C = 2*eps*A/(3*tox)
// and no 1/2 factor. Static power assumes every device carries the full bias
// current across the full rail-to-rail swing. The OFF state draws nothing.

#include <iosfwd>
#include <vector>

namespace neuroswitch {

struct PowerModelInputs {
    double eps = 3.45e-11;  // F/m
    double area = 1e-12;    // m^2 per transistor
    double tox = 7.5e-9;    // m
    double f = 1e7;         // Hz
    double vdd = 1.65;      // V
    double vss = 1.65;      // V, magnitude; the swing is vdd + vss
    double i_bias = 1e-5;   // A
    int n_core = 6;
    int n_switch = 4;       // two transmission gates of two transistors
    double duty = 0.01;
};

struct PowerReport {
    double c_device = 0.0;
    double c_eff = 0.0;
    double p_dynamic_device = 0.0;
    double p_static_device = 0.0;
    double p_static_circuit = 0.0;
    double p_total_unswitched = 0.0;
    double p_total_switched_on = 0.0;
    double p_total_switched_off = 0.0;
    double p_average_switched = 0.0;
    double savings_fraction = 0.0;
};

/// Throws InvalidArgument naming the first offending field.
void check_inputs(const PowerModelInputs& in);

PowerReport analytic_power(const PowerModelInputs& in);

/// The standalone dynamic-power expression f * (eps*A/tox) * (vdd+vss)^2. Its
/// coefficient matches neither the per-device capacitance nor c_eff; it is
/// kept for comparison and is not used by analytic_power.
double dynamic_power_eq3(const PowerModelInputs& in);

/// Duty below which gating saves power: n_core / (n_core + n_switch).
double breakeven_duty(int n_core, int n_switch);

struct DutyRow {
    double duty = 0.0;
    double p_average_switched = 0.0;
    double savings_fraction = 0.0;
};

std::vector<DutyRow> duty_sweep(const PowerModelInputs& in, const std::vector<double>& duties);

struct Reconciliation {
    double on_ratio = 0.0;       // measured_on / p_total_switched_on
    double avg_ratio = 0.0;      // measured_avg / p_average_switched
    double duty_inferred = 0.0;  // measured_avg / measured_on
};

/// Throws InvalidArgument when measured_on is not positive (no ON window captured).
Reconciliation reconcile(const PowerReport& report, double measured_on, double measured_avg);

void write_power_json(const PowerReport& r, std::ostream& os);

/// duty,p_avg_w,savings
void write_duty_sweep_csv(const std::vector<DutyRow>& rows, std::ostream& os);

}  // namespace neuroswitch
