#pragma once

// Builders for the switched differential amplifier and the experiments run on it:
// neuron-gated amplification and the duty-cycle power sweep.

#include <iosfwd>
#include <string>
#include <vector>

#include "neuroswitch/engine.hpp"
#include "neuroswitch/neuron.hpp"
#include "neuroswitch/power.hpp"

namespace neuroswitch {

class GainUnachievable : public Error {
public:
    using Error::Error;
};

/// Five-transistor differential stage plus a diode-connected bias reference:
/// PMOS pair M3/M4 with tail M5, bias diode M6 and resistor RB, NMOS mirror
/// load M1/M2. S1 connects vdd to vddi, S2 connects vssi to vss.
struct AmpSpec {
    double vdd = 3.3;
    double vss = -3.3;
    double vcm = 1.65;  // input common mode
    double target_gain = 1000.0;
    double i_bias = 10e-6;  // tail current
    DeviceModel nmos_mirror{"nmir", Polarity::NMOS, 0.5, 100e-6, 0.01};
    DeviceModel pmos_mirror{"pmir", Polarity::PMOS, 0.5, 40e-6, 0.01};
    DeviceModel pmos_gain{"pgain", Polarity::PMOS, 0.5, 40e-6, 0.002};
    double length = 1e-6;       // channel length of every device
    double tail_wl = 10.0;      // M5
    double reference_ratio = 5.0;  // M6 width over M5 width; the reference carries this multiple of i_bias
    /// Candidate pair W/L values; empty means a log grid from 0.1 to 1000.
    std::vector<double> pair_wl_grid;
};

/// Throws InvalidArgument on a malformed spec.
void check_spec(const AmpSpec& spec);

struct GateSpec {
    Waveform control = DcWave{3.3};
    SwitchParams sw{100.0, 1e15, 1.65};
};

/// Sizes solved by design_amplifier.
struct AmpDesign {
    double pair_wl = 0.0;
    double load_wl = 0.0;
    double r_bias = 0.0;
    double gain = 0.0;         // two-point DC gain at 10 uV
    double vout_offset = 0.0;  // vout at zero input, switches on
    double tail_current = 0.0;
};

/// Picks the grid pair size whose measured gain is closest to target_gain and
/// sizes the load for zero output offset. Throws GainUnachievable when the best
/// grid point misses the target by more than 20%.
AmpDesign design_amplifier(const AmpSpec& spec);

/// Netlist for a solved design. V1/V2 drive v1/v2 with vcm +/- vin_diff/2.
Netlist build_switched_amp(const AmpSpec& spec, const AmpDesign& design, const GateSpec& gate,
                           const Waveform& vin_diff);
Netlist build_switched_amp(const AmpSpec& spec, const GateSpec& gate, const Waveform& vin_diff);

/// Names of the rail sources whose power is measured.
inline const std::vector<std::string> kRailSources{"VDD", "VSS"};

/// Supply power of the amplifier with switches closed, from its operating point.
double always_on_power(const AmpSpec& spec, const AmpDesign& design, double vin_diff);

struct Fig4Config {
    AmpSpec amp;
    PatternClass preset = PatternClass::FS;
    double drive = 10.0;        // constant neuron input
    double time_scale = 1e-6;   // seconds per model millisecond
    double neuron_dt_ms = 0.1;
    double duration = 50e-6;    // s
    double pulse_width = 0.0;   // s; 0 picks duty * median ISI
    double duty = 0.01;
    double vin_diff = 2e-3;     // V
    double v_high = 3.3;
    double v_low = 0.0;
    SwitchParams sw{100.0, 1e15, 1.65};
};

struct Fig4Result {
    SpikeTrain train;
    AmpDesign design;
    Netlist netlist;
    Waveforms waves;
    double pulse_width = 0.0;
    double dt = 0.0;
    double median_isi = 0.0;
    double commanded_duty = 0.0;   // merged ON time / duration
    double output_on_fraction = 0.0;  // samples with |vout| > 1 V
    double peak_on_min = 0.0;      // smallest per-pulse peak |vout|
    double peak_on_max = 0.0;
    double peak_off = 0.0;         // largest |vout| with the control fully low
    double measured_on = 0.0;      // W, interior of the first pulse
    double measured_avg = 0.0;     // W, whole run
    double measured_savings = 0.0;
    PowerReport analytic;
    Reconciliation rec;
};

/// Throws Error with scenario context when the neuron is silent or the engine fails.
Fig4Result run_fig4(const Fig4Config& cfg);

struct PowerExperimentRow {
    double duty = 0.0;
    double analytic_p_avg = 0.0;
    double analytic_savings = 0.0;
    double measured_p_avg = 0.0;
    double measured_savings = 0.0;
    double output_on_fraction = 0.0;
};

struct PowerExperiment {
    AmpDesign design;
    double measured_always_on = 0.0;
    std::vector<PowerExperimentRow> rows;  // input order
};

struct PowerExperimentConfig {
    AmpSpec amp;
    PowerModelInputs inputs;  // f sets the control period
    double vin_diff = 2e-3;
    int periods = 10;
    double v_high = 3.3;
    double v_low = 0.0;
    SwitchParams sw{100.0, 1e15, 1.65};
};

/// One transient per duty with a synthetic pulse control, run on up to `jobs` threads.
PowerExperiment run_power_experiment(const PowerExperimentConfig& cfg, const std::vector<double>& duties,
                                     int jobs = 1);

void write_fig4_manifest(const Fig4Config& cfg, const Fig4Result& r, std::ostream& os);
void write_power_experiment_csv(const PowerExperiment& e, std::ostream& os);

}  // namespace neuroswitch
