#pragma once

// Behavioral Izhikevich neuron, firing-pattern classifier, and the bridge from
// spike trains to switch-control waveforms.

#include <iosfwd>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "neuroswitch/netlist.hpp"

namespace neuroswitch {

/// Cortical cell classes with canonical parameter sets.
enum class PatternClass { RS, IB, CH, FS, LTS, TC, RZ };

/// Coarse firing labels produced by classify_pattern.
enum class FiringLabel { Tonic, Bursting, Chattering, InitialBurstThenTonic, Silent, SilentOrInsufficient };

struct IzhParams {
    double a = 0.02;            // recovery time scale, 1/ms
    double b = 0.2;             // recovery sensitivity
    double c = -65.0;           // reset voltage, mV
    double d = 8.0;             // reset increment of u
    double v_peak = 30.0;       // spike cutoff, mV
    double time_scale = 1e-6;   // seconds per model millisecond
};

struct NeuronState {
    double v = 0.0;
    double u = 0.0;
    bool operator==(const NeuronState&) const = default;
};

struct IzhStep {
    NeuronState state;    // post-reset on a spike
    bool spiked = false;
    double recorded_v = 0.0;  // v of this sample, clamped to v_peak on a spike
};

/// Spike times in seconds.
struct SpikeTrain {
    std::vector<double> spike_times;
    double duration = 0.0;
    bool operator==(const SpikeTrain&) const = default;
};

struct TracePoint {
    double t_ms = 0.0;
    double v = 0.0;
    double u = 0.0;
    bool spiked = false;
};

struct NeuronRun {
    IzhParams params;
    std::vector<TracePoint> trace;
    SpikeTrain train;
};

/// Throws InvalidArgument unless a > 0, v_peak > c and time_scale > 0.
void check_params(const IzhParams& p);

/// One forward-Euler step of
///   dv/dt = 0.04 v^2 + 5 v + 140 - u + I,  du/dt = a (b v - u)
/// followed by the reset v <- c, u <- u + d when v >= v_peak.
/// dt is in model milliseconds and must lie in (0, 0.5].
IzhStep izh_step(const NeuronState& s, const IzhParams& p, double input, double dt);

/// Integrates from (c, b*c) unless an initial state is given. The drive is sampled
/// in model milliseconds at the start of each step.
NeuronRun run_neuron(const IzhParams& p, const Waveform& drive, double duration_ms, double dt_ms,
                     std::optional<NeuronState> initial = std::nullopt);

/// Stable subthreshold equilibrium for a constant input, if one exists.
std::optional<NeuronState> resting_state(const IzhParams& p, double input);

IzhParams preset(PatternClass cls);

/// Preset by key (rs, ib, ch, fs, lts, tc, rz; case-insensitive). Coarse labels
/// such as "tonic" are rejected with InvalidArgument.
IzhParams preset(std::string_view key);
std::optional<PatternClass> parse_pattern_class(std::string_view key);
std::string_view to_string(PatternClass cls);

/// Classifies the train by its inter-spike intervals (ISIs).
///
/// An ISI shorter than half the mean ISI joins its two spikes into a burst;
/// runs of such ISIs form one burst. Without bursts the train is Tonic when
/// the ISI coefficient of variation after the leading `analysis_window_skip`
/// fraction of the duration is below 0.15. Three or more bursts whose gaps
/// all exceed twice the median intra-burst ISI are Chattering. A single
/// leading burst followed by a Tonic remainder is InitialBurstThenTonic.
/// Anything else is Bursting. Fewer than three spikes cannot be classified.
FiringLabel classify_pattern(const SpikeTrain& train, double analysis_window_skip = 0.1);
std::string_view to_string(FiringLabel label);

/// PWL control at v_low, raised to v_high over [t_spike, t_spike + pulse_width]
/// with 1 ns edges outside that interval. Pulses closer than two edge widths
/// merge. An empty train gives a constant v_low.
Waveform spikes_to_control(const SpikeTrain& train, double pulse_width, double v_high, double v_low);

/// Edge width used by spikes_to_control.
inline constexpr double kControlEdge = 1e-9;

/// The merged [start, end] plateaus of spikes_to_control, in seconds.
std::vector<std::pair<double, double>> control_intervals(const SpikeTrain& train, double pulse_width);

/// t_model_ms,t_seconds,v_mV,u,spiked
void write_trace_csv(const NeuronRun& run, std::ostream& os);

/// {"duration_s": ..., "spike_times_s": [...]}
void write_spike_json(const SpikeTrain& train, std::ostream& os);

}  // namespace neuroswitch
