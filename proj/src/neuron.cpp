#include "neuroswitch/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "neuroswitch/devices.hpp"

namespace neuroswitch {

namespace {

struct PresetRow {
    PatternClass cls;
    std::string_view key;
    double a, b, c, d;
};

constexpr PresetRow kPresets[] = {
    {PatternClass::RS, "rs", 0.02, 0.2, -65.0, 8.0},    {PatternClass::IB, "ib", 0.02, 0.2, -55.0, 4.0},
    {PatternClass::CH, "ch", 0.02, 0.2, -50.0, 2.0},    {PatternClass::FS, "fs", 0.1, 0.2, -65.0, 2.0},
    {PatternClass::LTS, "lts", 0.02, 0.25, -65.0, 2.0}, {PatternClass::TC, "tc", 0.02, 0.25, -65.0, 0.05},
    {PatternClass::RZ, "rz", 0.1, 0.26, -65.0, 2.0},
};

double mean(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double coefficient_of_variation(const std::vector<double>& xs) {
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size())) / m;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

constexpr double kBurstFactor = 0.5;
constexpr double kTonicCv = 0.15;
constexpr double kChatterGapFactor = 2.0;

}  // namespace

void check_params(const IzhParams& p) {
    if (!(p.a > 0) || !(p.v_peak > p.c) || !(p.time_scale > 0)) {
        throw InvalidArgument("neuron parameters require a > 0, v_peak > c and time_scale > 0");
    }
}

IzhStep izh_step(const NeuronState& s, const IzhParams& p, double input, double dt) {
    if (!(dt > 0.0) || dt > 0.5) throw InvalidArgument("neuron step dt must lie in (0, 0.5] model-ms");
    const double dv = 0.04 * s.v * s.v + 5.0 * s.v + 140.0 - s.u + input;
    const double du = p.a * (p.b * s.v - s.u);
    IzhStep out;
    out.state = {s.v + dt * dv, s.u + dt * du};
    out.recorded_v = out.state.v;
    if (out.state.v >= p.v_peak) {
        out.spiked = true;
        out.recorded_v = p.v_peak;
        out.state = {p.c, out.state.u + p.d};
    }
    return out;
}

NeuronRun run_neuron(const IzhParams& p, const Waveform& drive, double duration_ms, double dt_ms,
                     std::optional<NeuronState> initial) {
    check_params(p);
    if (!(duration_ms > 0)) throw InvalidArgument("neuron duration must be > 0");
    if (!(dt_ms > 0.0) || dt_ms > 0.5) throw InvalidArgument("neuron step dt must lie in (0, 0.5] model-ms");

    NeuronRun run;
    run.params = p;
    NeuronState s = initial.value_or(NeuronState{p.c, p.b * p.c});
    const auto steps = static_cast<std::size_t>(std::llround(duration_ms / dt_ms));
    run.trace.reserve(steps + 1);
    run.trace.push_back({0.0, s.v, s.u, false});
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = static_cast<double>(k) * dt_ms;
        const double t1 = static_cast<double>(k + 1) * dt_ms;
        const IzhStep step = izh_step(s, p, source_value(drive, t0), dt_ms);
        s = step.state;
        run.trace.push_back({t1, step.recorded_v, s.u, step.spiked});
        if (step.spiked) run.train.spike_times.push_back(t1 * p.time_scale);
    }
    run.train.duration = static_cast<double>(steps) * dt_ms * p.time_scale;
    return run;
}

std::optional<NeuronState> resting_state(const IzhParams& p, double input) {
    // 0.04 v^2 + (5 - b) v + 140 + I = 0 with u = b v
    const double qa = 0.04, qb = 5.0 - p.b, qc = 140.0 + input;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0) return std::nullopt;
    const double v = (-qb - std::sqrt(disc)) / (2.0 * qa);
    return NeuronState{v, p.b * v};
}

IzhParams preset(PatternClass cls) {
    for (const auto& row : kPresets) {
        if (row.cls == cls) return IzhParams{row.a, row.b, row.c, row.d};
    }
    throw InvalidArgument("unknown pattern class");
}

std::optional<PatternClass> parse_pattern_class(std::string_view key) {
    const std::string k = to_lower(key);
    for (const auto& row : kPresets) {
        if (row.key == k) return row.cls;
    }
    return std::nullopt;
}

IzhParams preset(std::string_view key) {
    if (auto cls = parse_pattern_class(key)) return preset(*cls);
    throw InvalidArgument("'" + std::string(key) + "' is not a preset (expected rs, ib, ch, fs, lts, tc or rz)");
}

std::string_view to_string(PatternClass cls) {
    for (const auto& row : kPresets) {
        if (row.cls == cls) return row.key;
    }
    return "?";
}

std::string_view to_string(FiringLabel label) {
    switch (label) {
    case FiringLabel::Tonic: return "Tonic";
    case FiringLabel::Bursting: return "Bursting";
    case FiringLabel::Chattering: return "Chattering";
    case FiringLabel::InitialBurstThenTonic: return "InitialBurstThenTonic";
    case FiringLabel::Silent: return "Silent";
    case FiringLabel::SilentOrInsufficient: return "SilentOrInsufficient";
    }
    return "?";
}

FiringLabel classify_pattern(const SpikeTrain& train, double analysis_window_skip) {
    if (!(train.duration > 0)) throw InvalidArgument("spike train duration must be > 0");
    const auto& t = train.spike_times;
    if (t.empty()) return FiringLabel::Silent;
    if (t.size() < 3) return FiringLabel::SilentOrInsufficient;

    std::vector<double> isi(t.size() - 1);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) isi[i] = t[i + 1] - t[i];
    const double threshold = kBurstFactor * mean(isi);

    // Bursts as [first_spike, last_spike] index ranges.
    std::vector<std::pair<std::size_t, std::size_t>> bursts;
    std::vector<double> intra;
    for (std::size_t i = 0; i < isi.size(); ++i) {
        if (isi[i] >= threshold) continue;
        intra.push_back(isi[i]);
        if (!bursts.empty() && bursts.back().second == i) {
            bursts.back().second = i + 1;
        } else {
            bursts.emplace_back(i, i + 1);
        }
    }

    if (bursts.empty()) {
        const double t_skip = analysis_window_skip * train.duration;
        std::vector<double> late;
        for (std::size_t i = 0; i < isi.size(); ++i) {
            if (t[i] >= t_skip) late.push_back(isi[i]);
        }
        if (late.size() < 2) late = isi;
        return coefficient_of_variation(late) < kTonicCv ? FiringLabel::Tonic : FiringLabel::Bursting;
    }

    if (bursts.size() >= 3) {
        const double gap_min = kChatterGapFactor * median(intra);
        bool separated = true;
        for (std::size_t j = 0; j + 1 < bursts.size(); ++j) {
            if (!(t[bursts[j + 1].first] - t[bursts[j].second] > gap_min)) separated = false;
        }
        if (separated) return FiringLabel::Chattering;
    }

    if (bursts.size() == 1 && bursts[0].first == 0) {
        std::vector<double> rest(isi.begin() + static_cast<std::ptrdiff_t>(bursts[0].second), isi.end());
        if (rest.size() >= 2 && coefficient_of_variation(rest) < kTonicCv) {
            return FiringLabel::InitialBurstThenTonic;
        }
    }
    return FiringLabel::Bursting;
}

std::vector<std::pair<double, double>> control_intervals(const SpikeTrain& train, double pulse_width) {
    if (!(pulse_width > 0)) throw InvalidArgument("pulse width must be > 0");
    std::vector<std::pair<double, double>> on;
    for (double ts : train.spike_times) {
        const double te = ts + pulse_width;
        if (!on.empty() && ts - kControlEdge <= on.back().second + kControlEdge) {
            on.back().second = std::max(on.back().second, te);
        } else {
            on.emplace_back(ts, te);
        }
    }
    return on;
}

Waveform spikes_to_control(const SpikeTrain& train, double pulse_width, double v_high, double v_low) {
    const auto on = control_intervals(train, pulse_width);
    if (on.empty()) return DcWave{v_low};

    PwlWave w;
    for (const auto& [start, end] : on) {
        const double rise = start - kControlEdge;
        if (rise > 0.0) {
            if (w.points.empty()) w.points.emplace_back(0.0, v_low);
            w.points.emplace_back(rise, v_low);
        } else if (w.points.empty() && start > 0.0) {
            w.points.emplace_back(0.0, v_low + (v_high - v_low) * (1.0 - start / kControlEdge));
        }
        w.points.emplace_back(start, v_high);
        w.points.emplace_back(end, v_high);
        w.points.emplace_back(end + kControlEdge, v_low);
    }
    return w;
}

void write_trace_csv(const NeuronRun& run, std::ostream& os) {
    os << "t_model_ms,t_seconds,v_mV,u,spiked\n";
    char buf[160];
    for (const auto& p : run.trace) {
        std::snprintf(buf, sizeof(buf), "%.8e,%.8e,%.8e,%.8e,%d\n", p.t_ms, p.t_ms * run.params.time_scale, p.v,
                      p.u, p.spiked ? 1 : 0);
        os << buf;
    }
}

void write_spike_json(const SpikeTrain& train, std::ostream& os) {
    nlohmann::ordered_json j;
    j["duration_s"] = train.duration;
    j["spike_times_s"] = train.spike_times;
    os << j.dump(2) << '\n';
}

}  // namespace neuroswitch
