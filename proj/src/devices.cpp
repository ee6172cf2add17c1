#include "neuroswitch/devices.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace neuroswitch {

namespace {

// Forward-mode NMOS evaluation, vds >= 0.
MosfetEval square_law(double k, double vt, double lambda, double vgs, double vds) {
    MosfetEval r;
    const double vov = vgs - vt;
    if (vov <= 0.0) return r;
    const double clm = 1.0 + lambda * vds;
    if (vds < vov) {
        const double core = vov * vds - 0.5 * vds * vds;
        r.region = MosRegion::Triode;
        r.id = k * core * clm;
        r.gm = k * vds * clm;
        r.gds = k * (vov - vds) * clm + k * core * lambda;
    } else {
        r.region = MosRegion::Saturation;
        r.id = 0.5 * k * vov * vov * clm;
        r.gm = k * vov * clm;
        r.gds = 0.5 * k * vov * vov * lambda;
    }
    return r;
}

}  // namespace

MosfetEval mosfet_eval(const DeviceModel& model, double w, double l, double vgs, double vds,
                       double /*vbs*/) {
    const double sign = model.polarity == Polarity::PMOS ? -1.0 : 1.0;
    vgs *= sign;
    vds *= sign;
    const double k = model.kp * w / l;

    MosfetEval r;
    if (vds >= 0.0) {
        r = square_law(k, model.vt, model.lambda, vgs, vds);
    } else {
        // Source and drain exchange roles: id(vgs, vds) = -f(vgs - vds, -vds).
        MosfetEval f = square_law(k, model.vt, model.lambda, vgs - vds, -vds);
        r.region = f.region;
        r.id = -f.id;
        r.gm = -f.gm;
        r.gds = f.gm + f.gds;
    }
    r.id *= sign;
    return r;
}

double gate_capacitance(const GateCapInputs& g) { return 2.0 * g.eps * g.area / (3.0 * g.tox); }

double switch_eval(const SwitchParams& params, double vctrl) {
    return vctrl >= params.vt ? 1.0 / params.ron : 1.0 / params.roff;
}

double source_value(const Waveform& w, double t) {
    if (const auto* dc = std::get_if<DcWave>(&w)) return dc->value;

    if (const auto* p = std::get_if<PulseWave>(&w)) {
        if (t < p->delay) return p->v1;
        double tt = t - p->delay;
        if (p->period && *p->period > 0.0) tt = std::fmod(tt, *p->period);
        if (tt < p->rise) return p->v1 + (p->v2 - p->v1) * tt / p->rise;
        tt -= p->rise;
        if (tt < p->width) return p->v2;
        tt -= p->width;
        if (tt < p->fall) return p->v2 + (p->v1 - p->v2) * tt / p->fall;
        return p->v1;
    }

    if (const auto* pwl = std::get_if<PwlWave>(&w)) {
        const auto& pts = pwl->points;
        if (pts.empty()) return 0.0;
        if (t <= pts.front().first) return pts.front().second;
        if (t >= pts.back().first) return pts.back().second;
        auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                                   [](double x, const auto& p) { return x < p.first; });
        const auto& [t0, v0] = *(hi - 1);
        const auto& [t1, v1] = *hi;
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }

    const auto& s = std::get<SineWave>(w);
    return s.offset + s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t);
}

}  // namespace neuroswitch
