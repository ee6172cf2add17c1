#pragma once

// Constitutive relations for the element kinds the engine stamps.

#include "neuroswitch/netlist.hpp"

namespace neuroswitch {

enum class MosRegion { Cutoff, Triode, Saturation };

/// Drain current and its partials with respect to vgs and vds.
struct MosfetEval {
    double id = 0.0;
    double gm = 0.0;
    double gds = 0.0;
    MosRegion region = MosRegion::Cutoff;
};

/// Level-1 square law with channel-length modulation and no body effect.
///
/// PMOS devices are evaluated by negating the terminal voltages and the
/// resulting current, so gm and gds keep the NMOS sign convention. For
/// vds < 0 the drain and source roles are exchanged. vbs is accepted for
/// interface completeness and ignored.
MosfetEval mosfet_eval(const DeviceModel& model, double w, double l, double vgs, double vds,
                       double vbs = 0.0);

struct GateCapInputs {
    double eps = 0.0;   // F/m
    double area = 0.0;  // m^2
    double tox = 0.0;   // m
};

/// Effective gate capacitance 2*eps*A/(3*tox), applied uniformly whenever the device is on.
double gate_capacitance(const GateCapInputs& g);

/// Switch conductance: 1/ron when vctrl >= vt (closed at threshold), else 1/roff.
double switch_eval(const SwitchParams& params, double vctrl);

double source_value(const Waveform& w, double t);

}  // namespace neuroswitch
