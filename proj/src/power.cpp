#include "neuroswitch/power.hpp"

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "neuroswitch/devices.hpp"
#include "neuroswitch/error.hpp"

namespace neuroswitch {

void check_inputs(const PowerModelInputs& in) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0)) throw InvalidArgument(std::string(name) + " must be > 0");
    };
    positive(in.eps, "eps");
    positive(in.area, "area");
    positive(in.tox, "tox");
    positive(in.f, "f");
    positive(in.vdd, "vdd");
    if (!(in.vss >= 0)) throw InvalidArgument("vss must be >= 0");
    positive(in.i_bias, "ibias");
    if (in.n_core <= 0) throw InvalidArgument("ncore must be > 0");
    if (in.n_switch < 0) throw InvalidArgument("nswitch must be >= 0");
    if (!(in.duty >= 0 && in.duty <= 1)) throw InvalidArgument("duty must lie in [0, 1]");
}

PowerReport analytic_power(const PowerModelInputs& in) {
    check_inputs(in);
    const double swing = in.vdd + in.vss;
    PowerReport r;
    r.c_device = gate_capacitance({in.eps, in.area, in.tox});
    r.c_eff = in.n_core * r.c_device;
    r.p_dynamic_device = in.f * r.c_device * swing * swing;
    r.p_static_device = in.i_bias * swing;
    r.p_static_circuit = in.n_core * r.p_static_device;
    const double per_device = r.p_dynamic_device + r.p_static_device;
    r.p_total_unswitched = in.n_core * per_device;
    r.p_total_switched_on = (in.n_core + in.n_switch) * per_device;
    r.p_total_switched_off = 0.0;
    r.p_average_switched = in.duty * r.p_total_switched_on;
    r.savings_fraction = 1.0 - r.p_average_switched / r.p_total_unswitched;
    return r;
}

double dynamic_power_eq3(const PowerModelInputs& in) {
    check_inputs(in);
    const double swing = in.vdd + in.vss;
    return in.f * (in.eps * in.area / in.tox) * swing * swing;
}

double breakeven_duty(int n_core, int n_switch) {
    if (n_core <= 0 || n_switch < 0) throw InvalidArgument("breakeven requires n_core > 0 and n_switch >= 0");
    return static_cast<double>(n_core) / static_cast<double>(n_core + n_switch);
}

std::vector<DutyRow> duty_sweep(const PowerModelInputs& in, const std::vector<double>& duties) {
    std::vector<DutyRow> rows;
    rows.reserve(duties.size());
    for (double d : duties) {
        PowerModelInputs at = in;
        at.duty = d;
        const PowerReport r = analytic_power(at);
        rows.push_back({d, r.p_average_switched, r.savings_fraction});
    }
    return rows;
}

Reconciliation reconcile(const PowerReport& report, double measured_on, double measured_avg) {
    if (!(measured_on > 0)) throw InvalidArgument("no ON window captured (measured ON power is 0)");
    return {measured_on / report.p_total_switched_on, measured_avg / report.p_average_switched,
            measured_avg / measured_on};
}

void write_power_json(const PowerReport& r, std::ostream& os) {
    nlohmann::ordered_json j;
    j["c_device"] = r.c_device;
    j["c_eff"] = r.c_eff;
    j["p_dynamic_device"] = r.p_dynamic_device;
    j["p_static_device"] = r.p_static_device;
    j["p_static_circuit"] = r.p_static_circuit;
    j["p_total_unswitched"] = r.p_total_unswitched;
    j["p_total_switched_on"] = r.p_total_switched_on;
    j["p_total_switched_off"] = r.p_total_switched_off;
    j["p_average_switched"] = r.p_average_switched;
    j["savings_fraction"] = r.savings_fraction;
    os << j.dump(2) << '\n';
}

void write_duty_sweep_csv(const std::vector<DutyRow>& rows, std::ostream& os) {
    os << "duty,p_avg_w,savings\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.8e,%.8e,%.8e\n", r.duty, r.p_average_switched, r.savings_fraction);
        os << buf;
    }
}

}  // namespace neuroswitch
