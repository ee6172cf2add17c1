#pragma once

// Modified nodal analysis: DC operating point and fixed-step transient.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neuroswitch/netlist.hpp"

namespace neuroswitch {

enum class Method { BackwardEuler, Trapezoidal };

struct SimOptions {
    Method method = Method::Trapezoidal;
    double dt = 1e-9;
    double tstop = 1e-6;
    double reltol = 1e-3;
    double vabstol = 1e-6;
    double iabstol = 1e-12;
    int max_nr_iters = 100;
    double gmin = 1e-12;  // always connected from every node to ground
};

/// Throws InvalidArgument unless dt > 0, tstop > dt and all tolerances are positive.
void check_options(const SimOptions& opts, bool transient);

class NonConvergence : public Error {
public:
    NonConvergence(double time, std::vector<double> last_iterate, const std::string& what);
    double time() const noexcept { return time_; }
    /// Node voltages of the last Newton iterate, indexed by node table.
    const std::vector<double>& last_iterate() const noexcept { return last_; }

private:
    double time_;
    std::vector<double> last_;
};

class SingularMatrix : public Error {
public:
    explicit SingularMatrix(std::string unknown);
    /// Node name, or "I(<source>)" for a branch-current unknown.
    const std::string& unknown() const noexcept { return unknown_; }

private:
    std::string unknown_;
};

struct OperatingPoint {
    std::vector<double> node_voltages;  // indexed by node table; [0] is ground
    std::map<std::string, double> source_currents;  // into the + terminal
    int nr_iterations = 0;
    /// max over nodes of |KCL residual| / (iabstol + reltol * max incident current); <= 1 when accepted
    double kcl_margin = 0.0;
};

struct SourceTerminals {
    std::string name;
    int pos = 0;
    int neg = 0;
    bool operator==(const SourceTerminals&) const = default;
};

/// Transient result. Matrices are row-major, one row per time point.
struct Waveforms {
    std::vector<double> times;
    std::vector<std::string> node_names;  // column order of node_voltages, including ground
    std::vector<double> node_voltages;
    std::vector<SourceTerminals> vsources;  // column order of vsource_currents
    std::vector<double> vsource_currents;    // into the + terminal (SPICE sign)
    std::vector<double> kcl_margin;          // per row, see OperatingPoint::kcl_margin
    std::vector<Method> step_method;         // per row; entry 0 is the initial point

    std::size_t rows() const { return times.size(); }
    double voltage(std::size_t row, std::size_t node) const {
        return node_voltages[row * node_names.size() + node];
    }
    double current(std::size_t row, std::size_t source) const {
        return vsource_currents[row * vsources.size() + source];
    }
    /// Node voltage column by name (case-insensitive); throws InvalidArgument if unknown.
    std::vector<double> node_column(const std::string& name) const;
    std::vector<double> current_column(const std::string& source) const;

    bool operator==(const Waveforms&) const = default;
};

OperatingPoint dc_operating_point(const Netlist& n, const SimOptions& opts,
                                  const std::vector<double>* initial_guess = nullptr);

Waveforms transient(const Netlist& n, const SimOptions& opts);

struct BranchPower {
    std::map<std::string, double> per_source_energy;     // J
    std::map<std::string, double> per_source_avg_power;  // W
    double total_avg_power = 0.0;
};

/// Integrates the power delivered by each named voltage source (trapezoidal rule
/// over the stored samples). With a window, only samples with t in
/// [t_start, t_end] are used. Throws InvalidArgument on an unknown source.
BranchPower measure_branch_power(const Waveforms& w, const std::vector<std::string>& source_names,
                                 std::optional<std::pair<double, double>> window = std::nullopt);

/// time,<nodes except ground>,I(<source>)... with 9 significant digits.
void write_waveforms_csv(const Waveforms& w, std::ostream& os);

}  // namespace neuroswitch
