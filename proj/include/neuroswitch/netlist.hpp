#pragma once

// SPICE-subset netlist: data model, parser, serializer and validator.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "neuroswitch/error.hpp"

namespace neuroswitch {

enum class ElementKind { Resistor, Capacitor, VSource, ISource, Mosfet, Switch };
enum class Polarity { NMOS, PMOS };

struct DcWave {
    double value = 0.0;
    bool operator==(const DcWave&) const = default;
};

/// Periodic trapezoid. A missing period means a single pulse.
struct PulseWave {
    double v1 = 0.0;
    double v2 = 0.0;
    double delay = 0.0;
    double rise = 0.0;
    double fall = 0.0;
    double width = 0.0;
    std::optional<double> period;
    bool operator==(const PulseWave&) const = default;
};

struct PwlWave {
    std::vector<std::pair<double, double>> points;  // (time, value)
    bool operator==(const PwlWave&) const = default;
};

struct SineWave {
    double offset = 0.0;
    double amplitude = 0.0;
    double frequency = 0.0;
    bool operator==(const SineWave&) const = default;
};

using Waveform = std::variant<DcWave, PulseWave, PwlWave, SineWave>;

struct DeviceModel {
    std::string name;
    Polarity polarity = Polarity::NMOS;
    double vt = 0.5;        // threshold magnitude (V)
    double kp = 100e-6;     // A/V^2
    double lambda = 0.0;    // 1/V
    double tox = 7.5e-9;    // m
    double eps = 3.45e-11;  // F/m
    bool operator==(const DeviceModel&) const = default;
};

struct ResistorParams {
    double resistance = 0.0;
    bool operator==(const ResistorParams&) const = default;
};

struct CapacitorParams {
    double capacitance = 0.0;
    std::optional<double> ic;
    bool operator==(const CapacitorParams&) const = default;
};

struct SourceParams {
    Waveform wave;
    bool operator==(const SourceParams&) const = default;
};

struct MosfetParams {
    std::string model;
    double w = 0.0;
    double l = 0.0;
    bool operator==(const MosfetParams&) const = default;
};

struct SwitchParams {
    double ron = 0.0;
    double roff = 0.0;
    double vt = 0.0;
    bool operator==(const SwitchParams&) const = default;
};

using ElementParams =
    std::variant<ResistorParams, CapacitorParams, SourceParams, MosfetParams, SwitchParams>;

/// One circuit element. Node order: R/C/V/I (n+, n-); M (d, g, s, b);
/// S (t+, t-, ctrl+, ctrl-).
struct Element {
    std::string name;
    ElementKind kind = ElementKind::Resistor;
    std::vector<std::string> nodes;
    ElementParams params;
    int line = 0;  // source line, 0 when built programmatically; not part of equality

    bool operator==(const Element& o) const {
        return name == o.name && kind == o.kind && nodes == o.nodes && params == o.params;
    }
};

struct OpAnalysis {
    bool operator==(const OpAnalysis&) const = default;
};
struct TranAnalysis {
    double step = 0.0;
    double stop = 0.0;
    bool operator==(const TranAnalysis&) const = default;
};
using AnalysisDirective = std::variant<OpAnalysis, TranAnalysis>;

enum class Severity { Warning, Error };

enum class DiagCode {
    Syntax,
    UnknownElement,
    DuplicateName,
    MissingModel,
    InvalidValue,
    DanglingNode,
    BadAnalysis,
    UnknownNode,
};

struct Diagnostic {
    Severity severity = Severity::Error;
    DiagCode code = DiagCode::Syntax;
    int line = 0;
    std::string message;
};

std::string_view to_string(DiagCode code);

class ParseError : public Error {
public:
    ParseError(DiagCode code, int line, const std::string& reason);
    DiagCode code() const noexcept { return code_; }
    int line() const noexcept { return line_; }

private:
    DiagCode code_;
    int line_;
};

/// Parsed circuit. Node and element names compare case-insensitively; the
/// spelling of the first appearance is kept for output.
class Netlist {
public:
    Netlist();

    std::string title;
    std::vector<Element> elements;
    std::vector<AnalysisDirective> analyses;

    /// Returns the dense index of a node, registering it on first use.
    int intern_node(std::string_view name);
    std::optional<int> find_node(std::string_view name) const;
    const std::vector<std::string>& node_names() const { return node_names_; }
    std::size_t node_count() const { return node_names_.size(); }

    void add_model(DeviceModel model);
    const DeviceModel* find_model(std::string_view name) const;
    /// Models in insertion order.
    const std::vector<DeviceModel>& models() const { return models_; }

    /// Appends an element and interns its nodes in order.
    Element& add_element(Element e);
    const Element* find_element(std::string_view name) const;

    /// Structural equality: title, elements, models, analyses, node table.
    bool operator==(const Netlist& o) const;

private:
    std::vector<std::string> node_names_;
    std::map<std::string, int> node_index_;  // lower-case key
    std::vector<DeviceModel> models_;
};

/// Parses a netlist. Throws ParseError on the first error-class problem; warning-class
/// findings (dangling nodes) are left for validate().
Netlist parse_netlist(std::string_view source);

/// Canonical text form; parse_netlist(serialize_netlist(n)) == n.
std::string serialize_netlist(const Netlist& n);

std::vector<Diagnostic> validate(const Netlist& n);

/// Value with optional engineering suffix (f p n u m k meg g, case-insensitive).
std::optional<double> parse_value(std::string_view token);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_value(double v);

std::string to_lower(std::string_view s);

}  // namespace neuroswitch
