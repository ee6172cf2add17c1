#include "neuroswitch/netlist.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace neuroswitch {

namespace {

struct Suffix {
    std::string_view text;
    int exponent;
};

// "meg" must be tried before "m".
constexpr Suffix kSuffixes[] = {
    {"meg", 6}, {"f", -15}, {"p", -12}, {"n", -9}, {"u", -6},
    {"m", -3},  {"k", 3},   {"g", 9},
};

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

struct LogicalLine {
    int line = 0;
    std::string text;
};

// Joins "+" continuations, strips "*" comment lines and ";" inline comments.
std::vector<LogicalLine> logical_lines(std::string_view source) {
    std::vector<LogicalLine> out;
    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        std::size_t end = source.find('\n', pos);
        if (end == std::string_view::npos) end = source.size();
        std::string_view raw = source.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (auto semi = raw.find(';'); semi != std::string_view::npos) raw = raw.substr(0, semi);
        std::string_view text = trim(raw);
        if (text.empty() || text.front() == '*') {
            if (end == source.size()) break;
            continue;
        }
        if (text.front() == '+') {
            if (out.empty()) throw ParseError(DiagCode::Syntax, lineno, "continuation line without a preceding line");
            out.back().text += ' ';
            out.back().text += std::string(trim(text.substr(1)));
        } else {
            out.push_back({lineno, std::string(text)});
        }
        if (end == source.size()) break;
    }
    return out;
}

// Whitespace split with parentheses and commas as separators and "k = v" folded to "k=v".
std::vector<std::string> tokenize(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (char ch : text) s += (ch == '(' || ch == ')' || ch == ',') ? ' ' : ch;
    std::vector<std::string> raw;
    std::istringstream in(s);
    for (std::string t; in >> t;) raw.push_back(t);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::string t = raw[i];
        while (!t.empty() && t.back() == '=' && i + 1 < raw.size()) t += raw[++i];
        if (i + 1 < raw.size() && raw[i + 1].front() == '=') {
            t += raw[++i];
            if (t.back() == '=' && i + 1 < raw.size()) t += raw[++i];
        }
        out.push_back(std::move(t));
    }
    return out;
}

double require_value(std::string_view tok, int line, std::string_view what) {
    auto v = parse_value(tok);
    if (!v) {
        throw ParseError(DiagCode::Syntax, line,
                         "bad " + std::string(what) + " value '" + std::string(tok) + "'");
    }
    return *v;
}

using KeyValues = std::map<std::string, double>;

KeyValues parse_key_values(const std::vector<std::string>& toks, std::size_t first, int line,
                           std::initializer_list<std::string_view> allowed) {
    KeyValues kv;
    for (std::size_t i = first; i < toks.size(); ++i) {
        const auto& t = toks[i];
        auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ParseError(DiagCode::Syntax, line, "expected key=value, got '" + t + "'");
        }
        std::string key = to_lower(std::string_view(t).substr(0, eq));
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ParseError(DiagCode::Syntax, line, "unknown parameter '" + key + "'");
        }
        if (kv.count(key)) throw ParseError(DiagCode::Syntax, line, "parameter '" + key + "' given twice");
        kv[key] = require_value(std::string_view(t).substr(eq + 1), line, key);
    }
    return kv;
}

double need(const KeyValues& kv, const std::string& key, int line, std::string_view elem) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw ParseError(DiagCode::Syntax, line,
                         std::string(elem) + " requires parameter '" + key + "'");
    }
    return it->second;
}

Waveform parse_source(const std::vector<std::string>& toks, std::size_t first, int line) {
    if (first >= toks.size()) throw ParseError(DiagCode::Syntax, line, "source value missing");
    const std::string kw = to_lower(toks[first]);
    std::vector<double> args;
    auto collect = [&](std::size_t from) {
        for (std::size_t i = from; i < toks.size(); ++i) args.push_back(require_value(toks[i], line, kw));
    };
    if (kw == "dc") {
        collect(first + 1);
        if (args.size() != 1) throw ParseError(DiagCode::Syntax, line, "DC takes exactly one value");
        return DcWave{args[0]};
    }
    if (kw == "pulse") {
        collect(first + 1);
        if (args.size() < 2 || args.size() > 7) {
            throw ParseError(DiagCode::Syntax, line, "PULSE takes 2 to 7 values");
        }
        args.resize(std::max<std::size_t>(args.size(), 6), 0.0);
        PulseWave p{args[0], args[1], args[2], args[3], args[4], args[5], std::nullopt};
        if (args.size() == 7) p.period = args[6];
        return p;
    }
    if (kw == "pwl") {
        collect(first + 1);
        if (args.empty() || args.size() % 2 != 0) {
            throw ParseError(DiagCode::Syntax, line, "PWL takes time/value pairs");
        }
        PwlWave w;
        for (std::size_t i = 0; i < args.size(); i += 2) w.points.emplace_back(args[i], args[i + 1]);
        return w;
    }
    if (kw == "sin") {
        collect(first + 1);
        if (args.size() != 3) throw ParseError(DiagCode::Syntax, line, "SIN takes offset amplitude frequency");
        return SineWave{args[0], args[1], args[2]};
    }
    if (toks.size() - first == 1) {
        if (auto v = parse_value(toks[first])) return DcWave{*v};
    }
    throw ParseError(DiagCode::Syntax, line, "unrecognised source specification '" + toks[first] + "'");
}

void require_nodes(const std::vector<std::string>& toks, std::size_t count, int line) {
    if (toks.size() < count + 1) {
        throw ParseError(DiagCode::Syntax, line,
                         "element '" + toks[0] + "' needs " + std::to_string(count) + " nodes");
    }
}

Element parse_element(const std::vector<std::string>& toks, int line) {
    Element e;
    e.name = toks[0];
    e.line = line;
    const char letter = static_cast<char>(std::tolower(static_cast<unsigned char>(toks[0][0])));
    auto take_nodes = [&](std::size_t n) {
        require_nodes(toks, n, line);
        e.nodes.assign(toks.begin() + 1, toks.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    };
    switch (letter) {
    case 'r': {
        e.kind = ElementKind::Resistor;
        take_nodes(2);
        if (toks.size() != 4) throw ParseError(DiagCode::Syntax, line, "resistor takes one value");
        e.params = ResistorParams{require_value(toks[3], line, "resistance")};
        break;
    }
    case 'c': {
        e.kind = ElementKind::Capacitor;
        take_nodes(2);
        if (toks.size() < 4) throw ParseError(DiagCode::Syntax, line, "capacitor value missing");
        CapacitorParams cp{require_value(toks[3], line, "capacitance"), std::nullopt};
        auto kv = parse_key_values(toks, 4, line, {"ic"});
        if (auto it = kv.find("ic"); it != kv.end()) cp.ic = it->second;
        e.params = cp;
        break;
    }
    case 'v':
    case 'i': {
        e.kind = letter == 'v' ? ElementKind::VSource : ElementKind::ISource;
        take_nodes(2);
        e.params = SourceParams{parse_source(toks, 3, line)};
        break;
    }
    case 'm': {
        e.kind = ElementKind::Mosfet;
        take_nodes(4);
        if (toks.size() < 6) throw ParseError(DiagCode::Syntax, line, "MOSFET model name missing");
        auto kv = parse_key_values(toks, 6, line, {"w", "l"});
        e.params = MosfetParams{toks[5], need(kv, "w", line, e.name), need(kv, "l", line, e.name)};
        break;
    }
    case 's': {
        e.kind = ElementKind::Switch;
        take_nodes(4);
        auto kv = parse_key_values(toks, 5, line, {"ron", "roff", "vt"});
        e.params = SwitchParams{need(kv, "ron", line, e.name), need(kv, "roff", line, e.name),
                                need(kv, "vt", line, e.name)};
        break;
    }
    default:
        throw ParseError(DiagCode::UnknownElement, line,
                         "unknown element letter '" + std::string(1, toks[0][0]) + "'");
    }
    return e;
}

DeviceModel parse_model(const std::vector<std::string>& toks, int line) {
    if (toks.size() < 3) throw ParseError(DiagCode::Syntax, line, ".model needs a name and NMOS|PMOS");
    DeviceModel m;
    m.name = toks[1];
    if (iequals(toks[2], "nmos")) {
        m.polarity = Polarity::NMOS;
    } else if (iequals(toks[2], "pmos")) {
        m.polarity = Polarity::PMOS;
    } else {
        throw ParseError(DiagCode::Syntax, line, "model type must be NMOS or PMOS, got '" + toks[2] + "'");
    }
    auto kv = parse_key_values(toks, 3, line, {"vt", "kp", "lambda", "tox", "eps"});
    if (auto it = kv.find("vt"); it != kv.end()) m.vt = it->second;
    if (auto it = kv.find("kp"); it != kv.end()) m.kp = it->second;
    if (auto it = kv.find("lambda"); it != kv.end()) m.lambda = it->second;
    if (auto it = kv.find("tox"); it != kv.end()) m.tox = it->second;
    if (auto it = kv.find("eps"); it != kv.end()) m.eps = it->second;
    return m;
}

std::size_t expected_node_count(ElementKind k) {
    return (k == ElementKind::Mosfet || k == ElementKind::Switch) ? 4 : 2;
}

char kind_letter(ElementKind k) {
    switch (k) {
    case ElementKind::Resistor: return 'r';
    case ElementKind::Capacitor: return 'c';
    case ElementKind::VSource: return 'v';
    case ElementKind::ISource: return 'i';
    case ElementKind::Mosfet: return 'm';
    case ElementKind::Switch: return 's';
    }
    return '?';
}

bool params_match_kind(const Element& e) {
    switch (e.kind) {
    case ElementKind::Resistor: return std::holds_alternative<ResistorParams>(e.params);
    case ElementKind::Capacitor: return std::holds_alternative<CapacitorParams>(e.params);
    case ElementKind::VSource:
    case ElementKind::ISource: return std::holds_alternative<SourceParams>(e.params);
    case ElementKind::Mosfet: return std::holds_alternative<MosfetParams>(e.params);
    case ElementKind::Switch: return std::holds_alternative<SwitchParams>(e.params);
    }
    return false;
}

void check_waveform(const Waveform& w, const Element& e, std::vector<Diagnostic>& out) {
    auto err = [&](const std::string& msg) {
        out.push_back({Severity::Error, DiagCode::InvalidValue, e.line, e.name + ": " + msg});
    };
    if (const auto* p = std::get_if<PulseWave>(&w)) {
        if (p->rise < 0 || p->fall < 0 || p->width < 0 || p->delay < 0) {
            err("PULSE delay, rise, fall and width must be >= 0");
        }
        if (p->period && !(*p->period > p->rise + p->fall + p->width)) {
            err("PULSE period must exceed rise + fall + width");
        }
    } else if (const auto* pwl = std::get_if<PwlWave>(&w)) {
        if (pwl->points.empty()) err("PWL needs at least one point");
        for (std::size_t i = 1; i < pwl->points.size(); ++i) {
            if (!(pwl->points[i].first > pwl->points[i - 1].first)) {
                err("PWL times must be strictly increasing");
                break;
            }
        }
    } else if (const auto* s = std::get_if<SineWave>(&w)) {
        if (s->frequency < 0) err("SIN frequency must be >= 0");
    }
}

void emit_waveform(std::ostream& os, const Waveform& w) {
    std::visit(
        [&](const auto& wave) {
            using T = std::decay_t<decltype(wave)>;
            if constexpr (std::is_same_v<T, DcWave>) {
                os << "DC " << format_value(wave.value);
            } else if constexpr (std::is_same_v<T, PulseWave>) {
                os << "PULSE(" << format_value(wave.v1) << ' ' << format_value(wave.v2) << ' '
                   << format_value(wave.delay) << ' ' << format_value(wave.rise) << ' '
                   << format_value(wave.fall) << ' ' << format_value(wave.width);
                if (wave.period) os << ' ' << format_value(*wave.period);
                os << ')';
            } else if constexpr (std::is_same_v<T, PwlWave>) {
                os << "PWL(";
                for (std::size_t i = 0; i < wave.points.size(); ++i) {
                    if (i) os << ' ';
                    os << format_value(wave.points[i].first) << ' ' << format_value(wave.points[i].second);
                }
                os << ')';
            } else {
                os << "SIN(" << format_value(wave.offset) << ' ' << format_value(wave.amplitude) << ' '
                   << format_value(wave.frequency) << ')';
            }
        },
        w);
}

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
}

std::string_view to_string(DiagCode code) {
    switch (code) {
    case DiagCode::Syntax: return "syntax";
    case DiagCode::UnknownElement: return "unknown-element";
    case DiagCode::DuplicateName: return "duplicate-name";
    case DiagCode::MissingModel: return "missing-model";
    case DiagCode::InvalidValue: return "invalid-value";
    case DiagCode::DanglingNode: return "dangling-node";
    case DiagCode::BadAnalysis: return "bad-analysis";
    case DiagCode::UnknownNode: return "unknown-node";
    }
    return "unknown";
}

ParseError::ParseError(DiagCode code, int line, const std::string& reason)
    : Error("line " + std::to_string(line) + ": " + reason), code_(code), line_(line) {}

std::optional<double> parse_value(std::string_view token) {
    if (token.empty()) return std::nullopt;
    std::string_view body = token;
    if (body.front() == '+') body.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
    if (ec != std::errc() || !std::isfinite(value)) return std::nullopt;
    std::string_view number = body.substr(0, static_cast<std::size_t>(ptr - body.data()));
    std::string suffix = to_lower(body.substr(number.size()));
    if (suffix.empty()) return value;
    for (const auto& s : kSuffixes) {
        if (suffix != s.text) continue;
        if (number.find_first_of("eE") == std::string_view::npos) {
            // Re-read as "<digits>e<exp>" so "20n" is the double nearest 20e-9.
            std::string text(number);
            text += 'e';
            text += std::to_string(s.exponent);
            double scaled = 0.0;
            std::from_chars(text.data(), text.data() + text.size(), scaled);
            return scaled;
        }
        return value * std::pow(10.0, s.exponent);
    }
    return std::nullopt;
}

std::string format_value(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

Netlist::Netlist() { intern_node("0"); }

int Netlist::intern_node(std::string_view name) {
    std::string key = to_lower(name);
    if (auto it = node_index_.find(key); it != node_index_.end()) return it->second;
    int idx = static_cast<int>(node_names_.size());
    node_names_.emplace_back(name);
    node_index_.emplace(std::move(key), idx);
    return idx;
}

std::optional<int> Netlist::find_node(std::string_view name) const {
    if (auto it = node_index_.find(to_lower(name)); it != node_index_.end()) return it->second;
    return std::nullopt;
}

void Netlist::add_model(DeviceModel model) {
    for (auto& m : models_) {
        if (iequals(m.name, model.name)) {
            m = std::move(model);
            return;
        }
    }
    models_.push_back(std::move(model));
}

const DeviceModel* Netlist::find_model(std::string_view name) const {
    for (const auto& m : models_) {
        if (iequals(m.name, name)) return &m;
    }
    return nullptr;
}

Element& Netlist::add_element(Element e) {
    for (const auto& n : e.nodes) intern_node(n);
    elements.push_back(std::move(e));
    return elements.back();
}

const Element* Netlist::find_element(std::string_view name) const {
    for (const auto& e : elements) {
        if (iequals(e.name, name)) return &e;
    }
    return nullptr;
}

bool Netlist::operator==(const Netlist& o) const {
    return title == o.title && elements == o.elements && analyses == o.analyses &&
           models_ == o.models_ && node_names_ == o.node_names_;
}

Netlist parse_netlist(std::string_view source) {
    Netlist n;
    std::set<std::string> names;
    for (const auto& ll : logical_lines(source)) {
        if (ll.text.front() == '.') {
            auto toks = tokenize(ll.text);
            const std::string directive = to_lower(toks[0]);
            if (directive == ".end") break;
            if (directive == ".title") {
                n.title = std::string(trim(std::string_view(ll.text).substr(6)));
            } else if (directive == ".model") {
                n.add_model(parse_model(toks, ll.line));
            } else if (directive == ".op") {
                if (toks.size() != 1) throw ParseError(DiagCode::Syntax, ll.line, ".op takes no arguments");
                n.analyses.emplace_back(OpAnalysis{});
            } else if (directive == ".tran") {
                if (toks.size() != 3) throw ParseError(DiagCode::Syntax, ll.line, ".tran takes <step> <stop>");
                TranAnalysis t{require_value(toks[1], ll.line, "step"), require_value(toks[2], ll.line, "stop")};
                if (!(t.step > 0) || !(t.stop > t.step)) {
                    throw ParseError(DiagCode::BadAnalysis, ll.line, ".tran requires 0 < step < stop");
                }
                n.analyses.emplace_back(t);
            } else {
                throw ParseError(DiagCode::Syntax, ll.line, "unknown directive '" + toks[0] + "'");
            }
            continue;
        }
        auto toks = tokenize(ll.text);
        Element e = parse_element(toks, ll.line);
        if (!names.insert(to_lower(e.name)).second) {
            throw ParseError(DiagCode::DuplicateName, ll.line, "duplicate element name '" + e.name + "'");
        }
        n.add_element(std::move(e));
    }
    for (const auto& d : validate(n)) {
        if (d.severity == Severity::Error) throw ParseError(d.code, d.line, d.message);
    }
    return n;
}

std::string serialize_netlist(const Netlist& n) {
    std::ostringstream os;
    if (!n.title.empty()) {
        std::string_view t = n.title;
        os << ".title " << t.substr(0, t.find('\n')) << '\n';
    }
    for (const auto& m : n.models()) {
        os << ".model " << m.name << (m.polarity == Polarity::NMOS ? " NMOS" : " PMOS")
           << " vt=" << format_value(m.vt) << " kp=" << format_value(m.kp)
           << " lambda=" << format_value(m.lambda) << " tox=" << format_value(m.tox)
           << " eps=" << format_value(m.eps) << '\n';
    }
    for (const auto& e : n.elements) {
        os << e.name;
        for (const auto& node : e.nodes) os << ' ' << node;
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, ResistorParams>) {
                    os << ' ' << format_value(p.resistance);
                } else if constexpr (std::is_same_v<T, CapacitorParams>) {
                    os << ' ' << format_value(p.capacitance);
                    if (p.ic) os << " ic=" << format_value(*p.ic);
                } else if constexpr (std::is_same_v<T, SourceParams>) {
                    os << ' ';
                    emit_waveform(os, p.wave);
                } else if constexpr (std::is_same_v<T, MosfetParams>) {
                    os << ' ' << p.model << " W=" << format_value(p.w) << " L=" << format_value(p.l);
                } else {
                    os << " ron=" << format_value(p.ron) << " roff=" << format_value(p.roff)
                       << " vt=" << format_value(p.vt);
                }
            },
            e.params);
        os << '\n';
    }
    for (const auto& a : n.analyses) {
        if (const auto* t = std::get_if<TranAnalysis>(&a)) {
            os << ".tran " << format_value(t->step) << ' ' << format_value(t->stop) << '\n';
        } else {
            os << ".op\n";
        }
    }
    os << ".end\n";
    return os.str();
}

std::vector<Diagnostic> validate(const Netlist& n) {
    std::vector<Diagnostic> out;
    auto error = [&](DiagCode code, int line, std::string msg) {
        out.push_back({Severity::Error, code, line, std::move(msg)});
    };

    if (n.node_count() == 0 || n.node_names()[0] != "0" || n.find_node("0") != 0) {
        error(DiagCode::UnknownNode, 0, "ground node '0' must have index 0");
    }

    for (const auto& m : n.models()) {
        if (!(m.kp > 0) || !(m.tox > 0) || !(m.eps > 0) || !(m.lambda >= 0) || !(m.vt >= 0)) {
            error(DiagCode::InvalidValue, 0,
                  "model " + m.name + ": requires kp > 0, tox > 0, eps > 0, lambda >= 0, vt >= 0");
        }
    }

    std::set<std::string> names;
    std::map<int, int> refs;
    for (const auto& e : n.elements) {
        if (e.name.empty() || std::tolower(static_cast<unsigned char>(e.name[0])) != kind_letter(e.kind) ||
            !params_match_kind(e)) {
            error(DiagCode::UnknownElement, e.line, "element '" + e.name + "' does not match its kind");
            continue;
        }
        if (!names.insert(to_lower(e.name)).second) {
            error(DiagCode::DuplicateName, e.line, "duplicate element name '" + e.name + "'");
        }
        if (e.nodes.size() != expected_node_count(e.kind)) {
            error(DiagCode::Syntax, e.line, e.name + ": wrong number of nodes");
        }
        for (const auto& node : e.nodes) {
            auto idx = n.find_node(node);
            if (!idx) {
                error(DiagCode::UnknownNode, e.line, e.name + ": node '" + node + "' not in node table");
            } else {
                ++refs[*idx];
            }
        }
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, ResistorParams>) {
                    if (!(p.resistance > 0)) error(DiagCode::InvalidValue, e.line, e.name + ": resistance must be > 0");
                } else if constexpr (std::is_same_v<T, CapacitorParams>) {
                    if (!(p.capacitance > 0)) error(DiagCode::InvalidValue, e.line, e.name + ": capacitance must be > 0");
                } else if constexpr (std::is_same_v<T, SourceParams>) {
                    check_waveform(p.wave, e, out);
                } else if constexpr (std::is_same_v<T, MosfetParams>) {
                    if (!(p.w > 0) || !(p.l > 0)) error(DiagCode::InvalidValue, e.line, e.name + ": W and L must be > 0");
                    if (!n.find_model(p.model)) {
                        error(DiagCode::MissingModel, e.line, e.name + ": no .model named '" + p.model + "'");
                    }
                } else {
                    if (!(p.ron > 0)) error(DiagCode::InvalidValue, e.line, e.name + ": ron must be > 0");
                    if (!(p.roff > p.ron)) error(DiagCode::InvalidValue, e.line, e.name + ": roff must exceed ron");
                }
            },
            e.params);
    }

    for (const auto& a : n.analyses) {
        if (const auto* t = std::get_if<TranAnalysis>(&a); t && (!(t->step > 0) || !(t->stop > t->step))) {
            error(DiagCode::BadAnalysis, 0, ".tran requires 0 < step < stop");
        }
    }

    for (const auto& [idx, count] : refs) {
        if (idx != 0 && count == 1) {
            int line = 0;
            for (const auto& e : n.elements) {
                for (const auto& node : e.nodes) {
                    if (line == 0 && n.find_node(node) == idx) line = e.line;
                }
            }
            out.push_back({Severity::Warning, DiagCode::DanglingNode, line,
                           "node '" + n.node_names()[static_cast<std::size_t>(idx)] + "' is connected only once"});
        }
    }
    return out;
}

}  // namespace neuroswitch
