#include "neuroswitch/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "neuroswitch/devices.hpp"

namespace neuroswitch {

namespace {

// Per-node clamp on Newton voltage updates in nonlinear circuits.
constexpr double kMaxVoltageStep = 1.0;

struct Res {
    int a, b;
    double g;
};
struct Cap {
    int a, b;
    double c;
    std::optional<double> ic;
};
struct Src {
    int p, n;
    const Waveform* wave;
    std::string name;
};
struct Mos {
    int d, g, s;
    const DeviceModel* model;
    double w, l;
};
struct Sw {
    int a, b, cp, cn;
    SwitchParams prm;
};

struct StepContext {
    double time = 0.0;
    double scale = 1.0;
    bool dc = true;         // capacitors open
    bool force_ic = false;  // capacitors with ic= act as voltage constraints
    std::vector<double> cap_g;
    std::vector<double> cap_ieq;
};

// Dense LU with partial pivoting; solves in place. Returns the failing column on a zero pivot.
std::optional<int> lu_solve(std::vector<double>& a, std::vector<double>& b, int n) {
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    const double tiny = scale * 1e-18;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(a[static_cast<std::size_t>(k * n + k)]);
        for (int i = k + 1; i < n; ++i) {
            double v = std::abs(a[static_cast<std::size_t>(i * n + k)]);
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0 || best < tiny) return k;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(a[static_cast<std::size_t>(k * n + j)], a[static_cast<std::size_t>(piv * n + j)]);
            std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(piv)]);
        }
        const double d = a[static_cast<std::size_t>(k * n + k)];
        for (int i = k + 1; i < n; ++i) {
            double f = a[static_cast<std::size_t>(i * n + k)] / d;
            if (f == 0.0) continue;
            a[static_cast<std::size_t>(i * n + k)] = 0.0;
            for (int j = k + 1; j < n; ++j) a[static_cast<std::size_t>(i * n + j)] -= f * a[static_cast<std::size_t>(k * n + j)];
            b[static_cast<std::size_t>(i)] -= f * b[static_cast<std::size_t>(k)];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) s -= a[static_cast<std::size_t>(i * n + j)] * b[static_cast<std::size_t>(j)];
        b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i * n + i)];
    }
    return std::nullopt;
}

class Mna {
public:
    Mna(const Netlist& n, const SimOptions& opts) : opts_(opts) {
        nodes_ = static_cast<int>(n.node_count());
        for (const auto& d : validate(n)) {
            if (d.severity == Severity::Error) throw InvalidArgument("invalid netlist: " + d.message);
        }
        auto idx = [&](const std::string& name) { return *n.find_node(name); };
        for (const auto& e : n.elements) {
            switch (e.kind) {
            case ElementKind::Resistor:
                res_.push_back({idx(e.nodes[0]), idx(e.nodes[1]), 1.0 / std::get<ResistorParams>(e.params).resistance});
                break;
            case ElementKind::Capacitor: {
                const auto& p = std::get<CapacitorParams>(e.params);
                caps_.push_back({idx(e.nodes[0]), idx(e.nodes[1]), p.capacitance, p.ic});
                if (p.ic) ++ic_count_;
                break;
            }
            case ElementKind::VSource:
                vsrc_.push_back({idx(e.nodes[0]), idx(e.nodes[1]), &std::get<SourceParams>(e.params).wave, e.name});
                break;
            case ElementKind::ISource:
                isrc_.push_back({idx(e.nodes[0]), idx(e.nodes[1]), &std::get<SourceParams>(e.params).wave, e.name});
                break;
            case ElementKind::Mosfet: {
                const auto& p = std::get<MosfetParams>(e.params);
                mos_.push_back({idx(e.nodes[0]), idx(e.nodes[1]), idx(e.nodes[2]), n.find_model(p.model), p.w, p.l});
                break;
            }
            case ElementKind::Switch:
                sw_.push_back({idx(e.nodes[0]), idx(e.nodes[1]), idx(e.nodes[2]), idx(e.nodes[3]),
                               std::get<SwitchParams>(e.params)});
                break;
            }
        }
        for (const auto& name : n.node_names()) node_names_.push_back(name);
        unknowns_ = nodes_ - 1 + static_cast<int>(vsrc_.size()) + ic_count_;
    }

    int nodes() const { return nodes_; }
    int unknowns() const { return unknowns_; }
    bool nonlinear() const { return !mos_.empty() || !sw_.empty(); }
    bool has_ic() const { return ic_count_ > 0; }
    const std::vector<Cap>& caps() const { return caps_; }
    const std::vector<Src>& vsources() const { return vsrc_; }
    const std::vector<Sw>& switches() const { return sw_; }

    static double v(const std::vector<double>& x, int node) {
        return node == 0 ? 0.0 : x[static_cast<std::size_t>(node - 1)];
    }
    int branch(std::size_t k) const { return nodes_ - 1 + static_cast<int>(k); }
    int ic_branch(std::size_t k) const { return nodes_ - 1 + static_cast<int>(vsrc_.size()) + static_cast<int>(k); }

    std::string unknown_name(int u) const {
        if (u < nodes_ - 1) return node_names_[static_cast<std::size_t>(u + 1)];
        u -= nodes_ - 1;
        if (u < static_cast<int>(vsrc_.size())) return "I(" + vsrc_[static_cast<std::size_t>(u)].name + ")";
        return "I(ic#" + std::to_string(u - static_cast<int>(vsrc_.size())) + ")";
    }

    std::vector<bool> switch_states(const std::vector<double>& x) const {
        std::vector<bool> s;
        for (const auto& sw : sw_) s.push_back(v(x, sw.cp) - v(x, sw.cn) >= sw.prm.vt);
        return s;
    }

    void assemble(const std::vector<double>& x, const StepContext& ctx, std::vector<double>& J,
                  std::vector<double>& b) const {
        const int n = unknowns_;
        J.assign(static_cast<std::size_t>(n * n), 0.0);
        b.assign(static_cast<std::size_t>(n), 0.0);
        auto at = [&](int r, int c) -> double& { return J[static_cast<std::size_t>(r * n + c)]; };
        auto stamp_g = [&](int a, int bb, double g) {
            if (a) at(a - 1, a - 1) += g;
            if (bb) at(bb - 1, bb - 1) += g;
            if (a && bb) {
                at(a - 1, bb - 1) -= g;
                at(bb - 1, a - 1) -= g;
            }
        };
        // current `i` leaving node a and entering node bb through the element
        auto stamp_i = [&](int a, int bb, double i) {
            if (a) b[static_cast<std::size_t>(a - 1)] -= i;
            if (bb) b[static_cast<std::size_t>(bb - 1)] += i;
        };
        auto stamp_vcon = [&](int row, int p, int q, double value) {
            if (p) {
                at(p - 1, row) += 1.0;
                at(row, p - 1) += 1.0;
            }
            if (q) {
                at(q - 1, row) -= 1.0;
                at(row, q - 1) -= 1.0;
            }
            b[static_cast<std::size_t>(row)] = value;
        };

        for (int i = 1; i < nodes_; ++i) at(i - 1, i - 1) += opts_.gmin;
        for (const auto& r : res_) stamp_g(r.a, r.b, r.g);
        std::size_t ick = 0;
        for (std::size_t k = 0; k < caps_.size(); ++k) {
            const auto& c = caps_[k];
            if (c.ic) {
                const int row = ic_branch(ick++);
                if (ctx.force_ic) {
                    stamp_vcon(row, c.a, c.b, *c.ic);
                    continue;
                }
                at(row, row) = 1.0;
            }
            if (!ctx.dc) {
                stamp_g(c.a, c.b, ctx.cap_g[k]);
                stamp_i(c.a, c.b, ctx.cap_ieq[k]);
            }
        }
        for (std::size_t k = 0; k < vsrc_.size(); ++k) {
            const auto& s = vsrc_[k];
            stamp_vcon(branch(k), s.p, s.n, ctx.scale * source_value(*s.wave, ctx.time));
        }
        for (const auto& s : isrc_) stamp_i(s.p, s.n, ctx.scale * source_value(*s.wave, ctx.time));
        for (const auto& sw : sw_) stamp_g(sw.a, sw.b, switch_eval(sw.prm, v(x, sw.cp) - v(x, sw.cn)));
        for (const auto& m : mos_) {
            const double vgs0 = v(x, m.g) - v(x, m.s);
            const double vds0 = v(x, m.d) - v(x, m.s);
            const MosfetEval e = mosfet_eval(*m.model, m.w, m.l, vgs0, vds0);
            const double ieq = e.id - e.gm * vgs0 - e.gds * vds0;
            // i_ds = gm*(vg - vs) + gds*(vd - vs) + ieq, leaving the drain
            auto add = [&](int row_node, int col_node, double val) {
                if (row_node && col_node) at(row_node - 1, col_node - 1) += val;
            };
            add(m.d, m.g, e.gm);
            add(m.d, m.d, e.gds);
            add(m.d, m.s, -e.gm - e.gds);
            add(m.s, m.g, -e.gm);
            add(m.s, m.d, -e.gds);
            add(m.s, m.s, e.gm + e.gds);
            stamp_i(m.d, m.s, ieq);
        }
    }

    /// Max over nodes of |KCL residual| / (iabstol + reltol * largest incident current).
    double kcl_margin(const std::vector<double>& x, const StepContext& ctx) const {
        std::vector<double> sum(static_cast<std::size_t>(nodes_), 0.0);
        std::vector<double> peak(static_cast<std::size_t>(nodes_), 0.0);
        auto flow = [&](int a, int bb, double i) {
            sum[static_cast<std::size_t>(a)] += i;
            sum[static_cast<std::size_t>(bb)] -= i;
            peak[static_cast<std::size_t>(a)] = std::max(peak[static_cast<std::size_t>(a)], std::abs(i));
            peak[static_cast<std::size_t>(bb)] = std::max(peak[static_cast<std::size_t>(bb)], std::abs(i));
        };
        for (int i = 1; i < nodes_; ++i) flow(i, 0, opts_.gmin * v(x, i));
        for (const auto& r : res_) flow(r.a, r.b, r.g * (v(x, r.a) - v(x, r.b)));
        std::size_t ick = 0;
        for (std::size_t k = 0; k < caps_.size(); ++k) {
            const auto& c = caps_[k];
            if (c.ic && ctx.force_ic) {
                flow(c.a, c.b, x[static_cast<std::size_t>(ic_branch(ick++))]);
                continue;
            }
            if (c.ic) ++ick;
            if (!ctx.dc) flow(c.a, c.b, ctx.cap_g[k] * (v(x, c.a) - v(x, c.b)) + ctx.cap_ieq[k]);
        }
        for (std::size_t k = 0; k < vsrc_.size(); ++k) {
            flow(vsrc_[k].p, vsrc_[k].n, x[static_cast<std::size_t>(branch(k))]);
        }
        for (const auto& s : isrc_) flow(s.p, s.n, ctx.scale * source_value(*s.wave, ctx.time));
        for (const auto& sw : sw_) {
            flow(sw.a, sw.b, switch_eval(sw.prm, v(x, sw.cp) - v(x, sw.cn)) * (v(x, sw.a) - v(x, sw.b)));
        }
        for (const auto& m : mos_) {
            const MosfetEval e =
                mosfet_eval(*m.model, m.w, m.l, v(x, m.g) - v(x, m.s), v(x, m.d) - v(x, m.s));
            flow(m.d, m.s, e.id);
        }
        double margin = 0.0;
        for (int i = 1; i < nodes_; ++i) {
            const double bound = opts_.iabstol + opts_.reltol * peak[static_cast<std::size_t>(i)];
            margin = std::max(margin, std::abs(sum[static_cast<std::size_t>(i)]) / bound);
        }
        return margin;
    }

    struct NewtonResult {
        bool converged = false;
        int iterations = 0;
        double margin = 0.0;
    };

    NewtonResult newton(std::vector<double>& x, const StepContext& ctx) const {
        NewtonResult r;
        std::vector<double> J, b;
        const int n = unknowns_;
        for (int it = 1; it <= opts_.max_nr_iters; ++it) {
            r.iterations = it;
            assemble(x, ctx, J, b);
            if (auto bad = lu_solve(J, b, n)) throw SingularMatrix(unknown_name(*bad));
            bool small = true;
            for (int i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(i);
                const double old = x[k];
                double step = b[k] - old;
                if (i < nodes_ - 1 && nonlinear() && std::abs(step) > kMaxVoltageStep) {
                    step = std::copysign(kMaxVoltageStep, step);
                    small = false;
                }
                const double next = old + step;
                const double abstol = i < nodes_ - 1 ? opts_.vabstol : opts_.iabstol;
                if (std::abs(step) > opts_.reltol * std::max(std::abs(next), std::abs(old)) + abstol) {
                    small = false;
                }
                x[k] = next;
            }
            if (small) {
                r.margin = kcl_margin(x, ctx);
                if (r.margin <= 1.0) {
                    r.converged = true;
                    return r;
                }
            }
        }
        r.margin = kcl_margin(x, ctx);
        return r;
    }

    std::vector<double> node_voltages(const std::vector<double>& x) const {
        std::vector<double> out(static_cast<std::size_t>(nodes_), 0.0);
        for (int i = 1; i < nodes_; ++i) out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i - 1)];
        return out;
    }

private:
    SimOptions opts_;
    int nodes_ = 0;
    int unknowns_ = 0;
    int ic_count_ = 0;
    std::vector<std::string> node_names_;
    std::vector<Res> res_;
    std::vector<Cap> caps_;
    std::vector<Src> vsrc_;
    std::vector<Src> isrc_;
    std::vector<Mos> mos_;
    std::vector<Sw> sw_;
};

// Plain Newton, then source ramping 0.1, 0.2, ..., 1.0 from the given start.
OperatingPoint solve_dc(const Mna& m, StepContext ctx, std::vector<double> x) {
    const std::vector<double> start = x;
    auto res = m.newton(x, ctx);
    int total = res.iterations;
    if (!res.converged) {
        x = start;
        for (int step = 1; step <= 10; ++step) {
            ctx.scale = step / 10.0;
            res = m.newton(x, ctx);
            total += res.iterations;
            if (!res.converged) {
                throw NonConvergence(ctx.time, m.node_voltages(x),
                                     "DC operating point did not converge (source ramp at " +
                                         std::to_string(ctx.scale) + ")");
            }
        }
    }
    OperatingPoint op;
    op.node_voltages = m.node_voltages(x);
    for (std::size_t k = 0; k < m.vsources().size(); ++k) {
        op.source_currents[m.vsources()[k].name] = x[static_cast<std::size_t>(m.branch(k))];
    }
    op.nr_iterations = total;
    op.kcl_margin = res.margin;
    return op;
}

std::vector<double> unknowns_from(const Mna& m, const OperatingPoint& op) {
    std::vector<double> x(static_cast<std::size_t>(m.unknowns()), 0.0);
    for (int i = 1; i < m.nodes(); ++i) x[static_cast<std::size_t>(i - 1)] = op.node_voltages[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < m.vsources().size(); ++k) {
        x[static_cast<std::size_t>(m.branch(k))] = op.source_currents.at(m.vsources()[k].name);
    }
    return x;
}

std::size_t column_of(const std::vector<std::string>& names, const std::string& want) {
    const std::string key = to_lower(want);
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (to_lower(names[i]) == key) return i;
    }
    throw InvalidArgument("unknown name '" + want + "'");
}

}  // namespace

NonConvergence::NonConvergence(double time, std::vector<double> last_iterate, const std::string& what)
    : Error(what + " at t=" + format_value(time)), time_(time), last_(std::move(last_iterate)) {}

SingularMatrix::SingularMatrix(std::string unknown)
    : Error("singular matrix at unknown '" + unknown + "'"), unknown_(std::move(unknown)) {}

void check_options(const SimOptions& o, bool transient) {
    if (!(o.reltol > 0) || !(o.vabstol > 0) || !(o.iabstol > 0) || !(o.gmin > 0) || o.max_nr_iters <= 0) {
        throw InvalidArgument("tolerances, gmin and max_nr_iters must be positive");
    }
    if (transient && (!(o.dt > 0) || !(o.tstop > o.dt))) {
        throw InvalidArgument("transient requires dt > 0 and tstop > dt");
    }
}

std::vector<double> Waveforms::node_column(const std::string& name) const {
    const std::size_t c = column_of(node_names, name);
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = voltage(r, c);
    return out;
}

std::vector<double> Waveforms::current_column(const std::string& source) const {
    std::vector<std::string> names;
    for (const auto& s : vsources) names.push_back(s.name);
    const std::size_t c = column_of(names, source);
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = current(r, c);
    return out;
}

OperatingPoint dc_operating_point(const Netlist& n, const SimOptions& opts,
                                  const std::vector<double>* initial_guess) {
    check_options(opts, false);
    Mna m(n, opts);
    std::vector<double> x(static_cast<std::size_t>(m.unknowns()), 0.0);
    if (initial_guess) {
        for (int i = 1; i < m.nodes() && i < static_cast<int>(initial_guess->size()); ++i) {
            x[static_cast<std::size_t>(i - 1)] = (*initial_guess)[static_cast<std::size_t>(i)];
        }
    }
    return solve_dc(m, StepContext{}, std::move(x));
}

Waveforms transient(const Netlist& n, const SimOptions& opts) {
    check_options(opts, true);
    Mna m(n, opts);
    const double dt = opts.dt;
    auto steps = static_cast<long long>(std::llround(opts.tstop / dt));
    if (static_cast<double>(steps) * dt < opts.tstop - dt / 2) ++steps;
    steps = std::max(steps, 1LL);

    StepContext init;
    init.force_ic = m.has_ic();
    OperatingPoint op0 = solve_dc(m, init, std::vector<double>(static_cast<std::size_t>(m.unknowns()), 0.0));
    std::vector<double> x = unknowns_from(m, op0);

    const auto& caps = m.caps();
    std::vector<double> vprev(caps.size()), iprev(caps.size(), 0.0);
    for (std::size_t k = 0; k < caps.size(); ++k) {
        vprev[k] = op0.node_voltages[static_cast<std::size_t>(caps[k].a)] - op0.node_voltages[static_cast<std::size_t>(caps[k].b)];
    }
    // The first step is always backward Euler, so iprev needs no seeding.

    Waveforms w;
    w.node_names = n.node_names();
    for (const auto& s : m.vsources()) {
        w.vsources.push_back({s.name, s.p, s.n});
    }
    auto record = [&](double t, double margin, Method method) {
        w.times.push_back(t);
        auto nv = m.node_voltages(x);
        w.node_voltages.insert(w.node_voltages.end(), nv.begin(), nv.end());
        for (std::size_t k = 0; k < m.vsources().size(); ++k) {
            w.vsource_currents.push_back(x[static_cast<std::size_t>(m.branch(k))]);
        }
        w.kcl_margin.push_back(margin);
        w.step_method.push_back(method);
    };
    record(0.0, op0.kcl_margin, Method::BackwardEuler);

    std::vector<bool> sw_state = m.switch_states(x);
    bool force_be = true;
    StepContext ctx;
    ctx.dc = false;
    ctx.cap_g.resize(caps.size());
    ctx.cap_ieq.resize(caps.size());
    for (long long k = 1; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Method method = force_be ? Method::BackwardEuler : opts.method;
        for (std::size_t c = 0; c < caps.size(); ++c) {
            if (method == Method::BackwardEuler) {
                ctx.cap_g[c] = caps[c].c / dt;
                ctx.cap_ieq[c] = -ctx.cap_g[c] * vprev[c];
            } else {
                ctx.cap_g[c] = 2.0 * caps[c].c / dt;
                ctx.cap_ieq[c] = -ctx.cap_g[c] * vprev[c] - iprev[c];
            }
        }
        ctx.time = t;
        auto res = m.newton(x, ctx);
        if (!res.converged) {
            throw NonConvergence(t, m.node_voltages(x), "transient step did not converge");
        }
        for (std::size_t c = 0; c < caps.size(); ++c) {
            const double vc = Mna::v(x, caps[c].a) - Mna::v(x, caps[c].b);
            iprev[c] = ctx.cap_g[c] * vc + ctx.cap_ieq[c];
            vprev[c] = vc;
        }
        auto now = m.switch_states(x);
        force_be = now != sw_state;
        sw_state = std::move(now);
        record(t, res.margin, method);
    }
    return w;
}

BranchPower measure_branch_power(const Waveforms& w, const std::vector<std::string>& source_names,
                                 std::optional<std::pair<double, double>> window) {
    std::vector<std::string> names;
    for (const auto& s : w.vsources) names.push_back(s.name);
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        if (!window || (w.times[r] >= window->first && w.times[r] <= window->second)) rows.push_back(r);
    }
    const double span = rows.size() >= 2 ? w.times[rows.back()] - w.times[rows.front()] : 0.0;

    BranchPower out;
    for (const auto& name : source_names) {
        const std::size_t c = column_of(names, name);
        const auto& src = w.vsources[c];
        auto power = [&](std::size_t r) {
            const double v = w.voltage(r, static_cast<std::size_t>(src.pos)) - w.voltage(r, static_cast<std::size_t>(src.neg));
            return -v * w.current(r, c);
        };
        double energy = 0.0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            energy += 0.5 * (power(rows[i - 1]) + power(rows[i])) * (w.times[rows[i]] - w.times[rows[i - 1]]);
        }
        const double avg = span > 0 ? energy / span : 0.0;
        out.per_source_energy[src.name] = energy;
        out.per_source_avg_power[src.name] = avg;
        out.total_avg_power += avg;
    }
    return out;
}

void write_waveforms_csv(const Waveforms& w, std::ostream& os) {
    os << "time";
    for (std::size_t i = 1; i < w.node_names.size(); ++i) os << ',' << w.node_names[i];
    for (const auto& s : w.vsources) os << ",I(" << s.name << ')';
    os << '\n';
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.8e", v);
        os << buf;
    };
    for (std::size_t r = 0; r < w.rows(); ++r) {
        put(w.times[r]);
        for (std::size_t i = 1; i < w.node_names.size(); ++i) {
            os << ',';
            put(w.voltage(r, i));
        }
        for (std::size_t k = 0; k < w.vsources.size(); ++k) {
            os << ',';
            put(w.current(r, k));
        }
        os << '\n';
    }
}

}  // namespace neuroswitch
