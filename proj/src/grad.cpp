#include "fxfit/grad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "fxfit/error.hpp"

namespace fxfit::grad {

std::size_t Var::size() const { return value().size(); }
const std::vector<double>& Var::value() const { return tape->value(*this); }

double Var::scalar() const {
    const auto& v = value();
    require(v.size() == 1, ErrorKind::shape, "expected a scalar node");
    return v[0];
}

Var Tape::input(std::vector<double> value) { return push(std::move(value), {}, {}); }

Var Tape::push(std::vector<double> value, std::vector<Var> parents, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.parents.reserve(parents.size());
    for (const Var& p : parents) {
        require(p.tape == this, ErrorKind::precondition, "node belongs to another tape");
        node.parents.push_back(p.id);
    }
    if (recording_) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
}

std::vector<double> Tape::gradient(Var output, Var wrt) const {
    require(recording_, ErrorKind::precondition, "tape was not recording");
    require(output.tape == this && wrt.tape == this, ErrorKind::precondition, "node belongs to another tape");
    require(nodes_.at(output.id).value.size() == 1, ErrorKind::shape, "gradient needs a scalar output");
    std::vector<std::vector<double>> grads(output.id + 1);
    grads[output.id] = {1.0};
    std::vector<std::vector<double>*> parent_ptrs;
    for (std::size_t i = output.id + 1; i-- > 0;) {
        if (grads[i].empty() || i == wrt.id) continue;
        const Node& node = nodes_[i];
        if (!node.backward) continue;
        parent_ptrs.clear();
        for (std::size_t p : node.parents) {
            if (grads[p].empty()) grads[p].assign(nodes_[p].value.size(), 0.0);
            parent_ptrs.push_back(&grads[p]);
        }
        node.backward(grads[i], parent_ptrs);
        if (i != output.id) std::vector<double>().swap(grads[i]);
    }
    if (wrt.id > output.id || grads[wrt.id].empty()) return std::vector<double>(nodes_[wrt.id].value.size(), 0.0);
    return grads[wrt.id];
}

Var add(Var a, Var b) {
    require(a.size() == b.size(), ErrorKind::shape, "add: size mismatch");
    std::vector<double> y(a.value());
    const auto& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    return a.tape->push(std::move(y), {a, b}, [](std::span<const double> g, std::span<std::vector<double>*> pg) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            (*pg[0])[i] += g[i];
            (*pg[1])[i] += g[i];
        }
    });
}

Var scale(Var a, double k) {
    std::vector<double> y(a.value());
    for (double& v : y) v *= k;
    return a.tape->push(std::move(y), {a}, [k](std::span<const double> g, std::span<std::vector<double>*> pg) {
        for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += k * g[i];
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value()) s += v;
    return a.tape->push({s}, {a}, [](std::span<const double> g, std::span<std::vector<double>*> pg) {
        for (double& v : *pg[0]) v += g[0];
    });
}

Var sum_of_squares(Var a) {
    double s = 0.0;
    for (double v : a.value()) s += v * v;
    std::vector<double> x = a.value();
    return a.tape->push({s}, {a}, [x = std::move(x)](std::span<const double> g, std::span<std::vector<double>*> pg) {
        for (std::size_t i = 0; i < x.size(); ++i) (*pg[0])[i] += 2.0 * x[i] * g[0];
    });
}

Var map(Var a, std::function<double(double)> f, std::function<double(double)> df) {
    const std::vector<double>& x = a.value();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return a.tape->push(std::move(y), {a},
                        [x, df = std::move(df)](std::span<const double> g, std::span<std::vector<double>*> pg) {
                            for (std::size_t i = 0; i < x.size(); ++i) (*pg[0])[i] += df(x[i]) * g[i];
                        });
}

Var sin(Var a) {
    return map(a, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

Var tanh(Var a) {
    std::vector<double> y(a.value());
    for (double& v : y) v = std::tanh(v);
    std::vector<double> keep = y;
    return a.tape->push(std::move(y), {a},
                        [t = std::move(keep)](std::span<const double> g, std::span<std::vector<double>*> pg) {
                            for (std::size_t i = 0; i < t.size(); ++i) (*pg[0])[i] += (1.0 - t[i] * t[i]) * g[i];
                        });
}

Var affine(Var x, std::span<const double> w, std::span<const double> b) {
    const std::size_t cols = x.size();
    const std::size_t rows = b.size();
    require(w.size() == rows * cols, ErrorKind::shape, "affine: weight shape mismatch");
    const auto& xv = x.value();
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xv[c];
        y[r] += acc;
    }
    std::vector<double> wc(w.begin(), w.end());
    return x.tape->push(std::move(y), {x},
                        [wc = std::move(wc), rows, cols](std::span<const double> g,
                                                         std::span<std::vector<double>*> pg) {
                            auto& gx = *pg[0];
                            for (std::size_t r = 0; r < rows; ++r) {
                                const double* row = wc.data() + r * cols;
                                for (std::size_t c = 0; c < cols; ++c) gx[c] += row[c] * g[r];
                            }
                        });
}

namespace {

double checked(double v) {
    if (!std::isfinite(v)) fail(ErrorKind::non_finite, "loss is not finite");
    return v;
}

}  // namespace

double evaluate(const Loss& loss, std::span<const double> at) {
    Tape tape(false);
    const Var u = tape.input({at.begin(), at.end()});
    return checked(loss(tape, u).scalar());
}

std::vector<double> gradient(const Loss& loss, std::span<const double> at) {
    Tape tape;
    const Var u = tape.input({at.begin(), at.end()});
    const Var l = loss(tape, u);
    checked(l.scalar());
    auto g = tape.gradient(l, u);
    for (double v : g) {
        if (!std::isfinite(v)) fail(ErrorKind::non_finite, "gradient is not finite");
    }
    return g;
}

std::vector<double> finite_difference_gradient(const Loss& loss, std::span<const double> at, double step) {
    require(step > 0.0, ErrorKind::precondition, "finite-difference step must be positive");
    std::vector<double> u(at.begin(), at.end());
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double ui = at[i];
        const double h = step * std::max(1.0, std::abs(ui));
        u[i] = ui + h;
        const double up = evaluate(loss, u);
        u[i] = ui - h;
        const double down = evaluate(loss, u);
        u[i] = ui;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

namespace {

double central_difference(const Loss& loss, std::vector<double>& u, std::size_t i, double h) {
    const double ui = u[i];
    u[i] = ui + h;
    const double up = evaluate(loss, u);
    u[i] = ui - h;
    const double down = evaluate(loss, u);
    u[i] = ui;
    return (up - down) / (2.0 * h);
}

}  // namespace

GradReport gradient_check(const Loss& loss, std::span<const double> at, double step,
                          std::span<const std::string> names) {
    require(names.empty() || names.size() == at.size(), ErrorKind::shape, "gradient_check: names size mismatch");
    require(step > 0.0, ErrorKind::precondition, "finite-difference step must be positive");
    const auto analytic = gradient(loss, at);
    const double scale = std::abs(evaluate(loss, at));
    std::vector<double> u(at.begin(), at.end());
    GradReport report;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double unit = std::max(1.0, std::abs(at[i]));
        double h = step * unit;
        double numeric = central_difference(loss, u, i, h);
        // Rounding in the two probes contributes about 2 eps |f| / h; when
        // that is not small against the tolerance, widen the step.
        const double allowed = kFdRoundoffShare * kGradCheckTolerance * std::max(std::abs(numeric), kGradRelErrFloor);
        const double needed = 2.0 * std::numeric_limits<double>::epsilon() * scale / allowed;
        if (needed > h) {
            h = std::min(needed, kMaxFdStep * unit);
            numeric = central_difference(loss, u, i, h);
        }
        GradEntry e;
        e.name = names.empty() ? std::to_string(i) : names[i];
        e.analytic = analytic[i];
        e.numeric = numeric;
        const double mag = std::max(std::abs(e.analytic), std::abs(e.numeric));
        e.rel_err = std::abs(e.analytic - e.numeric) / std::max(mag, kGradRelErrFloor);
        if (mag > kGradCheckFloor) report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
        report.entries.push_back(std::move(e));
    }
    report.pass = report.max_rel_err < kGradCheckTolerance;
    return report;
}

nlohmann::json to_json(const GradReport& report) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"name", e.name}, {"analytic", e.analytic}, {"numeric", e.numeric}, {"rel_err", e.rel_err}});
    }
    return {{"entries", entries}, {"max_rel_err", report.max_rel_err}, {"pass", report.pass}};
}

}  // namespace fxfit::grad
