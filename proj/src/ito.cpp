#include "fxfit/ito.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"
#include "fxfit/sampler.hpp"

namespace fxfit {

double radam_rho(std::size_t t, double beta2) {
    const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    const double b2t = std::pow(beta2, static_cast<double>(t));
    return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

void radam_step(RAdamState& state, std::span<const double> grad, std::span<double> params) {
    const std::size_t n = params.size();
    require(grad.size() == n && state.m.size() == n && state.v.size() == n, ErrorKind::shape,
            "RAdam state, gradient and parameters must have the same size");
    for (double g : grad) require(std::isfinite(g), ErrorKind::non_finite, "non-finite gradient");
    const auto& c = state.config;
    state.t += 1;
    const double t = static_cast<double>(state.t);
    for (std::size_t i = 0; i < n; ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    }
    const double m_corr = 1.0 - std::pow(c.beta1, t);
    const double v_corr = 1.0 - std::pow(c.beta2, t);
    const double rho_inf = 2.0 / (1.0 - c.beta2) - 1.0;
    const double rho = radam_rho(state.t, c.beta2);
    if (c.rectify && rho > 4.0) {
        const double r = std::sqrt(((rho - 4.0) * (rho - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho));
        for (std::size_t i = 0; i < n; ++i) {
            const double m_hat = state.m[i] / m_corr;
            const double v_hat = state.v[i] / v_corr;
            params[i] -= c.learning_rate * r * m_hat / (std::sqrt(v_hat) + c.eps);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) params[i] -= c.learning_rate * state.m[i] / m_corr;
    }
}

// ---------------------------------------------------------------------------

Converter Converter::init(std::size_t embedding_dim, std::size_t hidden_dim, std::uint64_t seed) {
    require(embedding_dim >= 1 && hidden_dim >= 1, ErrorKind::precondition, "converter dimensions must be >= 1");
    require(embedding_dim <= kMaxEmbeddingDim, ErrorKind::precondition, "embedding dimension too large");
    Converter c;
    c.d_ = embedding_dim;
    c.h_ = hidden_dim;
    Rng rng(seed);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(embedding_dim));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    c.w1_.resize(hidden_dim * embedding_dim);
    for (double& w : c.w1_) w = rng.uniform(-a1, a1);
    c.b1_.assign(hidden_dim, 0.0);
    c.w2_.resize(kNumParams * hidden_dim);
    for (double& w : c.w2_) w = rng.uniform(-a2, a2);
    c.b2_ = params_to_unconstrained(neutral_params());
    return c;
}

std::vector<double> Converter::decode_unconstrained(std::span<const double> z) const {
    require(z.size() == d_, ErrorKind::shape, "embedding has the wrong dimension");
    std::vector<double> hidden(h_);
    for (std::size_t r = 0; r < h_; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d_; ++c) acc += w1_[r * d_ + c] * z[c];
        hidden[r] = std::tanh(b1_[r] + acc);
    }
    std::vector<double> u(b2_);
    for (std::size_t r = 0; r < kNumParams; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < h_; ++c) acc += w2_[r * h_ + c] * hidden[c];
        u[r] += acc;
    }
    return u;
}

ChainParams Converter::decode(std::span<const double> z) const { return unconstrained_to_params(decode_unconstrained(z)); }

grad::Var Converter::decode(grad::Var z) const {
    require(z.size() == d_, ErrorKind::shape, "embedding has the wrong dimension");
    return ops::reparam(grad::affine(grad::tanh(grad::affine(z, w1_, b1_)), w2_, b2_));
}

nlohmann::json to_json(const Converter& c) {
    return {{"schema_version", 1}, {"d", c.d_}, {"h", c.h_}, {"w1", c.w1_}, {"b1", c.b1_}, {"w2", c.w2_}, {"b2", c.b2_}};
}

Converter converter_from_json(const nlohmann::json& j) {
    Converter c;
    try {
        require(j.at("schema_version").get<int>() == 1, ErrorKind::format, "unsupported converter schema_version");
        c.d_ = j.at("d").get<std::size_t>();
        c.h_ = j.at("h").get<std::size_t>();
        c.w1_ = j.at("w1").get<std::vector<double>>();
        c.b1_ = j.at("b1").get<std::vector<double>>();
        c.w2_ = j.at("w2").get<std::vector<double>>();
        c.b2_ = j.at("b2").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, std::string("malformed converter: ") + e.what());
    }
    require(c.d_ >= 1 && c.h_ >= 1 && c.d_ <= kMaxEmbeddingDim, ErrorKind::format, "converter dimensions out of range");
    require(c.w1_.size() == c.h_ * c.d_ && c.b1_.size() == c.h_ && c.w2_.size() == kNumParams * c.h_ &&
                c.b2_.size() == kNumParams,
            ErrorKind::format, "converter weight shapes are inconsistent");
    for (const auto* v : {&c.w1_, &c.b1_, &c.w2_, &c.b2_})
        for (double x : *v) require(std::isfinite(x), ErrorKind::format, "converter weights must be finite");
    return c;
}

void save_converter(const Converter& c, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out << to_json(c).dump() << '\n';
    require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

Converter load_converter(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, "invalid JSON in " + path.string() + ": " + e.what());
    }
    return converter_from_json(j);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ItoSpace s) { return s == ItoSpace::theta ? "theta" : "z"; }
std::string_view to_string(ops::LossKind k) { return k == ops::LossKind::mss ? "mss" : "af"; }

void ItoConfig::validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::precondition, "learning rate must be > 0");
    require(steps() >= 1, ErrorKind::precondition, "max_steps must be >= 1");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0, ErrorKind::precondition,
            "invalid RAdam hyperparameters");
}

ItoInit ItoInit::theta_midpoint() { return {std::vector<double>(kNumParams, 0.5), "theta: schema midpoint (t = 0.5)"}; }

ItoInit ItoInit::theta(const ChainParams& p) { return {params_to_unit(p), "theta: given parameters"}; }

ItoInit ItoInit::embedding_zero(std::size_t dim) { return {std::vector<double>(dim, 0.0), "z: zero embedding"}; }

namespace {

double l2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

ItoTrace run_ito(const StereoBuffer& x_in, const StereoBuffer& x_ref, const ItoConfig& cfg, const ItoInit& init,
                 const Converter* converter) {
    cfg.validate();
    const bool in_z = cfg.space == ItoSpace::z;
    if (in_z) {
        require(converter != nullptr, ErrorKind::precondition, "z-space optimization needs a converter");
        require(init.values.size() == converter->embedding_dim(), ErrorKind::shape,
                "initial embedding does not match the converter");
    } else {
        require(init.values.size() == kNumParams, ErrorKind::shape, "theta-space start must have 46 values");
    }

    std::function<grad::Var(grad::Tape&, grad::Var)> decode;
    if (in_z)
        decode = [converter](grad::Tape&, grad::Var z) { return converter->decode(z); };
    else
        decode = [](grad::Tape&, grad::Var t) { return ops::from_unit(t); };
    const grad::Loss loss = ops::composed_loss(decode, x_in, x_ref, cfg.loss, ModuleMask::all_on(), cfg.af_weights);
    auto to_params = [&](const std::vector<double>& v) {
        return in_z ? converter->decode(v) : unit_to_params(v);
    };

    struct Eval {
        double loss;
        std::vector<double> grad;
    };
    auto evaluate = [&](const std::vector<double>& point) {
        grad::Tape tape;
        const grad::Var v = tape.input(point);
        const grad::Var l = loss(tape, v);
        const double value = l.scalar();
        require(std::isfinite(value), ErrorKind::non_finite, "loss is not finite");
        Eval e{value, tape.gradient(l, v)};
        for (double g : e.grad) require(std::isfinite(g), ErrorKind::non_finite, "gradient is not finite");
        return e;
    };

    ItoTrace trace;
    trace.init_description = init.description;
    std::vector<double> point = init.values;
    std::vector<double> best = point;

    Eval current;
    try {
        current = evaluate(point);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::non_finite) throw;
        trace.stop_reason = "non_finite";
        trace.final_params = to_params(best);
        trace.final_loss = std::nan("");
        if (in_z) trace.final_embedding = best;
        trace.output = apply_chain(x_in, trace.final_params, ModuleMask::all_on());
        return trace;
    }
    double best_loss = current.loss;
    double norm = l2(current.grad);
    trace.rows.push_back({0, current.loss, norm, true});

    RAdamState state(point.size(), {cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, true});
    if (current.loss <= cfg.converged_loss) {
        trace.stop_reason = "converged";
    } else if (norm == 0.0) {
        trace.stop_reason = "zero_gradient";
    } else {
        const std::size_t budget = cfg.steps();
        for (std::size_t step = 1; step <= budget; ++step) {
            radam_step(state, current.grad, point);
            if (!in_z)
                for (double& t : point) t = std::clamp(t, 0.0, 1.0);
            try {
                current = evaluate(point);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::range) {
                    trace.rows.push_back({step, std::nan(""), 0.0, false});
                    trace.stop_reason = "invalid_params";
                } else if (e.kind() == ErrorKind::non_finite) {
                    trace.rows.push_back({step, std::nan(""), std::nan(""), false});
                    trace.stop_reason = "non_finite";
                } else {
                    throw;
                }
                break;
            }
            norm = l2(current.grad);
            if (!(current.loss < best_loss)) {
                trace.rows.push_back({step, current.loss, norm, false});
                trace.stop_reason = "loss_increase";
                break;
            }
            trace.rows.push_back({step, current.loss, norm, true});
            best = point;
            best_loss = current.loss;
            if (current.loss <= cfg.converged_loss) {
                trace.stop_reason = "converged";
                break;
            }
            if (norm == 0.0) {
                trace.stop_reason = "zero_gradient";
                break;
            }
        }
        if (trace.stop_reason.empty()) trace.stop_reason = "max_steps";
    }

    trace.final_params = to_params(best);
    trace.final_loss = best_loss;
    if (in_z) trace.final_embedding = best;
    trace.output = apply_chain(x_in, trace.final_params, ModuleMask::all_on());
    return trace;
}

void write_trace_csv(const ItoTrace& trace, const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    require(f != nullptr, ErrorKind::io, "cannot write " + path.string());
    std::fprintf(f, "step,loss,grad_norm,accepted\n");
    for (const auto& r : trace.rows)
        std::fprintf(f, "%zu,%.17g,%.17g,%s\n", r.step, r.loss, r.grad_norm, r.accepted ? "true" : "false");
    const bool ok = std::fclose(f) == 0;
    require(ok, ErrorKind::io, "failed writing " + path.string());
}

nlohmann::json trace_summary_json(const ItoTrace& trace, const ItoConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = {
        {"space", to_string(cfg.space)},
        {"loss", to_string(cfg.loss)},
        {"learning_rate", cfg.learning_rate},
        {"max_steps", cfg.steps()},
        {"beta1", cfg.beta1},
        {"beta2", cfg.beta2},
        {"eps", cfg.eps},
    };
    j["init"] = trace.init_description;
    j["stop_reason"] = trace.stop_reason;
    j["evaluations"] = trace.rows.size();
    if (std::isfinite(trace.final_loss))
        j["final_loss"] = trace.final_loss;
    else
        j["final_loss"] = nullptr;
    j["final_params"] = to_json(trace.final_params);
    if (trace.final_embedding)
        j["final_embedding"] = *trace.final_embedding;
    else
        j["final_embedding"] = nullptr;
    return j;
}

}  // namespace fxfit
