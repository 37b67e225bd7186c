#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fxfit/analysis.hpp"
#include "fxfit/audio.hpp"
#include "fxfit/grad.hpp"
#include "fxfit/ops.hpp"
#include "fxfit/params.hpp"

namespace fxfit {

// ---------------------------------------------------------------------------
// RAdam

struct RAdamConfig {
    double learning_rate = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// When false the variance-rectified branch is never taken and the update
    /// is bias-corrected momentum SGD.
    bool rectify = true;
};

struct RAdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t t = 0;
    RAdamConfig config;

    RAdamState() = default;
    RAdamState(std::size_t dim, const RAdamConfig& cfg) : m(dim, 0.0), v(dim, 0.0), config(cfg) {}
};

/// One update of `params` in place. Throws shape on size mismatch and
/// non_finite on a non-finite gradient.
void radam_step(RAdamState& state, std::span<const double> grad, std::span<double> params);

/// rho_inf - 2 t beta2^t / (1 - beta2^t).
double radam_rho(std::size_t t, double beta2);

// ---------------------------------------------------------------------------
// Converter: u = w2 tanh(w1 z + b1) + b2, theta = unconstrained_to_params(u)

inline constexpr std::size_t kDefaultEmbeddingDim = 64;
inline constexpr std::size_t kDefaultHiddenDim = 128;
inline constexpr std::size_t kMaxEmbeddingDim = 4096;

class Converter {
  public:
    /// Weights uniform in +-1/sqrt(fan_in); b1 = 0; b2 = unconstrained
    /// neutral parameters, so decode(0) == neutral_params().
    static Converter init(std::size_t embedding_dim, std::size_t hidden_dim, std::uint64_t seed);

    std::size_t embedding_dim() const noexcept { return d_; }
    std::size_t hidden_dim() const noexcept { return h_; }

    std::vector<double> decode_unconstrained(std::span<const double> z) const;
    ChainParams decode(std::span<const double> z) const;
    /// Tape version producing physical parameters.
    grad::Var decode(grad::Var z) const;

    bool operator==(const Converter&) const = default;

    friend nlohmann::json to_json(const Converter& c);
    friend Converter converter_from_json(const nlohmann::json& j);

  private:
    std::size_t d_ = 0;
    std::size_t h_ = 0;
    std::vector<double> w1_;  // h x d
    std::vector<double> b1_;  // h
    std::vector<double> w2_;  // 46 x h
    std::vector<double> b2_;  // 46
};

nlohmann::json to_json(const Converter& c);
Converter converter_from_json(const nlohmann::json& j);
void save_converter(const Converter& c, const std::filesystem::path& path);
Converter load_converter(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Optimization loop

enum class ItoSpace { theta, z };

std::string_view to_string(ItoSpace s);
std::string_view to_string(ops::LossKind k);

struct ItoConfig {
    ItoSpace space = ItoSpace::z;
    ops::LossKind loss = ops::LossKind::af;
    double learning_rate = 2e-4;
    /// Defaults to 100 for z and 2000 for theta.
    std::optional<std::size_t> max_steps;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    AFWeights af_weights;
    /// A starting loss at or below this is already converged.
    double converged_loss = 1e-12;

    std::size_t steps() const { return max_steps.value_or(space == ItoSpace::z ? 100 : 2000); }
    void validate() const;
};

struct ItoRow {
    std::size_t step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    bool accepted = false;
};

struct ItoTrace {
    std::vector<ItoRow> rows;
    std::string stop_reason;
    std::string init_description;
    /// Best accepted point.
    ChainParams final_params{};
    std::optional<std::vector<double>> final_embedding;
    double final_loss = 0.0;
    StereoBuffer output;
};

/// theta-space start: unit coordinates (46), kept in [0, 1] by projection
/// after every step. z-space start: embedding.
struct ItoInit {
    std::vector<double> values;
    std::string description;

    static ItoInit theta_midpoint();
    static ItoInit theta(const ChainParams& p);
    static ItoInit embedding_zero(std::size_t dim);
};

/// Descends from `init` until max_steps or the first non-improving step,
/// which is recorded as rejected and discarded. A step whose decoded
/// parameters violate an ordering constraint is rejected the same way.
ItoTrace run_ito(const StereoBuffer& x_in, const StereoBuffer& x_ref, const ItoConfig& cfg, const ItoInit& init,
                 const Converter* converter = nullptr);

/// `step,loss,grad_norm,accepted` with full-precision numbers.
void write_trace_csv(const ItoTrace& trace, const std::filesystem::path& path);
nlohmann::json trace_summary_json(const ItoTrace& trace, const ItoConfig& cfg);

}  // namespace fxfit
