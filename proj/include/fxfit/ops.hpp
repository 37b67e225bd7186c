#pragma once

#include <memory>

#include "fxfit/analysis.hpp"
#include "fxfit/audio.hpp"
#include "fxfit/grad.hpp"
#include "fxfit/params.hpp"

// Tape primitives for the chain and its losses. Audio nodes hold the left
// channel followed by the right channel.
namespace fxfit::ops {

/// Unconstrained (46) -> physical (46).
grad::Var reparam(grad::Var u);

/// Unit coordinates (46) -> physical (46).
grad::Var from_unit(grad::Var t);

/// Renders x through the chain with physical parameters `theta`.
/// Throws a range error when theta violates an ordering constraint.
grad::Var render(grad::Var theta, const StereoBuffer& x, const ModuleMask& mask);

grad::Var mss(grad::Var audio, std::shared_ptr<const MssReference> ref);
grad::Var af(grad::Var audio, std::shared_ptr<const AfReference> ref);

StereoBuffer to_buffer(const std::vector<double>& audio);

enum class LossKind { mss, af };

/// loss(apply_chain(x, reparam(u), mask), reference).
grad::Loss chain_loss(const StereoBuffer& x, const StereoBuffer& reference, LossKind kind,
                      const ModuleMask& mask = ModuleMask::all_on(), const AFWeights& w = {});

/// Loss on physical parameters produced by `decode`, a tape function of the
/// optimized variable.
grad::Loss composed_loss(std::function<grad::Var(grad::Tape&, grad::Var)> decode, const StereoBuffer& x,
                         const StereoBuffer& reference, LossKind kind,
                         const ModuleMask& mask = ModuleMask::all_on(), const AFWeights& w = {});

/// Names of the 46 parameters in flattening order.
std::vector<std::string> param_names();

}  // namespace fxfit::ops
