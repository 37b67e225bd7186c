#include "fxfit/ops.hpp"

#include "fxfit/error.hpp"
#include "fxfit/fx.hpp"

namespace fxfit::ops {

using grad::Var;

namespace {

std::vector<double> flatten(const StereoBuffer& x) {
    std::vector<double> v;
    v.reserve(2 * x.size());
    v.insert(v.end(), x.left.begin(), x.left.end());
    v.insert(v.end(), x.right.begin(), x.right.end());
    return v;
}

}  // namespace

StereoBuffer to_buffer(const std::vector<double>& audio) {
    require(audio.size() % 2 == 0, ErrorKind::shape, "audio node has odd length");
    const auto half = static_cast<std::ptrdiff_t>(audio.size() / 2);
    return StereoBuffer(std::vector<double>(audio.begin(), audio.begin() + half),
                        std::vector<double>(audio.begin() + half, audio.end()));
}

Var reparam(Var u) {
    require(u.size() == kNumParams, ErrorKind::shape, "reparam expects 46 values");
    const auto& schema = param_schema();
    const auto& uv = u.value();
    std::vector<double> theta(kNumParams), dtheta(kNumParams);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        theta[i] = to_physical(schema[i], uv[i]);
        dtheta[i] = to_physical_derivative(schema[i], uv[i]);
    }
    return u.tape->push(std::move(theta), {u},
                        [d = std::move(dtheta)](std::span<const double> g, std::span<std::vector<double>*> pg) {
                            for (std::size_t i = 0; i < d.size(); ++i) (*pg[0])[i] += d[i] * g[i];
                        });
}

Var from_unit(Var t) {
    require(t.size() == kNumParams, ErrorKind::shape, "from_unit expects 46 values");
    const auto& schema = param_schema();
    const auto& tv = t.value();
    std::vector<double> theta(kNumParams), dtheta(kNumParams);
    for (std::size_t i = 0; i < kNumParams; ++i) {
        theta[i] = fxfit::from_unit(schema[i], tv[i]);
        dtheta[i] = from_unit_derivative(schema[i], tv[i]);
    }
    return t.tape->push(std::move(theta), {t},
                        [d = std::move(dtheta)](std::span<const double> g, std::span<std::vector<double>*> pg) {
                            for (std::size_t i = 0; i < d.size(); ++i) (*pg[0])[i] += d[i] * g[i];
                        });
}

Var render(Var theta, const StereoBuffer& x, const ModuleMask& mask) {
    require(theta.size() == kNumParams, ErrorKind::shape, "render expects 46 parameters");
    const ChainParams p = ChainParams::from_vector(theta.value());
    grad::Tape& tape = *theta.tape;
    if (!tape.recording()) return tape.push(flatten(apply_chain(x, p, mask)), {theta}, {});
    auto rec = std::make_shared<ChainRecording>(x, p, mask);
    return tape.push(flatten(rec->output()), {theta},
                     [rec](std::span<const double> g, std::span<std::vector<double>*> pg) {
                         const std::size_t n = g.size() / 2;
                         StereoBuffer gb(std::vector<double>(g.begin(), g.begin() + n),
                                         std::vector<double>(g.begin() + n, g.end()));
                         const auto d = rec->backward(gb);
                         for (std::size_t i = 0; i < kNumParams; ++i) (*pg[0])[i] += d[i];
                     });
}

namespace {

template <class Ref>
Var spectral_loss(Var audio, std::shared_ptr<const Ref> ref) {
    grad::Tape& tape = *audio.tape;
    const StereoBuffer a = to_buffer(audio.value());
    if (!tape.recording()) return tape.push({ref->loss(a)}, {audio}, {});
    StereoBuffer g(a.size());
    const double loss = ref->loss_and_gradient(a, g);
    std::vector<double> flat = flatten(g);
    return tape.push({loss}, {audio},
                     [flat = std::move(flat)](std::span<const double> og, std::span<std::vector<double>*> pg) {
                         auto& dst = *pg[0];
                         for (std::size_t i = 0; i < flat.size(); ++i) dst[i] += og[0] * flat[i];
                     });
}

}  // namespace

Var mss(Var audio, std::shared_ptr<const MssReference> ref) { return spectral_loss(audio, std::move(ref)); }
Var af(Var audio, std::shared_ptr<const AfReference> ref) { return spectral_loss(audio, std::move(ref)); }

grad::Loss composed_loss(std::function<Var(grad::Tape&, Var)> decode, const StereoBuffer& x,
                         const StereoBuffer& reference, LossKind kind, const ModuleMask& mask,
                         const AFWeights& w) {
    x.validate();
    if (kind == LossKind::mss) {
        require(x.size() == reference.size(), ErrorKind::shape, "MSS loss needs equal-length input and reference");
        auto ref = std::make_shared<const MssReference>(reference);
        return [decode, x, mask, ref](grad::Tape& t, Var v) { return mss(render(decode(t, v), x, mask), ref); };
    }
    auto ref = std::make_shared<const AfReference>(reference, w);
    return [decode, x, mask, ref](grad::Tape& t, Var v) { return af(render(decode(t, v), x, mask), ref); };
}

grad::Loss chain_loss(const StereoBuffer& x, const StereoBuffer& reference, LossKind kind, const ModuleMask& mask,
                      const AFWeights& w) {
    return composed_loss([](grad::Tape&, Var u) { return reparam(u); }, x, reference, kind, mask, w);
}

std::vector<std::string> param_names() {
    std::vector<std::string> out;
    for (const auto& s : param_schema()) out.push_back(s.full_name());
    return out;
}

}  // namespace fxfit::ops
