#include <cmath>

#include <nlohmann/json.hpp>

#include "fxfit/analysis.hpp"

namespace fxfit {

namespace {

double round4(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace

MetricsReport compute_metrics(const StereoBuffer& x, const StereoBuffer* reference, const AFWeights& w) {
    MetricsReport r;
    r.drv = drv(x);
    r.features = feature_vector(x);
    r.integrated_loudness = integrated_loudness(x);
    if (reference) r.af_vs_reference = af_loss(x, *reference, w);
    return r;
}

nlohmann::json to_json(const FeatureVector& f) {
    return {
        {"rms_l", round4(f.rms_l)},
        {"rms_r", round4(f.rms_r)},
        {"crest_l", round4(f.crest_l)},
        {"crest_r", round4(f.crest_r)},
        {"stereo_width", f.stereo_width},
        {"stereo_imbalance", f.stereo_imbalance},
        {"spectral_centroid", f.spectral_centroid},
        {"low_high_ratio", round4(f.low_high_ratio)},
    };
}

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["drv"] = round4(report.drv);
    j["features"] = to_json(report.features);
    if (std::isfinite(report.integrated_loudness))
        j["integrated_loudness"] = round4(report.integrated_loudness);
    else
        j["integrated_loudness"] = nullptr;
    if (report.af_vs_reference)
        j["af_vs_reference"] = *report.af_vs_reference;
    else
        j["af_vs_reference"] = nullptr;
    return j;
}

}  // namespace fxfit
