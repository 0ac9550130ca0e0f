#include "morfi/synth.hpp"

#include "morfi/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace morfi {

PlantedTensor generate_planted_tensor(const PlantConfig& cfg) {
    const auto [t_len, p_len, f, n] = cfg.shape;
    if (t_len < 1 || p_len < 1 || f < 1 || n < 1)
        throw ValidationError("plant: every dimension must be >= 1");
    if (!(cfg.step >= 0.0) || !(cfg.sigma >= 0.0))
        throw ValidationError("plant: step and sigma must be >= 0");

    std::unordered_set<Index> seen;
    for (const auto* set : {&cfg.increasing, &cfg.decreasing}) {
        for (Index lat : *set) {
            if (lat < 0 || lat >= f)
                throw ValidationError("plant: latent " + std::to_string(lat) + " outside [0, " +
                                      std::to_string(f) + ")");
            if (!seen.insert(lat).second)
                throw ValidationError("plant: latent " + std::to_string(lat) +
                                      " planted more than once");
        }
    }

    PlantedTensor out;
    out.increasing = cfg.increasing;
    out.decreasing = cfg.decreasing;

    ActivationTensor<double>& tensor = out.tensor;
    tensor.data.resize(t_len, p_len, f, n);
    tensor.epoch_axis.resize(static_cast<size_t>(t_len));
    for (Index i = 0; i < t_len; ++i) tensor.epoch_axis[static_cast<size_t>(i)] = static_cast<double>(i + 1);
    tensor.mixture_axis.resize(static_cast<size_t>(p_len));
    for (Index i = 0; i < p_len; ++i) tensor.mixture_axis[static_cast<size_t>(i)] = static_cast<double>(i);
    tensor.sample_ids.resize(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "synth_%04lld", static_cast<long long>(i));
        tensor.sample_ids[static_cast<size_t>(i)] = buf;
    }

    // per-latent trend profile, indexed by position along the trend axis
    const bool on_mixtures = cfg.trend_axis == ConditionAxis::mixtures;
    const Index y_len = on_mixtures ? p_len : t_len;
    std::vector<int8_t> kind(static_cast<size_t>(f), 0);
    for (Index lat : cfg.increasing) kind[static_cast<size_t>(lat)] = 1;
    for (Index lat : cfg.decreasing) kind[static_cast<size_t>(lat)] = -1;

    CounterRng rng(cfg.seed, 0);
    double* dst = tensor.data.data();
    for (Index ti = 0; ti < t_len; ++ti) {
        for (Index pi = 0; pi < p_len; ++pi) {
            const Index y = on_mixtures ? pi : ti;
            for (Index lat = 0; lat < f; ++lat) {
                double mean = cfg.baseline;
                if (kind[static_cast<size_t>(lat)] == 1)
                    mean += static_cast<double>(y) * cfg.step;
                else if (kind[static_cast<size_t>(lat)] == -1)
                    mean += static_cast<double>(y_len - 1 - y) * cfg.step;
                for (Index s = 0; s < n; ++s)
                    *dst++ = mean + cfg.sigma * rng.next_gaussian();
            }
        }
    }
    tensor.validate();
    return out;
}

namespace {

class CausalOracle final : public ModelOracle {
public:
    CausalOracle(CausalOracleConfig cfg, Dictionary dict)
        : cfg_(std::move(cfg)), dict_(std::move(dict)) {
        if (cfg_.latent < 0 || cfg_.latent >= dict_.latents())
            throw ValidationError("causal oracle: gain latent outside the dictionary");
        if (cfg_.polarity != 1 && cfg_.polarity != -1)
            throw ValidationError("causal oracle: polarity must be +1 or -1");
        if (!(cfg_.width > 0.0)) throw ValidationError("causal oracle: width must be > 0");
        for (const auto& [lat, gain] : cfg_.distractors)
            if (lat < 0 || lat >= dict_.latents())
                throw ValidationError("causal oracle: distractor latent outside the dictionary");
    }

    double evaluate(const std::optional<SteeringSpec>& spec, const std::string&) override {
        if (!spec) return clamp(cfg_.base_accuracy);
        const Eigen::VectorXd u = build_steering_vector(dict_, *spec);
        const Eigen::VectorXd scaled = u / spec->scale; // back to strength units
        const double proj = scaled.dot(dict_.directions.row(cfg_.latent).transpose());
        const double target = cfg_.polarity * cfg_.alpha_opt;
        const double z = (proj - target) / cfg_.width;
        double acc = cfg_.base_accuracy + cfg_.max_gain * std::exp(-0.5 * z * z);

        if (spec->is_latent() && std::fabs(spec->strength - cfg_.alpha_init) <= 1e-12) {
            for (const auto& [lat, gain] : cfg_.distractors)
                if (lat == spec->latent()) acc += gain;
        }

        const double orth2 = std::max(0.0, scaled.squaredNorm() - proj * proj);
        acc -= cfg_.off_target_rate * std::sqrt(orth2);
        return clamp(acc);
    }

    bool concurrent_safe() const override { return true; }

private:
    static double clamp(double acc) { return std::clamp(acc, 0.0, 1.0); }
    CausalOracleConfig cfg_;
    Dictionary dict_;
};

} // namespace

std::unique_ptr<ModelOracle> make_causal_oracle(const CausalOracleConfig& cfg, Dictionary dict) {
    return std::make_unique<CausalOracle>(cfg, std::move(dict));
}

Dictionary random_dictionary(Index latents, Index model_dim, uint64_t seed) {
    if (latents < 1 || model_dim < 1)
        throw ValidationError("dictionary: latents and model_dim must be >= 1");
    Eigen::MatrixXd raw(latents, model_dim);
    CounterRng rng(seed, 1);
    for (Index r = 0; r < latents; ++r)
        for (Index c = 0; c < model_dim; ++c) raw(r, c) = rng.next_gaussian();
    return normalize_dictionary(raw);
}

PRScore score_direction(std::span<const RankedLatentEntry> ranked, std::span<const Index> truth,
                        Index depth) {
    if (depth < 1) throw ValidationError("score_recovery: depth must be >= 1");
    std::unordered_set<Index> truth_set(truth.begin(), truth.end());
    const auto taken = std::min<size_t>(static_cast<size_t>(depth), ranked.size());
    Index hits = 0;
    for (size_t i = 0; i < taken; ++i)
        if (truth_set.count(ranked[i].latent)) ++hits;

    PRScore score;
    score.zero_support = taken == 0 || truth_set.empty();
    score.precision = taken == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(taken);
    score.recall = truth_set.empty()
                       ? 1.0
                       : static_cast<double>(hits) / static_cast<double>(truth_set.size());
    return score;
}

RecoveryScore score_recovery(const MonotonicLatents& predicted, std::span<const Index> truth_inc,
                             std::span<const Index> truth_dec, Index depth) {
    RecoveryScore out;
    out.increasing = score_direction(predicted.increasing.entries, truth_inc, depth);
    out.decreasing = score_direction(predicted.decreasing.entries, truth_dec, depth);
    return out;
}

} // namespace morfi
