#include "morfi/steering.hpp"

#include <algorithm>
#include <cmath>

namespace morfi {

Dictionary normalize_dictionary(const Eigen::MatrixXd& raw) {
    if (raw.rows() < 1 || raw.cols() < 1)
        throw ValidationError("normalize_dictionary: empty matrix");
    Dictionary d;
    d.directions = raw;
    d.magnitudes.resize(raw.rows());
    for (Index i = 0; i < raw.rows(); ++i) {
        const double norm = raw.row(i).norm();
        if (!std::isfinite(norm))
            throw ValidationError("normalize_dictionary: row " + std::to_string(i) +
                                  " contains NaN or Inf");
        if (norm == 0.0)
            throw ValidationError("normalize_dictionary: row " + std::to_string(i) +
                                  " has zero norm and no direction");
        d.magnitudes(i) = norm;
        d.directions.row(i) /= norm;
    }
    return d;
}

static void validate_spec(const Dictionary& dict, const SteeringSpec& spec) {
    if (spec.polarity != 1 && spec.polarity != -1)
        throw ValidationError("steering spec: polarity must be +1 or -1");
    if (!(spec.strength >= 0.0) || !std::isfinite(spec.strength))
        throw ValidationError("steering spec: strength must be finite and >= 0");
    if (!(spec.scale > 0.0) || !std::isfinite(spec.scale))
        throw ValidationError("steering spec: scale must be finite and > 0");
    if (spec.is_latent()) {
        if (spec.latent() < 0 || spec.latent() >= dict.latents())
            throw ValidationError("steering spec: latent " + std::to_string(spec.latent()) +
                                  " outside the dictionary");
    } else {
        const auto& delta = std::get<Eigen::VectorXd>(spec.source);
        if (delta.size() != dict.latents())
            throw ValidationError("steering spec: composite delta length != dictionary latents");
    }
}

Eigen::VectorXd build_steering_vector(const Dictionary& dict, const SteeringSpec& spec) {
    validate_spec(dict, spec);
    const double gain = spec.polarity * spec.strength * spec.scale;
    if (spec.is_latent()) return gain * dict.directions.row(spec.latent()).transpose();

    const auto& delta = std::get<Eigen::VectorXd>(spec.source);
    Eigen::VectorXd projected = dict.directions.transpose() * delta; // [d_model]
    const double norm = projected.norm();
    if (norm == 0.0)
        throw ValidationError("steering spec: composite delta projects to the zero vector");
    return gain * (projected / norm);
}

double layer_scale(const std::vector<Eigen::VectorXd>& residuals) {
    if (residuals.empty()) throw ValidationError("layer_scale: no residual vectors given");
    double acc = 0.0;
    for (const auto& v : residuals) {
        if (v.size() == 0) throw ValidationError("layer_scale: empty residual vector");
        acc += v.norm();
    }
    return acc / static_cast<double>(residuals.size());
}

double CachingOracle::baseline() {
    if (!baseline_) {
        ++calls_;
        baseline_ = inner_.evaluate(std::nullopt, dataset_);
    }
    return *baseline_;
}

double CachingOracle::evaluate(const SteeringSpec& spec) {
    Key key;
    if (spec.is_latent()) {
        key = {0, spec.latent(), 0, spec.polarity, spec.strength};
    } else {
        const auto& delta = std::get<Eigen::VectorXd>(spec.source);
        uint64_t h = 1469598103934665603ULL; // FNV-1a over the raw bytes
        const auto* bytes = reinterpret_cast<const unsigned char*>(delta.data());
        for (size_t i = 0; i < static_cast<size_t>(delta.size()) * sizeof(double); ++i)
            h = (h ^ bytes[i]) * 1099511628211ULL;
        key = {1, delta.size(), h, spec.polarity, spec.strength};
    }
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    ++calls_;
    const double acc = inner_.evaluate(spec, dataset_);
    cache_.emplace(key, acc);
    return acc;
}

std::vector<double> default_strength_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 15; ++i) grid.push_back(0.05 * i);
    return grid;
}

void SteeringRunConfig::validate() const {
    if (polarity != 1 && polarity != -1)
        throw ValidationError("steering config: polarity must be +1 or -1");
    if (!(alpha_init > 0.0)) throw ValidationError("steering config: alpha_init must be > 0");
    if (grid.empty()) throw ValidationError("steering config: strength grid is empty");
    for (size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ValidationError("steering config: grid strengths must be > 0");
        if (i > 0 && !(grid[i - 1] < grid[i]))
            throw ValidationError("steering config: grid must be strictly ascending");
    }
    if (!(scale > 0.0)) throw ValidationError("steering config: scale must be > 0");
    if (screen_keep < 1 || final_keep < 1)
        throw ValidationError("steering config: screen_keep and final_keep must be >= 1");
}

static SteeringSpec latent_spec(Index latent, double strength, const SteeringRunConfig& cfg) {
    SteeringSpec s;
    s.source = latent;
    s.polarity = cfg.polarity;
    s.strength = strength;
    s.scale = cfg.scale;
    s.layer = cfg.layer;
    return s;
}

ScreenOutcome screen_latents(const std::vector<Index>& candidates, const SteeringRunConfig& cfg,
                             CachingOracle& oracle) {
    cfg.validate();
    ScreenOutcome out;
    const double base = oracle.baseline();
    out.evaluated.reserve(candidates.size());
    for (Index latent : candidates)
        out.evaluated.push_back({latent, oracle.evaluate(latent_spec(latent, cfg.alpha_init, cfg))});

    out.kept = out.evaluated;
    std::erase_if(out.kept, [base](const ScreenedCandidate& c) { return !(c.accuracy > base); });
    std::stable_sort(out.kept.begin(), out.kept.end(),
                     [](const ScreenedCandidate& a, const ScreenedCandidate& b) {
                         return a.accuracy > b.accuracy;
                     });
    if (static_cast<Index>(out.kept.size()) > cfg.screen_keep)
        out.kept.resize(static_cast<size_t>(cfg.screen_keep));
    return out;
}

std::vector<TunedCandidate> grid_search_strength(const std::vector<ScreenedCandidate>& kept,
                                                 const SteeringRunConfig& cfg,
                                                 CachingOracle& oracle) {
    cfg.validate();
    std::vector<TunedCandidate> tuned;
    tuned.reserve(kept.size());
    for (const auto& cand : kept) {
        double best_alpha = cfg.grid.front();
        double best_acc = -1.0;
        for (double alpha : cfg.grid) { // ascending, so ties keep the smallest strength
            const double acc = oracle.evaluate(latent_spec(cand.latent, alpha, cfg));
            if (acc > best_acc) {
                best_acc = acc;
                best_alpha = alpha;
            }
        }
        TunedCandidate t;
        t.latent = cand.latent;
        t.alpha_star = best_alpha;
        t.accuracy = oracle.evaluate(latent_spec(cand.latent, best_alpha, cfg));
        t.screen_accuracy = cand.accuracy;
        tuned.push_back(t);
    }
    return tuned;
}

std::vector<SteeringEntry> rank_final(const std::vector<TunedCandidate>& tuned,
                                      const SteeringRunConfig& cfg, double baseline) {
    std::vector<TunedCandidate> sorted = tuned;
    std::sort(sorted.begin(), sorted.end(), [](const TunedCandidate& a, const TunedCandidate& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        if (a.alpha_star != b.alpha_star) return a.alpha_star < b.alpha_star;
        return a.latent < b.latent;
    });
    std::vector<SteeringEntry> out;
    for (const auto& t : sorted) {
        if (!(t.accuracy > baseline)) continue; // cannot happen when alpha_init is a grid point
        if (static_cast<Index>(out.size()) >= cfg.final_keep) break;
        out.push_back({t.latent, cfg.polarity * t.alpha_star, t.accuracy, t.screen_accuracy});
    }
    return out;
}

SteeringResult run_steering(const std::vector<Index>& candidates, const SteeringRunConfig& cfg,
                            ModelOracle& oracle) {
    cfg.validate();
    if (candidates.empty()) throw ValidationError("steering: candidate list is empty");
    const bool on_grid = std::any_of(cfg.grid.begin(), cfg.grid.end(), [&](double g) {
        return std::fabs(g - cfg.alpha_init) <= 1e-12;
    });
    if (!on_grid)
        throw ValidationError("steering: alpha_init must be one of the grid strengths");

    CachingOracle cache(oracle, cfg.dataset_id);
    SteeringResult result;
    result.polarity = cfg.polarity;
    result.baseline = cache.baseline();

    ScreenOutcome screened = screen_latents(candidates, cfg, cache);
    result.screen_log = std::move(screened.evaluated);
    const auto tuned = grid_search_strength(screened.kept, cfg, cache);
    result.entries = rank_final(tuned, cfg, result.baseline);
    return result;
}

} // namespace morfi
