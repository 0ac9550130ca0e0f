#pragma once

#include "morfi/common.hpp"
#include "morfi/morfi.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace morfi {

// SAE decoder rows normalized to unit length, with the original row norms kept
// so raw directions can be reconstructed.
struct Dictionary {
    Eigen::MatrixXd directions; // [F, d_model], unit rows
    Eigen::VectorXd magnitudes; // [F]
    Index latents() const { return directions.rows(); }
    Index model_dim() const { return directions.cols(); }
};

Dictionary normalize_dictionary(const Eigen::MatrixXd& raw);

// One steering intervention: either a single latent's decoder direction or a
// composite SAE-space delta projected through the decoder, signed by polarity,
// scaled by strength alpha and the layer's typical residual norm.
struct SteeringSpec {
    std::variant<Index, Eigen::VectorXd> source; // latent index | SAE-space delta [F]
    int polarity = 1;                            // +1 or -1
    double strength = 0.0;                       // alpha, >= 0
    double scale = 1.0;                          // typical residual norm s_l, > 0
    int layer = 0;

    bool is_latent() const { return std::holds_alternative<Index>(source); }
    Index latent() const { return std::get<Index>(source); }
};

// polarity * strength * scale * unit_direction, in model space. For composite
// sources the delta is projected through the decoder and re-normalized first,
// so the result's norm is always strength * scale.
Eigen::VectorXd build_steering_vector(const Dictionary& dict, const SteeringSpec& spec);

// Mean L2 norm of a sample of residual-stream vectors at the steering layer.
double layer_scale(const std::vector<Eigen::VectorXd>& residuals);

// Anything that can score a (possibly steered) model on a dataset. nullopt
// means the unsteered baseline. Implementations own the model-side details:
// how a spec is applied and what the dataset id resolves to.
class ModelOracle {
public:
    virtual ~ModelOracle() = default;
    virtual double evaluate(const std::optional<SteeringSpec>& spec,
                            const std::string& dataset_id) = 0;
    // The harness serializes calls unless this returns true.
    virtual bool concurrent_safe() const { return false; }
};

// Memoizes evaluations by (source, polarity, strength) and counts how many
// reach the underlying oracle. Deterministic oracles make re-evaluation free.
class CachingOracle {
public:
    explicit CachingOracle(ModelOracle& inner, std::string dataset_id)
        : inner_(inner), dataset_(std::move(dataset_id)) {}

    double baseline();
    double evaluate(const SteeringSpec& spec);
    int64_t call_count() const { return calls_; }

private:
    using Key = std::tuple<int, Index, uint64_t, int, double>; // kind, latent, vec hash, c, alpha
    ModelOracle& inner_;
    std::string dataset_;
    std::map<Key, double> cache_;
    std::optional<double> baseline_;
    int64_t calls_ = 0;
};

struct SteeringRunConfig {
    int polarity = 1;
    double alpha_init = 0.4;
    std::vector<double> grid;  // strictly ascending positive strengths
    double scale = 1.0;        // s_l
    int layer = 0;
    std::string dataset_id = "dev";
    Index screen_keep = 40;
    Index final_keep = 10;

    void validate() const;
};

// 0.05, 0.10, ..., 0.75
std::vector<double> default_strength_grid();

struct ScreenedCandidate {
    Index latent = 0;
    double accuracy = 0.0;
};

struct ScreenOutcome {
    std::vector<ScreenedCandidate> evaluated; // every candidate, input order
    std::vector<ScreenedCandidate> kept;      // accuracy > baseline, desc, truncated
};

// Evaluates every candidate at alpha_init, keeps those strictly beating the
// baseline, sorted by accuracy descending (input order breaks ties), truncated
// to cfg.screen_keep.
ScreenOutcome screen_latents(const std::vector<Index>& candidates, const SteeringRunConfig& cfg,
                             CachingOracle& oracle);

struct TunedCandidate {
    Index latent = 0;
    double alpha_star = 0.0;
    double accuracy = 0.0;        // re-evaluated at alpha_star
    double screen_accuracy = 0.0;
};

// Per surviving candidate, evaluates every grid strength and keeps the argmax
// (ties resolve to the smallest strength).
std::vector<TunedCandidate> grid_search_strength(const std::vector<ScreenedCandidate>& kept,
                                                 const SteeringRunConfig& cfg,
                                                 CachingOracle& oracle);

struct SteeringEntry {
    Index latent = 0;
    double signed_strength = 0.0; // polarity * alpha_star
    double accuracy = 0.0;
    double screen_accuracy = 0.0;
};

struct SteeringResult {
    double baseline = 0.0;
    int polarity = 1;
    std::vector<SteeringEntry> entries;        // accuracy desc, at most final_keep
    std::vector<ScreenedCandidate> screen_log; // every screened candidate
};

// Sorts tuned candidates by accuracy desc (strength asc, latent asc on ties),
// drops any not strictly above baseline, truncates to cfg.final_keep.
std::vector<SteeringEntry> rank_final(const std::vector<TunedCandidate>& tuned,
                                      const SteeringRunConfig& cfg, double baseline);

// Screen -> grid search -> final ranking. Requires alpha_init to be a grid
// point so every reported accuracy is at least its screening accuracy.
SteeringResult run_steering(const std::vector<Index>& candidates, const SteeringRunConfig& cfg,
                            ModelOracle& oracle);

} // namespace morfi
