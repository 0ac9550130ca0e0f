#pragma once

#include "morfi/tensor.hpp"

#include <utility>
#include <vector>

namespace morfi {

enum class ConditionAxis { epochs, mixtures };
enum class TrendDirection { increasing, decreasing };

struct MorfiConfig {
    // The condition axis that gets averaged out (X); the other axis carries
    // the trend being tested (Y).
    ConditionAxis aggregate_axis = ConditionAxis::epochs;
    Index replicates = 1000; // bootstrap replicates R
    Index top_k = 1000;      // per-replicate selection depth K
    double alpha_sig = 0.05; // significance level both trend tests must clear
    uint64_t seed = 0;
    int threads = 1; // <= 0 means use the hardware
};

struct RankedLatentEntry {
    Index latent = 0;
    double frequency = 0.0;  // selections / R
    double mean_rho = 0.0;   // means over the replicates that selected the latent
    double mean_tau = 0.0;
    double mean_delta = 0.0;
};

struct RankedLatentList {
    TrendDirection direction = TrendDirection::increasing;
    std::vector<RankedLatentEntry> entries; // frequency desc, |mean_delta| desc, latent asc
};

struct MonotonicLatents {
    RankedLatentList increasing;
    RankedLatentList decreasing;
};

// Bootstrap trend scan: resample the sample axis R times; per replicate,
// average over X, run Spearman (against the Y axis labels) and Mann-Kendall
// per latent, keep latents where both tests are significant with agreeing
// sign, and select the top K by last-minus-first activation delta in each
// direction. Latents are ranked by how often they were selected.
MonotonicLatents identify_monotonic_latents(const ActivationTensor<double>& a,
                                            const MorfiConfig& cfg);

// Mean activation shift per latent between the last and first trend
// condition, averaged over samples and the aggregated axis. The SAE-space
// ingredient of a composite steering direction.
struct CompositeDirection {
    Eigen::VectorXd delta; // [F]
    ConditionAxis trend_axis;
};
CompositeDirection composite_direction(const ActivationTensor<double>& a, const MorfiConfig& cfg);

// Latents showing the least movement: not trend-significant on the full
// (non-bootstrap) data and with the smallest |last - first| delta. Returns
// n_control latent indices, smallest delta first.
std::vector<Index> select_control_group(const ActivationTensor<double>& a, const MorfiConfig& cfg,
                                        Index n_control);

} // namespace morfi
