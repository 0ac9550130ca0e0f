#pragma once

#include "morfi/morfi.hpp"
#include "morfi/steering.hpp"

#include <array>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace morfi {

// Synthetic activation tensor with known monotonic latents: a planted
// increasing latent's mean at trend position y is baseline + y*step, a
// decreasing one mirrors it (baseline + (Y-1-y)*step), everything else sits at
// the baseline, and every cell receives i.i.d. Gaussian noise.
struct PlantConfig {
    std::array<Index, 4> shape = {6, 7, 2048, 64}; // [T, P, F, N]
    ConditionAxis trend_axis = ConditionAxis::mixtures;
    std::vector<Index> increasing;
    std::vector<Index> decreasing;
    double step = 1.0;
    double sigma = 0.1;
    double baseline = 0.0;
    uint64_t seed = 0;
};

struct PlantedTensor {
    ActivationTensor<double> tensor;
    std::vector<Index> increasing;
    std::vector<Index> decreasing;
};

PlantedTensor generate_planted_tensor(const PlantConfig& cfg);

// A model stand-in whose accuracy peaks when the steering vector's projection
// onto one latent's direction hits polarity * alpha_opt (in strength units,
// i.e. after dividing out the layer scale):
//   acc = clamp(base + max_gain * exp(-(proj - c* alpha_opt)^2 / (2 width^2))
//               + distractor_bonus - off_target_rate * orthogonal_mass)
// Distractor latents add their configured bonus only when steered directly at
// exactly alpha_init. Pure function: deterministic and concurrency-safe.
struct CausalOracleConfig {
    Index latent = 0;   // where the true gain concentrates
    int polarity = 1;
    double alpha_opt = 0.35;
    double base_accuracy = 0.3;
    double max_gain = 0.2;
    double width = 0.1;
    double off_target_rate = 0.05;
    double alpha_init = 0.4;
    std::vector<std::pair<Index, double>> distractors;
};

std::unique_ptr<ModelOracle> make_causal_oracle(const CausalOracleConfig& cfg, Dictionary dict);

// Seeded Gaussian rows, unit-normalized: a stand-in SAE decoder.
Dictionary random_dictionary(Index latents, Index model_dim, uint64_t seed);

struct PRScore {
    double precision = 1.0;
    double recall = 0.0;
    bool zero_support = false; // empty prediction (or empty truth): precision/recall vacuous
};

// Precision/recall of the top `depth` entries of one ranked list against a
// planted truth set.
PRScore score_direction(std::span<const RankedLatentEntry> ranked, std::span<const Index> truth,
                        Index depth);

struct RecoveryScore {
    PRScore increasing;
    PRScore decreasing;
};

RecoveryScore score_recovery(const MonotonicLatents& predicted, std::span<const Index> truth_inc,
                             std::span<const Index> truth_dec, Index depth);

} // namespace morfi
