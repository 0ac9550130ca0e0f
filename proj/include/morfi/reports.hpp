#pragma once

#include "morfi/knowledge.hpp"
#include "morfi/morfi.hpp"
#include "morfi/steering.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <vector>

namespace morfi {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

// Shortest round-trip decimal form, '.' separator, locale-free.
std::string format_double(double v);

// CSV columns: rank,direction,latent,frequency,mean_rho,mean_tau,mean_delta.
// Increasing entries first, rank restarting at 1 per direction.
void write_ranked_csv(const std::string& path, const MonotonicLatents& ranked);
void write_ranked_json(const std::string& path, const MonotonicLatents& ranked);
MonotonicLatents read_ranked_json(const std::string& path);

// latents come smallest-|delta| first, paired with their full-data deltas.
void write_control_json(const std::string& path, std::span<const Index> latents,
                        std::span<const double> deltas);

void write_steering_json(const std::string& path, const SteeringResult& result);
SteeringResult read_steering_json(const std::string& path);

// recovered_fraction serializes as null while the report is undefined.
void write_recovery_json(const std::string& path, const RecoveryReport& report);
// CSV columns: relation,share,gains,pool (thresholded per-relation rows only).
void write_recovery_csv(const std::string& path, const RecoveryReport& report);

// Planted ground truth alongside a generated tensor.
void write_truth_json(const std::string& path, std::span<const Index> increasing,
                      std::span<const Index> decreasing);
struct PlantedTruth {
    std::vector<Index> increasing;
    std::vector<Index> decreasing;
};
PlantedTruth read_truth_json(const std::string& path);

// Every command drops one of these next to its primary output. The written_at
// and wall_seconds fields are the only parts allowed to differ between
// otherwise identical runs.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json config; // resolved settings, flags folded in
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    uint64_t seed = 0;
    int threads = 1;
    double wall_seconds = 0.0;
};

std::string manifest_path_for(const std::string& output_path);
void write_manifest(const std::string& path, const RunManifest& manifest);

} // namespace morfi
