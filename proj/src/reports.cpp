#include "morfi/reports.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>

namespace morfi {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path);
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw ValidationError("write error on " + path);
}

json load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    json obj = json::parse(in, nullptr, false);
    if (obj.is_discarded()) throw ValidationError(path + ": invalid JSON");
    if (!obj.is_object()) throw ValidationError(path + ": expected a JSON object");
    return obj;
}

const json& require(const json& obj, const char* key, const std::string& path) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw ValidationError(path + ": missing \"" + key + "\"");
    return *it;
}

void check_schema(const json& obj, const std::string& path) {
    const json& v = require(obj, "schema_version", path);
    if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
        throw ValidationError(path + ": unsupported schema_version");
}

double number_at(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number()) throw ValidationError(path + ": \"" + key + "\" must be a number");
    return v.get<double>();
}

int64_t integer_at(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_number_integer())
        throw ValidationError(path + ": \"" + key + "\" must be an integer");
    return v.get<int64_t>();
}

ordered_json entry_to_json(const RankedLatentEntry& e, Index rank) {
    ordered_json obj;
    obj["rank"] = rank;
    obj["latent"] = e.latent;
    obj["frequency"] = e.frequency;
    obj["mean_rho"] = e.mean_rho;
    obj["mean_tau"] = e.mean_tau;
    obj["mean_delta"] = e.mean_delta;
    return obj;
}

std::vector<RankedLatentEntry> entries_from_json(const json& arr, const std::string& path) {
    if (!arr.is_array()) throw ValidationError(path + ": direction entries must be an array");
    std::vector<RankedLatentEntry> out;
    out.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_object()) throw ValidationError(path + ": entry must be an object");
        RankedLatentEntry e;
        e.latent = static_cast<Index>(integer_at(item, "latent", path));
        e.frequency = number_at(item, "frequency", path);
        e.mean_rho = number_at(item, "mean_rho", path);
        e.mean_tau = number_at(item, "mean_tau", path);
        e.mean_delta = number_at(item, "mean_delta", path);
        out.push_back(e);
    }
    return out;
}

const char* direction_name(TrendDirection d) {
    return d == TrendDirection::increasing ? "increasing" : "decreasing";
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    internal_check(res.ec == std::errc(), "to_chars failed on a double");
    return std::string(buf, res.ptr);
}

void write_ranked_csv(const std::string& path, const MonotonicLatents& ranked) {
    auto out = open_out(path);
    out << "rank,direction,latent,frequency,mean_rho,mean_tau,mean_delta\n";
    for (const RankedLatentList* list : {&ranked.increasing, &ranked.decreasing}) {
        Index rank = 0;
        for (const auto& e : list->entries) {
            out << ++rank << ',' << direction_name(list->direction) << ',' << e.latent << ','
                << format_double(e.frequency) << ',' << format_double(e.mean_rho) << ','
                << format_double(e.mean_tau) << ',' << format_double(e.mean_delta) << '\n';
        }
    }
    finish(out, path);
}

void write_ranked_json(const std::string& path, const MonotonicLatents& ranked) {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    for (const RankedLatentList* list : {&ranked.increasing, &ranked.decreasing}) {
        auto& arr = doc[direction_name(list->direction)] = ordered_json::array();
        Index rank = 0;
        for (const auto& e : list->entries) arr.push_back(entry_to_json(e, ++rank));
    }
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

MonotonicLatents read_ranked_json(const std::string& path) {
    const json doc = load_json(path);
    check_schema(doc, path);
    MonotonicLatents out;
    out.increasing.direction = TrendDirection::increasing;
    out.decreasing.direction = TrendDirection::decreasing;
    out.increasing.entries = entries_from_json(require(doc, "increasing", path), path);
    out.decreasing.entries = entries_from_json(require(doc, "decreasing", path), path);
    return out;
}

void write_control_json(const std::string& path, std::span<const Index> latents,
                        std::span<const double> deltas) {
    if (latents.size() != deltas.size())
        throw ValidationError("control report: latents and deltas differ in length");
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["count"] = latents.size();
    auto& arr = doc["latents"] = ordered_json::array();
    for (size_t i = 0; i < latents.size(); ++i) {
        ordered_json item;
        item["latent"] = latents[i];
        item["delta"] = deltas[i];
        arr.push_back(std::move(item));
    }
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

void write_steering_json(const std::string& path, const SteeringResult& result) {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["baseline"] = result.baseline;
    doc["polarity"] = result.polarity;
    auto& entries = doc["entries"] = ordered_json::array();
    for (const auto& e : result.entries) {
        ordered_json item;
        item["latent"] = e.latent;
        item["signed_strength"] = e.signed_strength;
        item["accuracy"] = e.accuracy;
        item["screen_accuracy"] = e.screen_accuracy;
        entries.push_back(std::move(item));
    }
    auto& screen = doc["screen_log"] = ordered_json::array();
    for (const auto& s : result.screen_log) {
        ordered_json item;
        item["latent"] = s.latent;
        item["accuracy"] = s.accuracy;
        screen.push_back(std::move(item));
    }
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

SteeringResult read_steering_json(const std::string& path) {
    const json doc = load_json(path);
    check_schema(doc, path);
    SteeringResult out;
    out.baseline = number_at(doc, "baseline", path);
    out.polarity = static_cast<int>(integer_at(doc, "polarity", path));
    const json& entries = require(doc, "entries", path);
    if (!entries.is_array()) throw ValidationError(path + ": \"entries\" must be an array");
    for (const auto& item : entries) {
        SteeringEntry e;
        e.latent = static_cast<Index>(integer_at(item, "latent", path));
        e.signed_strength = number_at(item, "signed_strength", path);
        e.accuracy = number_at(item, "accuracy", path);
        e.screen_accuracy = number_at(item, "screen_accuracy", path);
        out.entries.push_back(e);
    }
    const json& screen = require(doc, "screen_log", path);
    if (!screen.is_array()) throw ValidationError(path + ": \"screen_log\" must be an array");
    for (const auto& item : screen) {
        ScreenedCandidate s;
        s.latent = static_cast<Index>(integer_at(item, "latent", path));
        s.accuracy = number_at(item, "accuracy", path);
        out.screen_log.push_back(s);
    }
    return out;
}

void write_recovery_json(const std::string& path, const RecoveryReport& report) {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["defined"] = report.defined;
    if (report.defined)
        doc["recovered_fraction"] = report.recovered_fraction;
    else
        doc["recovered_fraction"] = nullptr;
    doc["gross_gains"] = report.gross_gains;
    doc["recovered"] = report.recovered;
    doc["total"] = report.total;
    auto& arr = doc["per_relation"] = ordered_json::array();
    for (const auto& rel : report.per_relation) {
        ordered_json item;
        item["relation"] = rel.relation;
        item["share"] = rel.share;
        item["gains"] = rel.gains;
        item["pool"] = rel.pool;
        arr.push_back(std::move(item));
    }
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

void write_recovery_csv(const std::string& path, const RecoveryReport& report) {
    auto out = open_out(path);
    out << "relation,share,gains,pool\n";
    for (const auto& rel : report.per_relation)
        out << rel.relation << ',' << format_double(rel.share) << ',' << rel.gains << ','
            << rel.pool << '\n';
    finish(out, path);
}

void write_truth_json(const std::string& path, std::span<const Index> increasing,
                      std::span<const Index> decreasing) {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["increasing"] = std::vector<Index>(increasing.begin(), increasing.end());
    doc["decreasing"] = std::vector<Index>(decreasing.begin(), decreasing.end());
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

PlantedTruth read_truth_json(const std::string& path) {
    const json doc = load_json(path);
    check_schema(doc, path);
    PlantedTruth out;
    for (auto [key, dst] : {std::pair{"increasing", &out.increasing},
                            std::pair{"decreasing", &out.decreasing}}) {
        const json& arr = require(doc, key, path);
        if (!arr.is_array())
            throw ValidationError(path + ": \"" + key + "\" must be an array");
        for (const auto& v : arr) {
            if (!v.is_number_integer())
                throw ValidationError(path + ": \"" + key + "\" entries must be integers");
            dst->push_back(v.get<Index>());
        }
    }
    return out;
}

std::string manifest_path_for(const std::string& output_path) {
    return output_path + ".manifest.json";
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    ordered_json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["command"] = manifest.command;
    doc["toolkit_version"] = kToolkitVersion;
    doc["config"] = manifest.config;
    doc["seed"] = manifest.seed;
    doc["threads"] = manifest.threads;
    doc["inputs"] = manifest.inputs;
    doc["outputs"] = manifest.outputs;
    doc["wall_seconds"] = manifest.wall_seconds;
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
    doc["written_at"] = stamp;
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
    finish(out, path);
}

} // namespace morfi
