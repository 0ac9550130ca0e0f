#include <CLI11.hpp>
#include <json.hpp>

#include "morfi/answer_oracles.hpp"
#include "morfi/records_io.hpp"
#include "morfi/reports.hpp"
#include "morfi/subprocess_oracle.hpp"
#include "morfi/synth.hpp"
#include "morfi/tensor_io.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <unordered_map>

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using namespace morfi;

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config " + path);
    json cfg = json::parse(in, nullptr, false);
    if (cfg.is_discarded()) throw ValidationError(path + ": invalid JSON");
    if (!cfg.is_object()) throw ValidationError(path + ": config must be a JSON object");
    return cfg;
}

template <typename T>
T parse_env_number(const char* name, const char* text) {
    T value{};
    const char* end = text + std::strlen(text);
    const auto res = std::from_chars(text, end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw ValidationError(std::string(name) + " environment variable is not a valid number");
    return value;
}

// flag > config > built-in default (the value already in `value`)
template <typename T>
void fold(const CLI::App& cmd, const std::string& flag, const json& cfg, const char* key,
          T& value) {
    if (cmd.count(flag) > 0) return;
    if (cfg.contains(key)) {
        try {
            value = cfg.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError(std::string("config field \"") + key + "\" has the wrong type");
        }
    }
}

// flag > config > environment > built-in default
template <typename T>
void fold_env(const CLI::App& cmd, const std::string& flag, const json& cfg, const char* key,
              T& value, const char* env_name) {
    if (cmd.count(flag) > 0) return;
    if (cfg.contains(key)) {
        fold(cmd, flag, cfg, key, value);
        return;
    }
    if (const char* text = std::getenv(env_name)) value = parse_env_number<T>(env_name, text);
}

void fold_string(const CLI::App& cmd, const std::string& flag, const json& cfg, const char* key,
                 std::string& value) {
    if (cmd.count(flag) > 0) return;
    if (cfg.contains(key)) {
        if (!cfg.at(key).is_string())
            throw ValidationError(std::string("config field \"") + key + "\" must be a string");
        value = cfg.at(key).get<std::string>();
    }
}

ConditionAxis parse_axis(const std::string& name) {
    if (name == "epochs") return ConditionAxis::epochs;
    if (name == "mixtures") return ConditionAxis::mixtures;
    throw ValidationError("axis must be \"epochs\" or \"mixtures\", got \"" + name + "\"");
}

const char* axis_name(ConditionAxis a) {
    return a == ConditionAxis::epochs ? "epochs" : "mixtures";
}

std::vector<Index> index_array(const json& arr, const char* what) {
    if (!arr.is_array()) throw ValidationError(std::string(what) + " must be an array");
    std::vector<Index> out;
    for (const auto& v : arr) {
        if (!v.is_number_integer())
            throw ValidationError(std::string(what) + " entries must be integers");
        out.push_back(v.get<Index>());
    }
    return out;
}

std::vector<std::string> read_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open id file " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

void emit_manifest(const std::string& primary_output, RunManifest manifest, double wall) {
    manifest.wall_seconds = wall;
    write_manifest(manifest_path_for(primary_output), manifest);
}

// ---------------------------------------------------------------- import --

struct ImportArgs {
    std::string dir;
    std::vector<std::string> epochs;
    std::vector<std::string> mixtures;
    Index latents = 0;
    Index samples = 0;
    std::string ids_path;
    std::string output;
};

void run_import(const ImportArgs& a) {
    Stopwatch clock;
    std::vector<std::string> ids;
    if (!a.ids_path.empty()) {
        ids = read_id_file(a.ids_path);
        if (static_cast<Index>(ids.size()) != a.samples)
            throw ValidationError("id file " + a.ids_path + " holds " +
                                  std::to_string(ids.size()) + " ids, expected " +
                                  std::to_string(a.samples));
    }
    const auto tensor =
        import_checkpoint_dir(a.dir, a.epochs, a.mixtures, a.latents, a.samples, ids);
    write_tensor(tensor, a.output);

    RunManifest m;
    m.command = "import";
    m.config = {{"dir", a.dir},
                {"epochs", a.epochs},
                {"mixtures", a.mixtures},
                {"latents", a.latents},
                {"samples", a.samples}};
    m.inputs = {a.dir};
    if (!a.ids_path.empty()) m.inputs.push_back(a.ids_path);
    m.outputs = {a.output};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// ----------------------------------------------------------------- synth --

struct SynthArgs {
    std::string config_path;
    std::string output;
    std::string truth;
    std::string trend_axis = "mixtures";
    double step = 1.0;
    double sigma = 0.1;
    double baseline = 0.0;
    uint64_t seed = 0;
};

void run_synth(const CLI::App& cmd, SynthArgs& a) {
    Stopwatch clock;
    const json cfg = load_config(a.config_path);
    fold_string(cmd, "--trend-axis", cfg, "trend_axis", a.trend_axis);
    fold(cmd, "--step", cfg, "step", a.step);
    fold(cmd, "--sigma", cfg, "sigma", a.sigma);
    fold(cmd, "--baseline", cfg, "baseline", a.baseline);
    fold_env(cmd, "--seed", cfg, "seed", a.seed, "SEED");

    PlantConfig plant;
    plant.trend_axis = parse_axis(a.trend_axis);
    plant.step = a.step;
    plant.sigma = a.sigma;
    plant.baseline = a.baseline;
    plant.seed = a.seed;
    if (cfg.contains("shape")) {
        const auto dims = index_array(cfg.at("shape"), "config field \"shape\"");
        if (dims.size() != 4)
            throw ValidationError("config field \"shape\" must hold [T, P, F, N]");
        std::copy(dims.begin(), dims.end(), plant.shape.begin());
    }
    if (cfg.contains("increasing"))
        plant.increasing = index_array(cfg.at("increasing"), "config field \"increasing\"");
    if (cfg.contains("decreasing"))
        plant.decreasing = index_array(cfg.at("decreasing"), "config field \"decreasing\"");

    const PlantedTensor planted = generate_planted_tensor(plant);
    write_tensor(planted.tensor, a.output);
    const std::string truth_path = a.truth.empty() ? a.output + ".truth.json" : a.truth;
    write_truth_json(truth_path, planted.increasing, planted.decreasing);

    RunManifest m;
    m.command = "synth";
    m.config = {{"shape", plant.shape},
                {"trend_axis", axis_name(plant.trend_axis)},
                {"increasing", plant.increasing},
                {"decreasing", plant.decreasing},
                {"step", plant.step},
                {"sigma", plant.sigma},
                {"baseline", plant.baseline}};
    m.seed = plant.seed;
    if (!a.config_path.empty()) m.inputs = {a.config_path};
    m.outputs = {a.output, truth_path};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// --------------------------------------------------------------- analyze --

struct AnalyzeArgs {
    std::string tensor;
    std::string output;
    std::string config_path;
    std::string axis = "epochs";
    Index replicates = 1000;
    Index top_k = 1000;
    double alpha_sig = 0.05;
    uint64_t seed = 0;
    int threads = 1;
};

MorfiConfig resolve_morfi_config(const CLI::App& cmd, AnalyzeArgs& a) {
    const json cfg = load_config(a.config_path);
    fold_string(cmd, "--axis", cfg, "axis", a.axis);
    fold(cmd, "--replicates", cfg, "replicates", a.replicates);
    fold(cmd, "--top-k", cfg, "top_k", a.top_k);
    fold(cmd, "--alpha-sig", cfg, "alpha_sig", a.alpha_sig);
    fold_env(cmd, "--seed", cfg, "seed", a.seed, "SEED");
    fold_env(cmd, "--threads", cfg, "threads", a.threads, "THREADS");

    MorfiConfig mc;
    mc.aggregate_axis = parse_axis(a.axis);
    mc.replicates = a.replicates;
    mc.top_k = a.top_k;
    mc.alpha_sig = a.alpha_sig;
    mc.seed = a.seed;
    mc.threads = a.threads;
    return mc;
}

ordered_json morfi_config_json(const MorfiConfig& mc) {
    return {{"axis", axis_name(mc.aggregate_axis)}, {"replicates", mc.replicates},
            {"top_k", mc.top_k},                    {"alpha_sig", mc.alpha_sig},
            {"seed", mc.seed},                      {"threads", mc.threads}};
}

void run_analyze(const CLI::App& cmd, AnalyzeArgs& a) {
    Stopwatch clock;
    const MorfiConfig mc = resolve_morfi_config(cmd, a);
    const ActivationTensor<double> tensor = load_tensor_any(a.tensor);
    const MonotonicLatents ranked = identify_monotonic_latents(tensor, mc);

    const std::string csv_path = a.output + ".csv";
    const std::string json_path = a.output + ".json";
    write_ranked_csv(csv_path, ranked);
    write_ranked_json(json_path, ranked);

    RunManifest m;
    m.command = "analyze";
    m.config = morfi_config_json(mc);
    m.seed = mc.seed;
    m.threads = mc.threads;
    m.inputs = {a.tensor};
    m.outputs = {csv_path, json_path};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// --------------------------------------------------------------- control --

struct ControlArgs {
    std::string tensor;
    std::string output;
    std::string axis = "epochs";
    Index n = 10;
    double alpha_sig = 0.05;
};

void run_control(const ControlArgs& a) {
    Stopwatch clock;
    MorfiConfig mc;
    mc.aggregate_axis = parse_axis(a.axis);
    mc.alpha_sig = a.alpha_sig;

    const ActivationTensor<double> tensor = load_tensor_any(a.tensor);
    const std::vector<Index> latents = select_control_group(tensor, mc, a.n);
    const CompositeDirection composite = composite_direction(tensor, mc);
    std::vector<double> deltas;
    deltas.reserve(latents.size());
    for (Index lat : latents) deltas.push_back(composite.delta[lat]);
    write_control_json(a.output, latents, deltas);

    RunManifest m;
    m.command = "control";
    m.config = {{"axis", a.axis}, {"n", a.n}, {"alpha_sig", a.alpha_sig}};
    m.inputs = {a.tensor};
    m.outputs = {a.output};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// -------------------------------------------------------------- annotate --

struct AnnotateArgs {
    std::string dataset;
    std::string oracle_path;
    std::string output;
    uint64_t seed = 0;
    int threads = 1;
};

PCorrectParams params_from_json(const json& cfg) {
    PCorrectParams p;
    if (!cfg.contains("params")) return p;
    const json& sub = cfg.at("params");
    if (!sub.is_object()) throw ValidationError("oracle config: \"params\" must be an object");
    if (sub.contains("exemplar_sets")) p.exemplar_sets = sub.at("exemplar_sets").get<int>();
    if (sub.contains("demonstrations")) p.demonstrations = sub.at("demonstrations").get<int>();
    if (sub.contains("draws_per_set")) p.draws_per_set = sub.at("draws_per_set").get<int>();
    if (sub.contains("temperature")) p.temperature = sub.at("temperature").get<double>();
    if (sub.contains("sample_top_k")) p.sample_top_k = sub.at("sample_top_k").get<int>();
    return p;
}

std::unique_ptr<AnswerOracle> build_answer_oracle(const json& cfg, const PCorrectParams& params) {
    if (!cfg.contains("kind") || !cfg.at("kind").is_string())
        throw ValidationError("oracle config: missing \"kind\"");
    const std::string kind = cfg.at("kind").get<std::string>();
    if (kind == "echo") return std::make_unique<FixedAnswerOracle>(true);
    if (kind == "wrong") return std::make_unique<FixedAnswerOracle>(false);
    if (kind == "scripted") {
        std::map<std::string, ScriptedCounts> counts;
        if (cfg.contains("answers")) {
            const json& answers = cfg.at("answers");
            if (!answers.is_object())
                throw ValidationError("oracle config: \"answers\" must map ids to counts");
            for (const auto& [id, entry] : answers.items()) {
                ScriptedCounts c;
                if (entry.contains("greedy")) c.greedy = entry.at("greedy").get<int>();
                if (entry.contains("sampled")) c.sampled = entry.at("sampled").get<int>();
                counts[id] = c;
            }
        }
        return std::make_unique<ScriptedAnswerOracle>(std::move(counts), params.draws_per_set);
    }
    throw ValidationError("oracle config: unknown kind \"" + kind +
                          "\" (expected echo, wrong, or scripted)");
}

void run_annotate(const CLI::App& cmd, AnnotateArgs& a) {
    Stopwatch clock;
    const json oracle_cfg = load_config(a.oracle_path);
    fold_env(cmd, "--seed", oracle_cfg, "seed", a.seed, "SEED");
    fold_env(cmd, "--threads", oracle_cfg, "threads", a.threads, "THREADS");

    const PCorrectParams params = params_from_json(oracle_cfg);
    const auto oracle = build_answer_oracle(oracle_cfg, params);
    const std::vector<QARecord> records = read_qa_records(a.dataset);
    if (records.empty()) throw ValidationError(a.dataset + ": no records");

    const auto annotations = annotate_records(records, *oracle, params, a.seed, a.threads);
    std::vector<AnnotatedRecord> annotated(records.size());
    for (size_t i = 0; i < records.size(); ++i)
        annotated[i] = {records[i], annotations[i]};
    write_annotated_records(a.output, annotated);

    RunManifest m;
    m.command = "annotate";
    m.config = {{"oracle_kind", oracle_cfg.value("kind", std::string("?"))},
                {"exemplar_sets", params.exemplar_sets},
                {"demonstrations", params.demonstrations},
                {"draws_per_set", params.draws_per_set}};
    m.seed = a.seed;
    m.threads = a.threads;
    m.inputs = {a.dataset};
    if (!a.oracle_path.empty()) m.inputs.push_back(a.oracle_path);
    m.outputs = {a.output};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// --------------------------------------------------------------- mixture --

struct MixtureArgs {
    std::string annotated;
    std::string output;
    int percent = 0;
    Index size = 0;
    uint64_t seed = 0;
};

void run_mixture(const CLI::App& cmd, MixtureArgs& a) {
    Stopwatch clock;
    fold_env(cmd, "--seed", json::object(), "seed", a.seed, "SEED");

    const std::vector<AnnotatedRecord> annotated = read_annotated_records(a.annotated);
    std::unordered_map<std::string, const KnowledgeAnnotation*> by_id;
    std::vector<QARecord> known, unknown;
    for (const auto& rec : annotated) {
        if (!by_id.emplace(rec.record.id, &rec.annotation).second)
            throw ValidationError(a.annotated + ": duplicate id \"" + rec.record.id + "\"");
        (is_known(rec.annotation.category) ? known : unknown).push_back(rec.record);
    }

    MixtureSpec spec;
    spec.percent_unknown = a.percent;
    spec.size = a.size;
    spec.seed = a.seed;
    const std::vector<QARecord> mixture = build_mixture(known, unknown, spec);

    std::vector<AnnotatedRecord> out;
    out.reserve(mixture.size());
    for (const auto& rec : mixture) out.push_back({rec, *by_id.at(rec.id)});
    write_annotated_records(a.output, out);

    RunManifest m;
    m.command = "mixture";
    m.config = {{"percent_unknown", a.percent}, {"size", a.size}};
    m.seed = a.seed;
    m.inputs = {a.annotated};
    m.outputs = {a.output};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// ----------------------------------------------------------------- steer --

struct SteerArgs {
    std::string config_path;
    std::string candidates;
    std::string oracle_path;
    std::string output;
    std::string direction = "decreasing";
    std::string dataset = "dev";
    int polarity = 1;
    double alpha_init = 0.4;
    std::vector<double> grid;
    double scale = 1.0;
    int layer = 0;
    Index screen_keep = 40;
    Index final_keep = 10;
    uint64_t seed = 0;
    std::string oracle_command; // shortcut for an external oracle
};

CausalOracleConfig causal_config_from_json(const json& cfg, double fallback_alpha_init) {
    CausalOracleConfig c;
    c.alpha_init = fallback_alpha_init;
    if (cfg.contains("latent")) c.latent = cfg.at("latent").get<Index>();
    if (cfg.contains("polarity")) c.polarity = cfg.at("polarity").get<int>();
    if (cfg.contains("alpha_opt")) c.alpha_opt = cfg.at("alpha_opt").get<double>();
    if (cfg.contains("base_accuracy")) c.base_accuracy = cfg.at("base_accuracy").get<double>();
    if (cfg.contains("max_gain")) c.max_gain = cfg.at("max_gain").get<double>();
    if (cfg.contains("width")) c.width = cfg.at("width").get<double>();
    if (cfg.contains("off_target_rate"))
        c.off_target_rate = cfg.at("off_target_rate").get<double>();
    if (cfg.contains("alpha_init")) c.alpha_init = cfg.at("alpha_init").get<double>();
    if (cfg.contains("distractors")) {
        const json& arr = cfg.at("distractors");
        if (!arr.is_array())
            throw ValidationError("oracle config: \"distractors\" must be an array");
        for (const auto& item : arr) {
            if (!item.is_array() || item.size() != 2)
                throw ValidationError("oracle config: each distractor is [latent, gain]");
            c.distractors.emplace_back(item.at(0).get<Index>(), item.at(1).get<double>());
        }
    }
    return c;
}

std::unique_ptr<ModelOracle> build_model_oracle(const json& cfg, double fallback_alpha_init,
                                                uint64_t fallback_seed,
                                                ordered_json& description) {
    if (!cfg.contains("kind") || !cfg.at("kind").is_string())
        throw ValidationError("oracle config: missing \"kind\"");
    const std::string kind = cfg.at("kind").get<std::string>();
    description["kind"] = kind;
    if (kind == "external") {
        if (!cfg.contains("command") || !cfg.at("command").is_string())
            throw ValidationError("oracle config: external oracle needs a \"command\"");
        const std::string command = cfg.at("command").get<std::string>();
        description["command"] = command;
        return std::make_unique<SubprocessOracle>(command);
    }
    if (kind == "synthetic") {
        if (!cfg.contains("dictionary") || !cfg.at("dictionary").is_object())
            throw ValidationError(
                "oracle config: synthetic oracle needs a \"dictionary\" object");
        const json& d = cfg.at("dictionary");
        if (!d.contains("latents") || !d.contains("model_dim"))
            throw ValidationError("oracle config: dictionary needs \"latents\" and \"model_dim\"");
        const Index latents = d.at("latents").get<Index>();
        const Index model_dim = d.at("model_dim").get<Index>();
        const uint64_t dict_seed = d.value("seed", fallback_seed);
        const CausalOracleConfig c = causal_config_from_json(cfg, fallback_alpha_init);
        description["dictionary"] = {{"latents", latents},
                                     {"model_dim", model_dim},
                                     {"seed", dict_seed}};
        description["latent"] = c.latent;
        description["alpha_opt"] = c.alpha_opt;
        return make_causal_oracle(c, random_dictionary(latents, model_dim, dict_seed));
    }
    throw ValidationError("oracle config: unknown kind \"" + kind +
                          "\" (expected synthetic or external)");
}

void run_steer(const CLI::App& cmd, SteerArgs& a) {
    Stopwatch clock;
    const json cfg = load_config(a.config_path);
    fold_string(cmd, "--candidates", cfg, "candidates", a.candidates);
    fold_string(cmd, "--direction", cfg, "direction", a.direction);
    fold_string(cmd, "--dataset", cfg, "dataset", a.dataset);
    fold(cmd, "--polarity", cfg, "polarity", a.polarity);
    fold(cmd, "--alpha-init", cfg, "alpha_init", a.alpha_init);
    fold(cmd, "--grid", cfg, "grid", a.grid);
    fold(cmd, "--scale", cfg, "scale", a.scale);
    fold(cmd, "--layer", cfg, "layer", a.layer);
    fold(cmd, "--screen-keep", cfg, "screen_keep", a.screen_keep);
    fold(cmd, "--final-keep", cfg, "final_keep", a.final_keep);
    fold_env(cmd, "--seed", cfg, "seed", a.seed, "SEED");

    if (a.candidates.empty())
        throw ValidationError("steer: no candidates file (flag --candidates or config)");
    if (a.direction != "increasing" && a.direction != "decreasing")
        throw ValidationError("steer: direction must be \"increasing\" or \"decreasing\"");

    json oracle_cfg;
    if (cmd.count("--oracle-command") > 0) {
        oracle_cfg = {{"kind", "external"}, {"command", a.oracle_command}};
    } else if (!a.oracle_path.empty()) {
        oracle_cfg = load_config(a.oracle_path);
    } else if (cfg.contains("oracle")) {
        oracle_cfg = cfg.at("oracle");
        if (!oracle_cfg.is_object())
            throw ValidationError("steer config: \"oracle\" must be an object");
    } else {
        throw ValidationError("steer: no oracle (flag --oracle/--oracle-command or config)");
    }

    SteeringRunConfig rc;
    rc.polarity = a.polarity;
    rc.alpha_init = a.alpha_init;
    rc.grid = a.grid.empty() ? default_strength_grid() : a.grid;
    rc.scale = a.scale;
    rc.layer = a.layer;
    rc.dataset_id = a.dataset;
    rc.screen_keep = a.screen_keep;
    rc.final_keep = a.final_keep;

    const MonotonicLatents ranked = read_ranked_json(a.candidates);
    const RankedLatentList& list =
        a.direction == "increasing" ? ranked.increasing : ranked.decreasing;
    std::vector<Index> candidates;
    candidates.reserve(list.entries.size());
    for (const auto& e : list.entries) candidates.push_back(e.latent);

    ordered_json oracle_desc;
    const auto oracle = build_model_oracle(oracle_cfg, rc.alpha_init, a.seed, oracle_desc);
    const SteeringResult result = run_steering(candidates, rc, *oracle);
    write_steering_json(a.output, result);

    RunManifest m;
    m.command = "steer";
    m.config = {{"direction", a.direction},
                {"polarity", rc.polarity},
                {"alpha_init", rc.alpha_init},
                {"grid", rc.grid},
                {"scale", rc.scale},
                {"layer", rc.layer},
                {"dataset", rc.dataset_id},
                {"screen_keep", rc.screen_keep},
                {"final_keep", rc.final_keep},
                {"oracle", oracle_desc}};
    m.seed = a.seed;
    m.inputs = {a.candidates};
    if (!a.config_path.empty()) m.inputs.push_back(a.config_path);
    if (!a.oracle_path.empty()) m.inputs.push_back(a.oracle_path);
    m.outputs = {a.output};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

// --------------------------------------------------------------- recover --

struct RecoverArgs {
    std::string base;
    std::string tuned;
    std::string steered;
    std::string output;
    int64_t min_pool = 50;
    int64_t min_gains = 10;
};

void run_recover(const RecoverArgs& a) {
    Stopwatch clock;
    const auto base = read_correctness(a.base);
    const auto tuned = read_correctness(a.tuned);
    const auto steered = read_correctness(a.steered);
    if (base.size() != tuned.size() || base.size() != steered.size())
        throw ValidationError("correctness files disagree in length: " +
                              std::to_string(base.size()) + " / " + std::to_string(tuned.size()) +
                              " / " + std::to_string(steered.size()));
    if (base.empty()) throw ValidationError(a.base + ": no records");

    std::vector<uint8_t> d0(base.size()), d100(base.size()), d100s(base.size());
    std::vector<std::string> relations(base.size());
    size_t with_relation = 0;
    for (size_t i = 0; i < base.size(); ++i) {
        if (base[i].id != tuned[i].id || base[i].id != steered[i].id)
            throw ValidationError("correctness files disagree on the id at line " +
                                  std::to_string(i + 1) + ": \"" + base[i].id + "\" / \"" +
                                  tuned[i].id + "\" / \"" + steered[i].id + "\"");
        d0[i] = base[i].correct;
        d100[i] = tuned[i].correct;
        d100s[i] = steered[i].correct;
        std::string rel;
        for (const auto* rec : {&base[i], &tuned[i], &steered[i]}) {
            if (rec->relation.empty()) continue;
            if (rel.empty())
                rel = rec->relation;
            else if (rel != rec->relation)
                throw ValidationError("conflicting relations for id \"" + base[i].id + "\": \"" +
                                      rel + "\" vs \"" + rec->relation + "\"");
        }
        relations[i] = rel;
        if (!rel.empty()) ++with_relation;
    }

    RecoveryReport report;
    if (with_relation == base.size()) {
        report = recovery_by_relation(d0, d100, d100s, relations, a.min_pool, a.min_gains);
    } else if (with_relation == 0) {
        report = knowledge_recovery(d0, d100, d100s);
    } else {
        throw ValidationError("relations must be present on every record or on none (" +
                              std::to_string(with_relation) + " of " +
                              std::to_string(base.size()) + " have one)");
    }

    const std::string json_path = a.output + ".json";
    const std::string csv_path = a.output + ".csv";
    write_recovery_json(json_path, report);
    write_recovery_csv(csv_path, report);

    RunManifest m;
    m.command = "recover";
    m.config = {{"min_pool", a.min_pool}, {"min_gains", a.min_gains}};
    m.inputs = {a.base, a.tuned, a.steered};
    m.outputs = {json_path, csv_path};
    emit_manifest(a.output, std::move(m), clock.seconds());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"monotonic latent identification and steering toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolkitVersion);

    ImportArgs import_args;
    auto* import_cmd =
        app.add_subcommand("import", "assemble per-checkpoint matrices into one tensor file");
    import_cmd->add_option("--dir", import_args.dir, "directory of e{epoch}_p{mixture}.bin cells")
        ->required();
    import_cmd->add_option("--epochs", import_args.epochs, "epoch labels, in tensor order")
        ->required()
        ->delimiter(',');
    import_cmd->add_option("--mixtures", import_args.mixtures, "mixture labels, in tensor order")
        ->required()
        ->delimiter(',');
    import_cmd->add_option("--latents", import_args.latents, "latent count F")->required();
    import_cmd->add_option("--samples", import_args.samples, "sample count N")->required();
    import_cmd->add_option("--ids", import_args.ids_path, "sample id file, one id per line");
    import_cmd->add_option("--output", import_args.output, "tensor file to write")->required();

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "generate a planted-trend activation tensor");
    synth_cmd->add_option("--config", synth_args.config_path,
                          "plant config JSON (shape, planted sets, ...)");
    synth_cmd->add_option("--output", synth_args.output, "tensor file to write")->required();
    synth_cmd->add_option("--truth", synth_args.truth,
                          "planted-truth JSON path (default <output>.truth.json)");
    synth_cmd->add_option("--trend-axis", synth_args.trend_axis, "epochs or mixtures");
    synth_cmd->add_option("--step", synth_args.step, "per-condition mean step");
    synth_cmd->add_option("--sigma", synth_args.sigma, "noise level");
    synth_cmd->add_option("--baseline", synth_args.baseline, "background mean");
    synth_cmd->add_option("--seed", synth_args.seed, "noise seed");

    AnalyzeArgs analyze_args;
    auto* analyze_cmd =
        app.add_subcommand("analyze", "bootstrap trend scan over an activation tensor");
    analyze_cmd->add_option("--tensor", analyze_args.tensor, "activation tensor file")
        ->required();
    analyze_cmd
        ->add_option("--output", analyze_args.output,
                     "output stem; writes <stem>.csv, <stem>.json, <stem>.manifest.json")
        ->required();
    analyze_cmd->add_option("--config", analyze_args.config_path, "analysis config JSON");
    analyze_cmd->add_option("--axis", analyze_args.axis,
                            "condition axis to aggregate out (epochs or mixtures)");
    analyze_cmd->add_option("--replicates", analyze_args.replicates, "bootstrap replicates");
    analyze_cmd->add_option("--top-k", analyze_args.top_k, "per-replicate selection depth");
    analyze_cmd->add_option("--alpha-sig", analyze_args.alpha_sig, "significance level");
    analyze_cmd->add_option("--seed", analyze_args.seed, "bootstrap seed");
    analyze_cmd->add_option("--threads", analyze_args.threads, "worker threads (0 = hardware)");

    ControlArgs control_args;
    auto* control_cmd =
        app.add_subcommand("control", "select least-moving non-trending latents");
    control_cmd->add_option("--tensor", control_args.tensor, "activation tensor file")
        ->required();
    control_cmd->add_option("--output", control_args.output, "control-group JSON path")
        ->required();
    control_cmd->add_option("--axis", control_args.axis,
                            "condition axis to aggregate out (epochs or mixtures)");
    control_cmd->add_option("--n", control_args.n, "control group size");
    control_cmd->add_option("--alpha-sig", control_args.alpha_sig, "significance level");

    AnnotateArgs annotate_args;
    auto* annotate_cmd =
        app.add_subcommand("annotate", "annotate QA records with correctness categories");
    annotate_cmd->add_option("--dataset", annotate_args.dataset, "QA records JSONL")->required();
    annotate_cmd->add_option("--oracle", annotate_args.oracle_path, "answer oracle config JSON")
        ->required();
    annotate_cmd->add_option("--output", annotate_args.output, "annotated JSONL path")
        ->required();
    annotate_cmd->add_option("--seed", annotate_args.seed, "demonstration sampling seed");
    annotate_cmd->add_option("--threads", annotate_args.threads, "worker threads");

    MixtureArgs mixture_args;
    auto* mixture_cmd =
        app.add_subcommand("mixture", "draw a controlled known/unknown mixture dataset");
    mixture_cmd->add_option("--annotated", mixture_args.annotated, "annotated records JSONL")
        ->required();
    mixture_cmd->add_option("--percent", mixture_args.percent, "percent unknown (on the grid)")
        ->required();
    mixture_cmd->add_option("--size", mixture_args.size, "output dataset size")->required();
    mixture_cmd->add_option("--seed", mixture_args.seed, "sampling seed");
    mixture_cmd->add_option("--output", mixture_args.output, "mixture JSONL path")->required();

    SteerArgs steer_args;
    auto* steer_cmd =
        app.add_subcommand("steer", "screen, tune, and rank steering candidates");
    steer_cmd->add_option("--config", steer_args.config_path, "steering experiment config JSON");
    steer_cmd->add_option("--candidates", steer_args.candidates, "ranked-latent JSON file");
    steer_cmd->add_option("--direction", steer_args.direction,
                          "which ranked list to steer (increasing or decreasing)");
    steer_cmd->add_option("--oracle", steer_args.oracle_path, "model oracle config JSON");
    steer_cmd->add_option("--oracle-command", steer_args.oracle_command,
                          "external oracle command line (line-delimited JSON protocol)");
    steer_cmd->add_option("--polarity", steer_args.polarity, "+1 amplify, -1 suppress");
    steer_cmd->add_option("--alpha-init", steer_args.alpha_init, "screening strength");
    steer_cmd->add_option("--grid", steer_args.grid, "strength grid")->delimiter(',');
    steer_cmd->add_option("--scale", steer_args.scale, "layer scale s_l");
    steer_cmd->add_option("--layer", steer_args.layer, "steered layer index");
    steer_cmd->add_option("--dataset", steer_args.dataset, "dataset id passed to the oracle");
    steer_cmd->add_option("--screen-keep", steer_args.screen_keep, "screening survivors");
    steer_cmd->add_option("--final-keep", steer_args.final_keep, "final ranking size");
    steer_cmd->add_option("--seed", steer_args.seed, "dictionary seed fallback");
    steer_cmd->add_option("--output", steer_args.output, "steering result JSON path")
        ->required();

    RecoverArgs recover_args;
    auto* recover_cmd =
        app.add_subcommand("recover", "knowledge recovery analytics over correctness files");
    recover_cmd->add_option("--base", recover_args.base, "base model correctness JSONL")
        ->required();
    recover_cmd->add_option("--tuned", recover_args.tuned, "fine-tuned model correctness JSONL")
        ->required();
    recover_cmd
        ->add_option("--steered", recover_args.steered, "steered fine-tuned correctness JSONL")
        ->required();
    recover_cmd->add_option("--min-pool", recover_args.min_pool,
                            "relation pool threshold for reporting");
    recover_cmd->add_option("--min-gains", recover_args.min_gains,
                            "relation gains threshold for reporting");
    recover_cmd
        ->add_option("--output", recover_args.output,
                     "output stem; writes <stem>.json, <stem>.csv, <stem>.manifest.json")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*import_cmd) run_import(import_args);
        if (*synth_cmd) run_synth(*synth_cmd, synth_args);
        if (*analyze_cmd) run_analyze(*analyze_cmd, analyze_args);
        if (*control_cmd) run_control(control_args);
        if (*annotate_cmd) run_annotate(*annotate_cmd, annotate_args);
        if (*mixture_cmd) run_mixture(*mixture_cmd, mixture_args);
        if (*steer_cmd) run_steer(*steer_cmd, steer_args);
        if (*recover_cmd) run_recover(recover_args);
    } catch (const OracleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 4;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
