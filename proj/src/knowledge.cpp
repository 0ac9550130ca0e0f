#include "morfi/knowledge.hpp"

#include "morfi/parallel.hpp"
#include "morfi/rng.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>

namespace morfi {

const char* to_string(KnowledgeCategory c) {
    switch (c) {
        case KnowledgeCategory::highly_known: return "HighlyKnown";
        case KnowledgeCategory::maybe_known: return "MaybeKnown";
        case KnowledgeCategory::weakly_known: return "WeaklyKnown";
        case KnowledgeCategory::unknown: return "Unknown";
    }
    throw InternalError("unreachable knowledge category");
}

std::optional<KnowledgeCategory> category_from_string(const std::string& s) {
    if (s == "HighlyKnown") return KnowledgeCategory::highly_known;
    if (s == "MaybeKnown") return KnowledgeCategory::maybe_known;
    if (s == "WeaklyKnown") return KnowledgeCategory::weakly_known;
    if (s == "Unknown") return KnowledgeCategory::unknown;
    return std::nullopt;
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    return out;
}

bool answer_matches(std::string_view model_answer, const QARecord& rec) {
    const std::string got = normalize_answer(model_answer);
    if (got == normalize_answer(rec.answer)) return true;
    for (const auto& alias : rec.aliases)
        if (got == normalize_answer(alias)) return true;
    return false;
}

const char* const kDefaultPromptTemplate = "Q: {question}\nA: {answer}";

static std::string fill_template(const std::string& tmpl, const std::string& question,
                                 const std::string& answer) {
    std::string out = tmpl;
    for (const auto& [slot, value] :
         {std::pair<std::string, const std::string*>{"{question}", &question},
          std::pair<std::string, const std::string*>{"{answer}", &answer}}) {
        size_t pos = 0;
        while ((pos = out.find(slot, pos)) != std::string::npos) {
            out.replace(pos, slot.size(), *value);
            pos += value->size();
        }
    }
    return out;
}

std::string build_prompt(const std::vector<const QARecord*>& demonstrations,
                         const std::string& question, const std::string& demo_template) {
    std::string prompt;
    for (const QARecord* demo : demonstrations) {
        prompt += fill_template(demo_template, demo->question, demo->answer);
        prompt += "\n\n";
    }
    prompt += "Q: " + question + "\nA:";
    return prompt;
}

namespace {

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    return h;
}

std::vector<const QARecord*> draw_demonstrations(const QARecord& rec,
                                                 std::span<const QARecord> pool, int k,
                                                 uint64_t seed, int exemplar_set) {
    std::vector<const QARecord*> candidates;
    for (const auto& other : pool)
        if (other.relation == rec.relation && other.id != rec.id) candidates.push_back(&other);
    if (static_cast<int>(candidates.size()) < k)
        throw ValidationError("record " + rec.id + ": only " +
                              std::to_string(candidates.size()) + " same-relation demonstration " +
                              "candidates, need " + std::to_string(k));
    CounterRng rng(seed, fnv1a(rec.id) ^ (0x9E37ULL * static_cast<uint64_t>(exemplar_set + 1)));
    // partial Fisher-Yates: the first k slots become the draw
    for (int i = 0; i < k; ++i) {
        const auto j = i + static_cast<int>(rng.next_below(candidates.size() - static_cast<size_t>(i)));
        std::swap(candidates[static_cast<size_t>(i)], candidates[static_cast<size_t>(j)]);
    }
    candidates.resize(static_cast<size_t>(k));
    return candidates;
}

} // namespace

double p_correct(const QARecord& rec, std::span<const QARecord> pool, AnswerOracle& oracle,
                 PCorrectMode mode, const PCorrectParams& params, uint64_t seed) {
    if (params.exemplar_sets < 1 || params.demonstrations < 1 || params.draws_per_set < 1)
        throw ValidationError("p_correct: exemplar_sets, demonstrations, draws_per_set must be >= 1");

    int64_t correct = 0;
    int64_t asked = 0;
    for (int es = 0; es < params.exemplar_sets; ++es) {
        const auto demos = draw_demonstrations(rec, pool, params.demonstrations, seed, es);
        AnswerQuery q;
        q.record = &rec;
        q.prompt = build_prompt(demos, rec.question);
        q.exemplar_set = es;
        if (mode == PCorrectMode::greedy) {
            q.draw = -1;
            correct += answer_matches(oracle.answer(q), rec) ? 1 : 0;
            ++asked;
        } else {
            for (int d = 0; d < params.draws_per_set; ++d) {
                q.draw = d;
                correct += answer_matches(oracle.answer(q), rec) ? 1 : 0;
                ++asked;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(asked);
}

KnowledgeCategory categorize(double p_greedy, double p_sampled) {
    if (p_greedy < 0.0 || p_greedy > 1.0 || p_sampled < 0.0 || p_sampled > 1.0)
        throw ValidationError("categorize: probabilities must lie in [0, 1]");
    if (p_greedy == 1.0) return KnowledgeCategory::highly_known;
    if (p_greedy > 0.0) return KnowledgeCategory::maybe_known;
    if (p_sampled > 0.0) return KnowledgeCategory::weakly_known;
    return KnowledgeCategory::unknown;
}

KnowledgeAnnotation annotate_record(const QARecord& rec, std::span<const QARecord> pool,
                                    AnswerOracle& oracle, const PCorrectParams& params,
                                    uint64_t seed) {
    KnowledgeAnnotation ann;
    ann.p_greedy = p_correct(rec, pool, oracle, PCorrectMode::greedy, params, seed);
    ann.p_sampled = p_correct(rec, pool, oracle, PCorrectMode::sampled, params, seed);
    ann.category = categorize(ann.p_greedy, ann.p_sampled);
    return ann;
}

std::vector<KnowledgeAnnotation> annotate_records(std::span<const QARecord> records,
                                                  AnswerOracle& oracle,
                                                  const PCorrectParams& params, uint64_t seed,
                                                  int threads) {
    std::vector<KnowledgeAnnotation> out(records.size());
    const int workers = oracle.concurrent_safe() ? resolve_threads(threads) : 1;
    parallel_blocks(static_cast<int>(records.size()), workers, [&](int i) {
        out[static_cast<size_t>(i)] =
            annotate_record(records[static_cast<size_t>(i)], records, oracle, params, seed);
    });
    return out;
}

std::vector<QARecord> build_mixture(std::span<const QARecord> known,
                                    std::span<const QARecord> unknown, const MixtureSpec& spec,
                                    std::span<const int> allowed_percents) {
    if (spec.size < 1) throw ValidationError("mixture: size must be >= 1");
    if (std::find(allowed_percents.begin(), allowed_percents.end(), spec.percent_unknown) ==
        allowed_percents.end())
        throw ValidationError("mixture: percent " + std::to_string(spec.percent_unknown) +
                              " is not on the configured grid");

    // round half away from zero, in exact integer arithmetic
    const int64_t n_unknown =
        (2 * static_cast<int64_t>(spec.size) * spec.percent_unknown + 100) / 200;
    const int64_t n_known = static_cast<int64_t>(spec.size) - n_unknown;
    if (n_unknown > static_cast<int64_t>(unknown.size()))
        throw ValidationError("mixture: needs " + std::to_string(n_unknown) +
                              " unknown records, pool has " + std::to_string(unknown.size()));
    if (n_known > static_cast<int64_t>(known.size()))
        throw ValidationError("mixture: needs " + std::to_string(n_known) +
                              " known records, pool has " + std::to_string(known.size()));

    auto draw = [](std::span<const QARecord> pool, int64_t count, CounterRng& rng) {
        std::vector<Index> idx(pool.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<QARecord> out;
        out.reserve(static_cast<size_t>(count));
        for (int64_t i = 0; i < count; ++i) {
            const auto j =
                static_cast<size_t>(i) + rng.next_below(idx.size() - static_cast<size_t>(i));
            std::swap(idx[static_cast<size_t>(i)], idx[j]);
            out.push_back(pool[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
        }
        return out;
    };

    CounterRng rng_unknown(spec.seed, 0), rng_known(spec.seed, 1), rng_shuffle(spec.seed, 2);
    std::vector<QARecord> mix = draw(unknown, n_unknown, rng_unknown);
    std::vector<QARecord> from_known = draw(known, n_known, rng_known);
    mix.insert(mix.end(), std::make_move_iterator(from_known.begin()),
               std::make_move_iterator(from_known.end()));
    for (size_t i = mix.size(); i > 1; --i)
        std::swap(mix[i - 1], mix[rng_shuffle.next_below(i)]);
    return mix;
}

RecoveryReport knowledge_recovery(std::span<const uint8_t> base_correct,
                                  std::span<const uint8_t> tuned_correct,
                                  std::span<const uint8_t> tuned_steered_correct) {
    if (base_correct.size() != tuned_correct.size() ||
        base_correct.size() != tuned_steered_correct.size())
        throw ValidationError("knowledge_recovery: correctness vectors differ in length");
    if (base_correct.empty()) throw ValidationError("knowledge_recovery: empty eval set");

    RecoveryReport report;
    report.total = static_cast<int64_t>(base_correct.size());
    for (size_t i = 0; i < base_correct.size(); ++i) {
        const bool gain = tuned_steered_correct[i] && !tuned_correct[i];
        if (!gain) continue;
        ++report.gross_gains;
        if (base_correct[i]) ++report.recovered;
    }
    if (report.gross_gains > 0) {
        report.defined = true;
        report.recovered_fraction =
            static_cast<double>(report.recovered) / static_cast<double>(report.gross_gains);
    }
    return report;
}

RecoveryReport recovery_by_relation(std::span<const uint8_t> base_correct,
                                    std::span<const uint8_t> tuned_correct,
                                    std::span<const uint8_t> tuned_steered_correct,
                                    std::span<const std::string> relations, int64_t min_pool,
                                    int64_t min_gains) {
    if (relations.size() != base_correct.size())
        throw ValidationError("recovery_by_relation: relations length != correctness length");
    RecoveryReport report = knowledge_recovery(base_correct, tuned_correct, tuned_steered_correct);
    if (!report.defined) return report;

    std::map<std::string, RelationRecovery> by_rel;
    std::map<std::string, int64_t> joint;
    for (size_t i = 0; i < relations.size(); ++i) {
        auto& rel = by_rel[relations[i]];
        rel.relation = relations[i];
        ++rel.pool;
        const bool gain = tuned_steered_correct[i] && !tuned_correct[i];
        if (!gain) continue;
        ++rel.gains;
        if (base_correct[i]) ++joint[relations[i]];
    }
    // integer joint counts, one division each by the global gain count
    for (auto& [name, rel] : by_rel) {
        rel.share = static_cast<double>(joint[name]) / static_cast<double>(report.gross_gains);
        if (rel.pool >= min_pool && rel.gains >= min_gains) report.per_relation.push_back(rel);
    }
    std::sort(report.per_relation.begin(), report.per_relation.end(),
              [](const RelationRecovery& a, const RelationRecovery& b) {
                  if (a.share != b.share) return a.share > b.share;
                  return a.relation < b.relation;
              });
    return report;
}

} // namespace morfi
