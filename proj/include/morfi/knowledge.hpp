#pragma once

#include "morfi/common.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace morfi {

struct QARecord {
    std::string id;
    std::string question;
    std::string answer;
    std::string relation;
    std::vector<std::string> aliases;
};

enum class KnowledgeCategory { highly_known, maybe_known, weakly_known, unknown };

const char* to_string(KnowledgeCategory c);
std::optional<KnowledgeCategory> category_from_string(const std::string& s);
inline bool is_known(KnowledgeCategory c) { return c != KnowledgeCategory::unknown; }

struct KnowledgeAnnotation {
    double p_greedy = 0.0;
    double p_sampled = 0.0;
    KnowledgeCategory category = KnowledgeCategory::unknown;
};

struct PCorrectParams {
    int exemplar_sets = 10;   // independent few-shot prompts per record
    int demonstrations = 4;   // same-relation demonstrations per prompt
    int draws_per_set = 16;   // sampled decodes per prompt (sampled mode)
    double temperature = 0.5; // sampling-mode decode settings, owned by the oracle
    int sample_top_k = 40;
};

enum class PCorrectMode { greedy, sampled };

struct AnswerQuery {
    const QARecord* record = nullptr;
    std::string prompt;
    int exemplar_set = 0;
    int draw = -1; // -1 = greedy decode, otherwise the sampled draw index
};

// Produces the model's answer text for a query. Must be deterministic per
// (record, exemplar_set, draw). Throws OracleError on failure.
class AnswerOracle {
public:
    virtual ~AnswerOracle() = default;
    virtual std::string answer(const AnswerQuery& q) = 0;
    // Annotation runs single-threaded unless this returns true.
    virtual bool concurrent_safe() const { return false; }
};

// Lowercase, trimmed, inner whitespace runs collapsed to single spaces.
std::string normalize_answer(std::string_view text);

// Case-insensitive exact match against the gold answer or any alias.
bool answer_matches(std::string_view model_answer, const QARecord& rec);

// "Q: {question}\nA: {answer}" per demonstration, blank-line separated, then
// the query as "Q: {question}\nA:". The demonstration template is replaceable
// (slots {question} and {answer}).
extern const char* const kDefaultPromptTemplate;
std::string build_prompt(const std::vector<const QARecord*>& demonstrations,
                         const std::string& question,
                         const std::string& demo_template = kDefaultPromptTemplate);

// Fraction of prompts (greedy) or of all sampled draws (sampled) answered
// correctly; counts are integers divided exactly once. Demonstrations are
// drawn per exemplar set from same-relation pool records (never the record
// itself), seeded and deterministic.
double p_correct(const QARecord& rec, std::span<const QARecord> pool, AnswerOracle& oracle,
                 PCorrectMode mode, const PCorrectParams& params, uint64_t seed);

// p_greedy = 1 -> highly known; 0 < p_greedy < 1 -> maybe known;
// p_greedy = 0 and p_sampled > 0 -> weakly known; both zero -> unknown.
KnowledgeCategory categorize(double p_greedy, double p_sampled);

KnowledgeAnnotation annotate_record(const QARecord& rec, std::span<const QARecord> pool,
                                    AnswerOracle& oracle, const PCorrectParams& params,
                                    uint64_t seed);

// Annotates every record against the whole file as demonstration pool.
// Records are independent, so this parallelizes when the oracle allows it;
// results do not depend on the thread count.
std::vector<KnowledgeAnnotation> annotate_records(std::span<const QARecord> records,
                                                  AnswerOracle& oracle,
                                                  const PCorrectParams& params, uint64_t seed,
                                                  int threads = 1);

// Mixture D_p: |D_p| = size with round-half-away-from-zero(size * p / 100)
// unknown records, sampled without replacement from each pool and shuffled.
struct MixtureSpec {
    int percent_unknown = 0; // must sit on the configured grid
    Index size = 0;
    uint64_t seed = 0;
};

inline constexpr std::array<int, 7> kMixtureGrid = {0, 10, 25, 50, 75, 90, 100};

std::vector<QARecord> build_mixture(std::span<const QARecord> known,
                                    std::span<const QARecord> unknown, const MixtureSpec& spec,
                                    std::span<const int> allowed_percents = kMixtureGrid);

// How many of the eval items a steered fine-tuned model answers correctly
// (gains) were already answered correctly by the base model: the recovered
// fraction P(base correct | steered correct, unsteered wrong).
struct RelationRecovery {
    std::string relation;
    double share = 0.0;   // joint gains in this relation / all gross gains
    int64_t gains = 0;    // gross gains whose record has this relation
    int64_t pool = 0;     // eval records with this relation
};

struct RecoveryReport {
    bool defined = false; // false when there are no gross gains
    double recovered_fraction = 0.0;
    int64_t gross_gains = 0;
    int64_t recovered = 0;
    int64_t total = 0;
    std::vector<RelationRecovery> per_relation; // share desc, thresholds applied
};

RecoveryReport knowledge_recovery(std::span<const uint8_t> base_correct,
                                  std::span<const uint8_t> tuned_correct,
                                  std::span<const uint8_t> tuned_steered_correct);

// Adds the per-relation breakdown; a relation is reported only when its eval
// pool has at least min_pool records and contributes at least min_gains gross
// gains. Shares always use the global gain count as denominator, so the
// unthresholded shares sum to the overall recovered fraction.
RecoveryReport recovery_by_relation(std::span<const uint8_t> base_correct,
                                    std::span<const uint8_t> tuned_correct,
                                    std::span<const uint8_t> tuned_steered_correct,
                                    std::span<const std::string> relations,
                                    int64_t min_pool = 50, int64_t min_gains = 10);

} // namespace morfi
