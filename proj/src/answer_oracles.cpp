#include "morfi/answer_oracles.hpp"

namespace morfi {

namespace {
const char* const kWrongAnswer = "__no_such_answer__";
}

std::string FixedAnswerOracle::answer(const AnswerQuery& q) {
    internal_check(q.record != nullptr, "answer query without a record");
    return correct_ ? q.record->answer : kWrongAnswer;
}

ScriptedAnswerOracle::ScriptedAnswerOracle(std::map<std::string, ScriptedCounts> counts,
                                           int draws_per_set)
    : counts_(std::move(counts)), draws_per_set_(draws_per_set) {
    if (draws_per_set_ < 1)
        throw ValidationError("scripted oracle: draws_per_set must be >= 1");
}

std::string ScriptedAnswerOracle::answer(const AnswerQuery& q) {
    internal_check(q.record != nullptr, "answer query without a record");
    const auto it = counts_.find(q.record->id);
    if (it == counts_.end()) return kWrongAnswer;
    bool correct;
    if (q.draw < 0) {
        correct = q.exemplar_set < it->second.greedy;
    } else {
        const int flat = q.exemplar_set * draws_per_set_ + q.draw;
        correct = flat < it->second.sampled;
    }
    return correct ? q.record->answer : kWrongAnswer;
}

} // namespace morfi
