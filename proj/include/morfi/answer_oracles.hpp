#pragma once

#include "morfi/knowledge.hpp"

#include <map>
#include <string>

namespace morfi {

// Answers every query with the gold answer, or with a throwaway wrong string.
class FixedAnswerOracle final : public AnswerOracle {
public:
    explicit FixedAnswerOracle(bool correct) : correct_(correct) {}
    std::string answer(const AnswerQuery& q) override;
    bool concurrent_safe() const override { return true; }

private:
    bool correct_;
};

// Per-record correctness budget: the first `greedy` exemplar prompts decode
// correctly at temperature 0, and the first `sampled` of the
// exemplar_sets * draws_per_set sampled decodes do. Ids without an entry
// always answer wrong.
struct ScriptedCounts {
    int greedy = 0;
    int sampled = 0;
};

class ScriptedAnswerOracle final : public AnswerOracle {
public:
    ScriptedAnswerOracle(std::map<std::string, ScriptedCounts> counts, int draws_per_set);
    std::string answer(const AnswerQuery& q) override;
    bool concurrent_safe() const override { return true; }

private:
    std::map<std::string, ScriptedCounts> counts_;
    int draws_per_set_;
};

} // namespace morfi
