#pragma once

#include "morfi/knowledge.hpp"

#include <string>
#include <vector>

namespace morfi {

// QA datasets travel as JSON lines, one object per record:
//   {"id": "q1", "question": "...", "answer": "...", "relation": "P17",
//    "aliases": ["..."]}
// aliases is optional; everything else is required. Annotated files carry the
// same fields plus {"p_greedy", "p_sampled", "category", "label"}. Parse
// errors name the offending line.

struct AnnotatedRecord {
    QARecord record;
    KnowledgeAnnotation annotation;
};

std::vector<QARecord> read_qa_records(const std::string& path);
void write_qa_records(const std::string& path, const std::vector<QARecord>& records);

std::vector<AnnotatedRecord> read_annotated_records(const std::string& path);
void write_annotated_records(const std::string& path, const std::vector<AnnotatedRecord>& records);

// Correctness vectors for the recovery analysis, one JSONL object per eval
// item: {"id": "q1", "correct": true, "relation": "P17"} with relation
// optional. Files being compared must list the same ids in the same order.
struct CorrectnessRecord {
    std::string id;
    std::string relation; // empty when absent
    uint8_t correct = 0;
};

std::vector<CorrectnessRecord> read_correctness(const std::string& path);
void write_correctness(const std::string& path, const std::vector<CorrectnessRecord>& records);

} // namespace morfi
