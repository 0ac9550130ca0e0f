#include "morfi/records_io.hpp"

#include <json.hpp>

#include <fstream>

namespace morfi {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void line_error(const std::string& path, size_t line_no, const std::string& what) {
    throw ValidationError(path + ":" + std::to_string(line_no) + ": " + what);
}

std::string require_string(const json& obj, const char* key, const std::string& path,
                           size_t line_no) {
    const auto it = obj.find(key);
    if (it == obj.end()) line_error(path, line_no, std::string("missing \"") + key + "\" field");
    if (!it->is_string())
        line_error(path, line_no, std::string("\"") + key + "\" must be a string");
    std::string value = it->get<std::string>();
    if (value.empty()) line_error(path, line_no, std::string("\"") + key + "\" must be nonempty");
    return value;
}

double require_probability(const json& obj, const char* key, const std::string& path,
                           size_t line_no) {
    const auto it = obj.find(key);
    if (it == obj.end()) line_error(path, line_no, std::string("missing \"") + key + "\" field");
    if (!it->is_number())
        line_error(path, line_no, std::string("\"") + key + "\" must be a number");
    const double v = it->get<double>();
    if (!(v >= 0.0 && v <= 1.0))
        line_error(path, line_no, std::string("\"") + key + "\" must lie in [0, 1]");
    return v;
}

// Applies fn(line_json, line_no) to every nonempty line.
template <typename Fn>
void for_each_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded()) line_error(path, line_no, "invalid JSON");
        if (!obj.is_object()) line_error(path, line_no, "expected a JSON object");
        fn(obj, line_no);
    }
    if (in.bad()) throw ValidationError("read error on " + path);
}

QARecord parse_record(const json& obj, const std::string& path, size_t line_no) {
    QARecord rec;
    rec.id = require_string(obj, "id", path, line_no);
    rec.question = require_string(obj, "question", path, line_no);
    rec.answer = require_string(obj, "answer", path, line_no);
    rec.relation = require_string(obj, "relation", path, line_no);
    if (const auto it = obj.find("aliases"); it != obj.end()) {
        if (!it->is_array()) line_error(path, line_no, "\"aliases\" must be an array");
        for (const auto& alias : *it) {
            if (!alias.is_string())
                line_error(path, line_no, "\"aliases\" entries must be strings");
            rec.aliases.push_back(alias.get<std::string>());
        }
    }
    return rec;
}

ordered_json record_fields(const QARecord& rec) {
    ordered_json obj;
    obj["id"] = rec.id;
    obj["question"] = rec.question;
    obj["answer"] = rec.answer;
    obj["relation"] = rec.relation;
    if (!rec.aliases.empty()) obj["aliases"] = rec.aliases;
    return obj;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path);
    return out;
}

} // namespace

std::vector<QARecord> read_qa_records(const std::string& path) {
    std::vector<QARecord> records;
    for_each_line(path, [&](const json& obj, size_t line_no) {
        records.push_back(parse_record(obj, path, line_no));
    });
    return records;
}

void write_qa_records(const std::string& path, const std::vector<QARecord>& records) {
    auto out = open_out(path);
    for (const auto& rec : records) out << record_fields(rec).dump() << '\n';
    if (!out) throw ValidationError("write error on " + path);
}

std::vector<AnnotatedRecord> read_annotated_records(const std::string& path) {
    std::vector<AnnotatedRecord> records;
    for_each_line(path, [&](const json& obj, size_t line_no) {
        AnnotatedRecord rec;
        rec.record = parse_record(obj, path, line_no);
        rec.annotation.p_greedy = require_probability(obj, "p_greedy", path, line_no);
        rec.annotation.p_sampled = require_probability(obj, "p_sampled", path, line_no);
        const std::string cat = require_string(obj, "category", path, line_no);
        const auto parsed = category_from_string(cat);
        if (!parsed) line_error(path, line_no, "unknown category \"" + cat + "\"");
        rec.annotation.category = *parsed;
        records.push_back(std::move(rec));
    });
    return records;
}

void write_annotated_records(const std::string& path,
                             const std::vector<AnnotatedRecord>& records) {
    auto out = open_out(path);
    for (const auto& rec : records) {
        ordered_json obj = record_fields(rec.record);
        obj["p_greedy"] = rec.annotation.p_greedy;
        obj["p_sampled"] = rec.annotation.p_sampled;
        obj["category"] = to_string(rec.annotation.category);
        obj["label"] = is_known(rec.annotation.category) ? "Known" : "Unknown";
        out << obj.dump() << '\n';
    }
    if (!out) throw ValidationError("write error on " + path);
}

std::vector<CorrectnessRecord> read_correctness(const std::string& path) {
    std::vector<CorrectnessRecord> records;
    for_each_line(path, [&](const json& obj, size_t line_no) {
        CorrectnessRecord rec;
        rec.id = require_string(obj, "id", path, line_no);
        const auto it = obj.find("correct");
        if (it == obj.end()) line_error(path, line_no, "missing \"correct\" field");
        if (it->is_boolean())
            rec.correct = it->get<bool>() ? 1 : 0;
        else if (it->is_number_integer() &&
                 (it->get<int64_t>() == 0 || it->get<int64_t>() == 1))
            rec.correct = static_cast<uint8_t>(it->get<int64_t>());
        else
            line_error(path, line_no, "\"correct\" must be a boolean or 0/1");
        if (const auto rel = obj.find("relation"); rel != obj.end()) {
            if (!rel->is_string()) line_error(path, line_no, "\"relation\" must be a string");
            rec.relation = rel->get<std::string>();
        }
        records.push_back(std::move(rec));
    });
    return records;
}

void write_correctness(const std::string& path, const std::vector<CorrectnessRecord>& records) {
    auto out = open_out(path);
    for (const auto& rec : records) {
        ordered_json obj;
        obj["id"] = rec.id;
        obj["correct"] = rec.correct != 0;
        if (!rec.relation.empty()) obj["relation"] = rec.relation;
        out << obj.dump() << '\n';
    }
    if (!out) throw ValidationError("write error on " + path);
}

} // namespace morfi
