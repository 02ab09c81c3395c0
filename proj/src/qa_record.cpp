#include "protrag/qa_record.hpp"

#include <istream>
#include <stdexcept>

#include "protrag/homology.hpp"
#include "protrag/text.hpp"

namespace protrag {

using nlohmann::json;

namespace {
std::string required_string(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) throw std::invalid_argument(std::string("missing string field '") + key + "'");
    return j.at(key).get<std::string>();
}
}  // namespace

QARecord qa_record_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
    QARecord r;
    r.id = required_string(j, "id");
    if (text::trim(r.id).empty()) throw std::invalid_argument("empty id");
    r.instruction = required_string(j, "instruction");
    if (text::trim(r.instruction).empty()) throw std::invalid_argument("empty instruction");
    r.sequence = make_query(r.id, required_string(j, "sequence")).sequence;
    if (j.contains("answer") && !j.at("answer").is_null()) {
        if (!j.at("answer").is_string()) throw std::invalid_argument("field 'answer' is not a string");
        r.answer = j.at("answer").get<std::string>();
    }
    r.task = j.contains("task") ? required_string(j, "task") : std::string("default");
    r.instruction_type = j.contains("instruction_type") ? required_string(j, "instruction_type") : r.task;
    return r;
}

json to_json(const QARecord& r) {
    json j;
    j["id"] = r.id;
    j["instruction"] = r.instruction;
    j["sequence"] = r.sequence;
    j["answer"] = r.answer ? json(*r.answer) : json(nullptr);
    j["task"] = r.task;
    j["instruction_type"] = r.instruction_type;
    return j;
}

DatasetReadResult read_dataset(std::istream& in) {
    DatasetReadResult out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        std::string id = "?";
        try {
            const auto j = json::parse(line);
            if (j.is_object() && j.contains("id") && j.at("id").is_string()) id = j.at("id").get<std::string>();
            out.records.push_back(qa_record_from_json(j));
        } catch (const std::exception& e) {
            out.skipped.push_back("line " + std::to_string(lineno) + " (id " + id + "): " + e.what());
        }
    }
    return out;
}

}  // namespace protrag
