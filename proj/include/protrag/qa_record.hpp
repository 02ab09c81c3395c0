#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace protrag {

/// One dataset row: instruction, protein sequence and (optionally) the reference answer.
struct QARecord {
    std::string id;
    std::string instruction;
    std::string sequence;
    std::optional<std::string> answer;
    std::string task;
    std::string instruction_type;

    friend bool operator==(const QARecord&, const QARecord&) = default;
};

/// Validates and converts one JSON object with fields
/// {id, instruction, sequence, answer?, task, instruction_type}.
/// Throws std::invalid_argument when a field is missing or invalid.
QARecord qa_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const QARecord& r);

struct DatasetReadResult {
    std::vector<QARecord> records;
    /// "line N (id X): reason" for each skipped row.
    std::vector<std::string> skipped;
};

/// Reads line-delimited records, skipping (and reporting) malformed ones.
DatasetReadResult read_dataset(std::istream& in);

}  // namespace protrag
