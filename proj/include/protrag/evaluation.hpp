#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protrag/annotation_store.hpp"

namespace protrag::eval {

/// Version of the tokenizer below. Scores from different versions are not comparable.
inline constexpr int kTokenizerVersion = 1;
inline constexpr double kSmoothingEpsilon = 1e-9;

/// Lowercases, detaches ASCII punctuation into single-character tokens and
/// splits on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// BLEU with uniform weights over n-gram orders 1..max_order, clipped counts,
/// brevity penalty, and zero match counts replaced by kSmoothingEpsilon.
/// Empty candidate scores 0.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference, int max_order);
double bleu4(std::string_view candidate, std::string_view reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// LCS F-measure with equal precision and recall weight. 0 when either side is empty.
double rouge_l(std::string_view candidate, std::string_view reference);

/// Case-insensitive set of entity surface forms, matched on token boundaries.
class EntityLexicon {
public:
    /// Adds one surface form; blank entries are ignored. The first spelling added
    /// is the one emitted by extract().
    void add(std::string_view surface);

    /// One surface form per line.
    static EntityLexicon load(const std::filesystem::path& path);
    static EntityLexicon from_go_terms(std::span<const GoTerm> terms);
    void merge(const EntityLexicon& other);

    /// Greedy left-to-right longest match; each match is one token.
    std::vector<std::string> extract(std::string_view text) const;

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

private:
    std::map<std::vector<std::string>, std::string> entries_;
    std::size_t longest_ = 0;
};

/// BLEU of order n over the entity sequences. n must be 2 or 4.
double e_bleu(std::string_view candidate, std::string_view reference, const EntityLexicon& lexicon, int n);

struct RecordScores {
    std::string id;
    std::string task;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
    /// Empty when the reference has no entities; such records are left out of
    /// the E-BLEU means.
    std::optional<double> e_bleu2;
    std::optional<double> e_bleu4;
};

RecordScores score_record(std::string id, std::string task, std::string_view candidate, std::string_view reference,
                          const EntityLexicon& lexicon);

struct TaskAggregate {
    std::string task;
    std::size_t records = 0;
    std::size_t entity_records = 0;
    /// Means in [0, 1]; E-BLEU means are empty when no record had entities.
    std::optional<double> e_bleu2;
    std::optional<double> e_bleu4;
    double bleu4 = 0.0;
    double rouge_l = 0.0;
};

struct MetricReport {
    std::vector<RecordScores> records;
    /// One row per task, sorted by task name.
    std::vector<TaskAggregate> tasks;
    std::size_t entity_empty_excluded = 0;
    std::size_t missing_reference_excluded = 0;
};

/// Groups by task; means are order-independent (values are summed in sorted order).
MetricReport aggregate(std::vector<RecordScores> records);

/// x100, one decimal.
std::string format_score(double v);

/// Aligned text table: Task, N, E-BL2, E-BL4, BL4, RG-L.
std::string render_table(const MetricReport& report);

/// One JSON object per line: every record (sorted by id), then one line per task.
std::string render_jsonl(const MetricReport& report);

}  // namespace protrag::eval
