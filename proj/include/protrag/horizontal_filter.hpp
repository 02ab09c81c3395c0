#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protrag/annotation_store.hpp"
#include "protrag/llm_gateway.hpp"
#include "protrag/qa_record.hpp"
#include "protrag/token_probs.hpp"

namespace protrag {

/// Teacher-side confidence and labeling parameters.
struct IgConfig {
    /// Smoothing window width; odd, >= 1.
    std::uint32_t window = 3;
    /// Number of leading tokens that get the importance weight (clamped to the sequence length).
    std::uint32_t head_k = 5;
    /// Importance weight of the head tokens, constant across positions.
    double omega = 0.8;
    /// Mixing exponent between head and tail tokens.
    double alpha = 0.5;
    /// Labeling threshold; a snippet is relevant when its IG is strictly greater.
    double tau = 0.01;

    void validate() const;
};

inline constexpr double kProbabilityFloor = 1e-9;

/// Windowed mean of the probabilities. The window is centered on each token and
/// truncated at the sequence ends (mean over the neighbors that exist).
TokenProbSequence smooth_probs(const TokenProbSequence& seq, std::uint32_t window);

/// prod_{i<=k} p_i^(omega*alpha) * prod_{j>k} p_j^(1-alpha), computed in log space
/// with probabilities floored at kProbabilityFloor. k = min(head_k, length).
double weighted_confidence(const TokenProbSequence& smoothed, const IgConfig& cfg);

/// smooth_probs followed by weighted_confidence.
double sequence_confidence(const TokenProbSequence& raw, const IgConfig& cfg);

/// Teacher prompt templates. The query-only prompt is the document prompt
/// without its evidence line.
std::string teacher_prompt(std::string_view query_context);
std::string teacher_prompt(std::string_view query_context, std::string_view document);

/// Confidence in `target` with the document minus confidence without it.
double information_gain(TokenScorer& scorer, std::string_view query_context, std::string_view document,
                        std::string_view target, const IgConfig& cfg);

struct Fragment {
    std::string text;
    std::size_t index = 0;

    friend bool operator==(const Fragment&, const Fragment&) = default;
};

/// Sentence split on '.', '!' or '?' followed by whitespace or end of text.
/// "e.g.", "i.e." and "approx." do not end a sentence.
std::vector<Fragment> split_fragments(std::string_view answer);

/// Maximum information_gain over the fragments (each fragment is a target).
double segment_ig(TokenScorer& scorer, std::string_view query_context, std::string_view document,
                  std::span<const Fragment> fragments, const IgConfig& cfg);

/// 1 iff ig > tau.
int label_snippet(double ig, double tau);

struct DistillationExample {
    std::string instruction;
    AttributeTag tag;
    int label = 0;
    double ig = 0.0;

    friend bool operator==(const DistillationExample&, const DistillationExample&) = default;
};

void write_examples(std::ostream& out, std::span<const DistillationExample> examples);
std::vector<DistillationExample> read_examples(std::istream& in);

struct DistillationSplit {
    std::vector<DistillationExample> train;
    std::vector<DistillationExample> test;
};

struct DistillationConfig {
    std::size_t per_type = 100;
    /// Train share of the per-type records (4:1 split).
    std::size_t train_parts = 4;
    std::size_t test_parts = 1;
    std::uint64_t seed = 42;
    IgConfig ig;
};

/// Retrieved snippets for one record (the retrieval stage, or a fixture).
using SnippetSource = std::function<std::vector<AnnotationSnippet>(const QARecord&)>;

/// Text shown to the teacher as the instruction/sequence context of a record.
std::string teacher_query_context(const QARecord& record);

/// Text shown to the teacher as one evidence document.
std::string render_document(const AnnotationSnippet& snippet);

/// Samples up to per_type records per instruction type, splits them 4:1 per type
/// (records, not examples), and labels every snippet of each record with its
/// segment-wise IG. Records without an answer are not eligible.
DistillationSplit build_distillation_set(std::span<const QARecord> dataset, const SnippetSource& snippets,
                                         TokenScorer& scorer, const DistillationConfig& cfg);

/// Number of train records out of n under a train:test proportion (nearest integer).
std::size_t train_share(std::size_t n, std::size_t train_parts, std::size_t test_parts);

}  // namespace protrag
