#include "protrag/horizontal_filter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "protrag/error.hpp"
#include "protrag/rng.hpp"
#include "protrag/text.hpp"

namespace protrag {

using nlohmann::json;

void IgConfig::validate() const {
    if (window < 1 || window % 2 == 0) throw ConfigError("ig.window must be an odd integer >= 1");
    if (!(omega > 0.0 && omega <= 1.0)) throw ConfigError("ig.omega must lie in (0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("ig.alpha must lie in [0, 1]");
    if (!(tau > 0.0)) throw ConfigError("ig.tau must be > 0");
}

TokenProbSequence smooth_probs(const TokenProbSequence& seq, std::uint32_t window) {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("smoothing window must be odd and >= 1");
    seq.validate();
    TokenProbSequence out;
    out.tokens = seq.tokens;
    out.probs.resize(seq.size());
    const std::size_t half = window / 2;
    const std::size_t n = seq.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) sum += seq.probs[j];
        out.probs[i] = std::clamp(sum / static_cast<double>(hi - lo + 1), 0.0, 1.0);
    }
    return out;
}

double weighted_confidence(const TokenProbSequence& smoothed, const IgConfig& cfg) {
    const std::size_t n = smoothed.size();
    const std::size_t k = std::min<std::size_t>(cfg.head_k, n);
    const double head_exp = cfg.omega * cfg.alpha;
    const double tail_exp = 1.0 - cfg.alpha;
    double log_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lp = std::log(std::max(smoothed.probs[i], kProbabilityFloor));
        log_sum += (i < k ? head_exp : tail_exp) * lp;
    }
    return std::exp(log_sum);
}

double sequence_confidence(const TokenProbSequence& raw, const IgConfig& cfg) {
    return weighted_confidence(smooth_probs(raw, cfg.window), cfg);
}

std::string teacher_prompt(std::string_view query_context) {
    return std::string(query_context) + "\nAnswer: ";
}

std::string teacher_prompt(std::string_view query_context, std::string_view document) {
    return "Evidence: " + std::string(document) + "\n" + std::string(query_context) + "\nAnswer: ";
}

double information_gain(TokenScorer& scorer, std::string_view query_context, std::string_view document,
                        std::string_view target, const IgConfig& cfg) {
    TokenProbSequence with_doc;
    TokenProbSequence without_doc;
    try {
        with_doc = scorer.score_tokens(teacher_prompt(query_context, document), target);
    } catch (const std::exception& e) {
        throw Error(std::string("information gain: with-document scoring leg failed: ") + e.what());
    }
    try {
        without_doc = scorer.score_tokens(teacher_prompt(query_context), target);
    } catch (const std::exception& e) {
        throw Error(std::string("information gain: query-only scoring leg failed: ") + e.what());
    }
    return sequence_confidence(with_doc, cfg) - sequence_confidence(without_doc, cfg);
}

namespace {

bool is_abbreviation(std::string_view s, std::size_t dot) {
    std::size_t start = dot;
    while (start > 0 && !std::isspace(static_cast<unsigned char>(s[start - 1]))) --start;
    auto tok = s.substr(start, dot - start + 1);
    while (!tok.empty() && (tok.front() == '(' || tok.front() == '[' || tok.front() == '"')) tok.remove_prefix(1);
    const auto lower = text::to_lower(tok);
    return lower == "e.g." || lower == "i.e." || lower == "approx.";
}

}  // namespace

std::vector<Fragment> split_fragments(std::string_view answer) {
    std::vector<Fragment> out;
    auto push = [&](std::string_view piece) {
        const auto t = text::trim(piece);
        if (!t.empty()) out.push_back(Fragment{std::string(t), out.size()});
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < answer.size(); ++i) {
        const char c = answer[i];
        if (c != '.' && c != '!' && c != '?') continue;
        const bool boundary = i + 1 == answer.size() || std::isspace(static_cast<unsigned char>(answer[i + 1]));
        if (!boundary) continue;
        if (c == '.' && is_abbreviation(answer, i)) continue;
        push(answer.substr(start, i + 1 - start));
        start = i + 1;
    }
    if (start < answer.size()) push(answer.substr(start));
    return out;
}

double segment_ig(TokenScorer& scorer, std::string_view query_context, std::string_view document,
                  std::span<const Fragment> fragments, const IgConfig& cfg) {
    if (fragments.empty()) throw std::invalid_argument("segment_ig: no fragments");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& f : fragments) {
        best = std::max(best, information_gain(scorer, query_context, document, f.text, cfg));
    }
    return best;
}

int label_snippet(double ig, double tau) { return ig > tau ? 1 : 0; }

void write_examples(std::ostream& out, std::span<const DistillationExample> examples) {
    for (const auto& e : examples) {
        json j;
        j["instruction"] = e.instruction;
        j["tag"] = e.tag.name();
        j["label"] = e.label;
        j["ig"] = e.ig;
        out << j.dump() << '\n';
    }
}

std::vector<DistillationExample> read_examples(std::istream& in) {
    std::vector<DistillationExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = json::parse(line);
            const int label = j.at("label").get<int>();
            if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
            out.push_back(DistillationExample{j.at("instruction").get<std::string>(),
                                              AttributeTag(j.at("tag").get<std::string>()), label,
                                              j.value("ig", 0.0)});
        } catch (const std::exception& e) {
            throw ParseError(lineno, std::string("bad distillation example: ") + e.what());
        }
    }
    return out;
}

std::string teacher_query_context(const QARecord& record) {
    return "Instruction: " + record.instruction + "\nSequence: " + record.sequence;
}

std::string render_document(const AnnotationSnippet& snippet) { return snippet.tag.name() + ": " + snippet.value; }

std::size_t train_share(std::size_t n, std::size_t train_parts, std::size_t test_parts) {
    const std::size_t total = train_parts + test_parts;
    if (total == 0) throw std::invalid_argument("split proportion is 0:0");
    return (n * train_parts + total / 2) / total;
}

DistillationSplit build_distillation_set(std::span<const QARecord> dataset, const SnippetSource& snippets,
                                         TokenScorer& scorer, const DistillationConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("distillation dataset is empty");
    cfg.ig.validate();
    std::map<std::string, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].answer && !text::trim(*dataset[i].answer).empty())
            by_type[dataset[i].instruction_type].push_back(i);
    }
    if (by_type.empty()) throw std::invalid_argument("no dataset record carries a reference answer");

    Rng rng(cfg.seed);
    DistillationSplit split;
    for (auto& [type, indices] : by_type) {
        rng.shuffle(indices);
        if (indices.size() > cfg.per_type) indices.resize(cfg.per_type);
        const auto n_train = train_share(indices.size(), cfg.train_parts, cfg.test_parts);
        for (std::size_t pos = 0; pos < indices.size(); ++pos) {
            const auto& record = dataset[indices[pos]];
            auto& sink = pos < n_train ? split.train : split.test;
            const auto fragments = split_fragments(*record.answer);
            if (fragments.empty()) continue;
            const auto context = teacher_query_context(record);
            for (const auto& s : snippets(record)) {
                const double ig = segment_ig(scorer, context, render_document(s), fragments, cfg.ig);
                sink.push_back(DistillationExample{record.instruction, s.tag, label_snippet(ig, cfg.ig.tau), ig});
            }
        }
    }
    return split;
}

}  // namespace protrag
