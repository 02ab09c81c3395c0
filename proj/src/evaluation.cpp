#include "protrag/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "protrag/error.hpp"
#include "protrag/text.hpp"

namespace protrag::eval {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (c < 0x80 && std::ispunct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur += static_cast<char>(std::tolower(c));
        }
    }
    flush();
    return out;
}

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(std::span<const std::string> toks, std::size_t n) {
    NgramCounts out;
    if (toks.size() < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return out;
}

double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference, int max_order) {
    if (max_order < 1) throw std::invalid_argument("bleu: max_order must be >= 1");
    if (candidate.empty()) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= max_order; ++n) {
        const auto cand = ngrams(candidate, static_cast<std::size_t>(n));
        const auto ref = ngrams(reference, static_cast<std::size_t>(n));
        std::size_t total = 0, matched = 0;
        for (const auto& [g, c] : cand) {
            total += c;
            auto it = ref.find(g);
            if (it != ref.end()) matched += std::min(c, it->second);
        }
        const double num = matched > 0 ? static_cast<double>(matched) : kSmoothingEpsilon;
        const double den = total > 0 ? static_cast<double>(total) : 1.0;
        log_sum += std::log(num / den);
    }
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / max_order);
}

double bleu4(std::string_view candidate, std::string_view reference) {
    return bleu(tokenize(candidate), tokenize(reference), 4);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    if (c.empty() || r.empty()) return 0.0;
    const auto l = static_cast<double>(lcs_length(c, r));
    if (l == 0.0) return 0.0;
    const double p = l / static_cast<double>(c.size());
    const double rec = l / static_cast<double>(r.size());
    return 2.0 * p * rec / (p + rec);
}

void EntityLexicon::add(std::string_view surface) {
    const auto trimmed = text::trim(surface);
    auto key = tokenize(trimmed);
    if (key.empty()) return;
    longest_ = std::max(longest_, key.size());
    entries_.emplace(std::move(key), text::collapse_whitespace(trimmed));
}

EntityLexicon EntityLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open lexicon " + path.string());
    EntityLexicon lex;
    std::string line;
    while (std::getline(in, line)) lex.add(line);
    return lex;
}

EntityLexicon EntityLexicon::from_go_terms(std::span<const GoTerm> terms) {
    EntityLexicon lex;
    for (const auto& t : terms) lex.add(t.name);
    return lex;
}

void EntityLexicon::merge(const EntityLexicon& other) {
    for (const auto& [k, v] : other.entries_) entries_.emplace(k, v);
    longest_ = std::max(longest_, other.longest_);
}

std::vector<std::string> EntityLexicon::extract(std::string_view text) const {
    const auto toks = tokenize(text);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < toks.size()) {
        bool hit = false;
        for (std::size_t len = std::min(longest_, toks.size() - i); len >= 1; --len) {
            auto it = entries_.find(std::vector<std::string>(toks.begin() + i, toks.begin() + i + len));
            if (it != entries_.end()) {
                out.push_back(it->second);
                i += len;
                hit = true;
                break;
            }
        }
        if (!hit) ++i;
    }
    return out;
}

double e_bleu(std::string_view candidate, std::string_view reference, const EntityLexicon& lexicon, int n) {
    if (n != 2 && n != 4) throw std::invalid_argument("e_bleu: order must be 2 or 4");
    // Entity spellings are compared case-insensitively.
    auto lowered = [](std::vector<std::string> v) {
        for (auto& s : v) s = text::to_lower(s);
        return v;
    };
    return bleu(lowered(lexicon.extract(candidate)), lowered(lexicon.extract(reference)), n);
}

RecordScores score_record(std::string id, std::string task, std::string_view candidate, std::string_view reference,
                          const EntityLexicon& lexicon) {
    RecordScores s;
    s.id = std::move(id);
    s.task = std::move(task);
    s.bleu4 = bleu4(candidate, reference);
    s.rouge_l = rouge_l(candidate, reference);
    if (!lexicon.extract(reference).empty()) {
        s.e_bleu2 = e_bleu(candidate, reference, lexicon, 2);
        s.e_bleu4 = e_bleu(candidate, reference, lexicon, 4);
    }
    return s;
}

MetricReport aggregate(std::vector<RecordScores> records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.task, a.id) < std::tie(b.task, b.id);
    });
    MetricReport report;
    std::map<std::string, std::vector<const RecordScores*>> by_task;
    for (const auto& r : records) by_task[r.task].push_back(&r);
    for (const auto& [task, rows] : by_task) {
        TaskAggregate agg;
        agg.task = task;
        agg.records = rows.size();
        std::vector<double> b4, rl, e2, e4;
        for (const auto* r : rows) {
            b4.push_back(r->bleu4);
            rl.push_back(r->rouge_l);
            if (r->e_bleu2) {
                e2.push_back(*r->e_bleu2);
                e4.push_back(*r->e_bleu4);
            } else {
                ++report.entity_empty_excluded;
            }
        }
        const auto mean = [](const std::vector<double>& v) { return sorted_sum(v) / static_cast<double>(v.size()); };
        agg.bleu4 = mean(b4);
        agg.rouge_l = mean(rl);
        agg.entity_records = e2.size();
        if (!e2.empty()) {
            agg.e_bleu2 = mean(e2);
            agg.e_bleu4 = mean(e4);
        }
        report.tasks.push_back(std::move(agg));
    }
    report.records = std::move(records);
    return report;
}

std::string format_score(double v) { return text::format_fixed(v * 100.0, 1); }

std::string render_table(const MetricReport& report) {
    const std::vector<std::string> header{"Task", "N", "E-BL2", "E-BL4", "BL4", "RG-L"};
    std::vector<std::vector<std::string>> rows{header};
    auto opt = [](const std::optional<double>& v) { return v ? format_score(*v) : std::string("-"); };
    for (const auto& t : report.tasks)
        rows.push_back({t.task, std::to_string(t.records), opt(t.e_bleu2), opt(t.e_bleu4), format_score(t.bleu4),
                        format_score(t.rouge_l)});
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    std::ostringstream out;
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c == 0)
                out << std::left << std::setw(static_cast<int>(width[c])) << r[c];
            else
                out << "  " << std::right << std::setw(static_cast<int>(width[c])) << r[c];
        }
        out << '\n';
    }
    out << "E-BLEU (lexicon): " << report.entity_empty_excluded << " record(s) without reference entities excluded\n";
    if (report.missing_reference_excluded > 0)
        out << report.missing_reference_excluded << " record(s) without a reference answer excluded\n";
    return out.str();
}

std::string render_jsonl(const MetricReport& report) {
    using nlohmann::ordered_json;
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    std::vector<const RecordScores*> recs;
    for (const auto& r : report.records) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return std::tie(a->id, a->task) < std::tie(b->id, b->task); });
    std::string out;
    for (const auto* r : recs) {
        ordered_json j{{"kind", "record"}, {"id", r->id},           {"task", r->task},
                       {"bleu4", r->bleu4}, {"rouge_l", r->rouge_l}, {"e_bleu2", opt(r->e_bleu2)},
                       {"e_bleu4", opt(r->e_bleu4)}};
        out += j.dump() + "\n";
    }
    for (const auto& t : report.tasks) {
        ordered_json j{{"kind", "task"},          {"task", t.task},           {"records", t.records},
                       {"entity_records", t.entity_records}, {"e_bleu2", opt(t.e_bleu2)}, {"e_bleu4", opt(t.e_bleu4)},
                       {"bleu4", t.bleu4},        {"rouge_l", t.rouge_l},     {"metric_note", "E-BLEU (lexicon)"}};
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace protrag::eval
