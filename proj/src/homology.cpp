#include "protrag/homology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <stdexcept>

#include "protrag/annotation_store.hpp"
#include "protrag/error.hpp"
#include "protrag/evidence_pool.hpp"
#include "protrag/text.hpp"

namespace protrag {

namespace {

template <typename T>
T parse_number(std::string_view field, std::size_t lineno, std::string_view column) {
    field = text::trim(field);
    T value{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end || field.empty()) {
        throw ParseError(lineno, "column " + std::string(column) + " is not numeric: '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

bool is_valid_residue(char c) {
    static constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWYBZXUO";
    return kAlphabet.find(c) != std::string_view::npos;
}

QueryProtein make_query(std::string id, std::string_view sequence) {
    QueryProtein q{std::move(id), {}};
    q.sequence.reserve(sequence.size());
    for (char c : sequence) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
        const char up = text::to_upper(std::string_view(&c, 1))[0];
        if (!is_valid_residue(up))
            throw std::invalid_argument("query " + q.id + ": invalid residue '" + std::string(1, c) + "'");
        q.sequence.push_back(up);
    }
    if (q.sequence.empty()) throw std::invalid_argument("query " + q.id + ": empty sequence");
    return q;
}

std::vector<QueryProtein> read_fasta(std::istream& in) {
    std::vector<QueryProtein> out;
    std::string line;
    std::string id;
    std::string seq;
    bool open = false;
    std::size_t lineno = 0;
    auto flush = [&] {
        if (open) out.push_back(make_query(id, seq));
        seq.clear();
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty()) continue;
        if (t.front() == '>') {
            flush();
            const auto header = text::trim(t.substr(1));
            id = std::string(header.substr(0, header.find_first_of(" \t")));
            open = true;
        } else {
            if (!open) throw ParseError(lineno, "sequence data before the first FASTA header");
            seq.append(t);
        }
    }
    flush();
    return out;
}

void RetrievalConfig::validate() const {
    if (top_k < 1) throw ConfigError("retrieval.top_k must be >= 1");
    if (identity_ceiling && !(*identity_ceiling > 0.0 && *identity_ceiling <= 1.0))
        throw ConfigError("retrieval.identity_ceiling must lie in (0, 1]");
}

std::string normalize_subject_id(std::string_view sseqid) {
    auto id = text::trim(sseqid);
    if (id.find('|') != std::string_view::npos) {
        const auto parts = text::split(id, '|');
        // db|ACCESSION|NAME
        if (parts.size() >= 2 && !parts[1].empty()) {
            std::string acc = parts[1];
            if (const auto dot = acc.find('.'); dot != std::string::npos) acc.resize(dot);
            return acc;
        }
    }
    std::string acc(id);
    if (const auto dot = acc.find('.'); dot != std::string::npos) acc.resize(dot);
    return acc;
}

std::vector<HomologHit> parse_blast_tabular(std::istream& in, std::vector<std::string>* warnings) {
    std::vector<HomologHit> hits;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line.front() == '#') continue;
        const auto cols = text::split(line, '\t');
        if (cols.size() != 7) {
            throw ParseError(lineno, "expected 7 tab-separated columns "
                                     "(qseqid sseqid pident length nident evalue bitscore), got " +
                                         std::to_string(cols.size()));
        }
        HomologHit h;
        h.query_id = std::string(text::trim(cols[0]));
        h.subject_accession = normalize_subject_id(cols[1]);
        h.percent_identity = parse_number<double>(cols[2], lineno, "pident");
        h.alignment_length = parse_number<std::uint32_t>(cols[3], lineno, "length");
        h.identity_count = parse_number<std::uint32_t>(cols[4], lineno, "nident");
        h.e_value = parse_number<double>(cols[5], lineno, "evalue");
        h.bitscore = parse_number<double>(cols[6], lineno, "bitscore");

        if (h.query_id.empty() || h.subject_accession.empty()) throw ParseError(lineno, "empty query or subject id");
        if (h.identity_count > h.alignment_length)
            throw ParseError(lineno, "nident " + std::to_string(h.identity_count) + " exceeds alignment length " +
                                         std::to_string(h.alignment_length));
        if (h.alignment_length == 0) throw ParseError(lineno, "alignment length is zero");
        if (!(h.percent_identity >= 0.0 && h.percent_identity <= 100.0))
            throw ParseError(lineno, "pident outside [0, 100]");
        if (!(h.e_value >= 0.0) || !std::isfinite(h.bitscore)) throw ParseError(lineno, "invalid evalue or bitscore");

        const double implied = 100.0 * h.identity_count / h.alignment_length;
        if (warnings && std::abs(implied - h.percent_identity) > 0.05) {
            warnings->push_back("line " + std::to_string(lineno) + ": pident " + text::format_double(h.percent_identity) +
                                " disagrees with nident/length (" + text::format_fixed(implied, 3) + ")");
        }
        hits.push_back(std::move(h));
    }
    return hits;
}

bool ranks_before(const HomologHit& a, const HomologHit& b) {
    if (a.e_value != b.e_value) return a.e_value < b.e_value;
    if (a.bitscore != b.bitscore) return a.bitscore > b.bitscore;
    return a.subject_accession < b.subject_accession;
}

std::vector<HomologHit> exclude_self_hits(std::vector<HomologHit> hits, std::size_t query_length) {
    if (query_length == 0) throw std::invalid_argument("exclude_self_hits: query length must be positive");
    std::erase_if(hits, [&](const HomologHit& h) {
        return h.alignment_length == query_length && h.identity_count == query_length;
    });
    return hits;
}

std::vector<HomologHit> apply_identity_ceiling(std::vector<HomologHit> hits, double ceiling) {
    if (!(ceiling > 0.0 && ceiling <= 1.0)) throw std::invalid_argument("identity ceiling must lie in (0, 1]");
    std::erase_if(hits, [&](const HomologHit& h) { return h.percent_identity / 100.0 > ceiling; });
    return hits;
}

std::vector<HomologHit> rank_and_select(std::vector<HomologHit> hits, const RetrievalConfig& config,
                                        std::size_t query_length) {
    config.validate();
    for (const auto& h : hits) {
        if (h.query_id != hits.front().query_id)
            throw std::invalid_argument("rank_and_select: hits from several queries (" + hits.front().query_id + ", " +
                                        h.query_id + ")");
    }
    if (config.exclude_self) hits = exclude_self_hits(std::move(hits), query_length);
    if (config.identity_ceiling) hits = apply_identity_ceiling(std::move(hits), *config.identity_ceiling);
    std::stable_sort(hits.begin(), hits.end(), ranks_before);
    if (hits.size() > config.top_k) hits.resize(config.top_k);
    return hits;
}

std::map<std::string, std::vector<HomologHit>> group_by_query(const std::vector<HomologHit>& hits) {
    std::map<std::string, std::vector<HomologHit>> out;
    for (const auto& h : hits) out[h.query_id].push_back(h);
    return out;
}

EvidencePool assemble_raw_pool(const std::vector<HomologHit>& ranked_hits, const AnnotationIndex& index,
                               bool go_resolution) {
    EvidencePool pool;
    pool.stage = PoolStage::Raw;
    for (const auto& hit : ranked_hits) {
        ProteinEntry entry;
        try {
            entry = index.lookup(hit.subject_accession);
        } catch (const NotFoundError&) {
            pool.warnings.push_back("homolog " + hit.subject_accession + " is not in the annotation index; skipped");
            continue;
        }
        const auto rank = static_cast<std::uint32_t>(pool.homologs.size() + 1);
        PoolHomolog ph{hit, {}};
        for (auto s : entry.snippets) {
            s.source_accession = hit.subject_accession;
            s.homolog_rank = rank;
            ph.snippets.push_back(std::move(s));
        }
        if (go_resolution) {
            for (const auto& go_id : entry.go_ids) {
                for (auto s : index.resolve_go(go_id)) {
                    s.source_accession = hit.subject_accession;
                    s.homolog_rank = rank;
                    ph.snippets.push_back(std::move(s));
                }
            }
        }
        pool.homologs.push_back(std::move(ph));
    }
    return pool;
}

}  // namespace protrag
