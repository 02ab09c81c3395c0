#include "protrag/evidence_pool.hpp"

#include <map>
#include <stdexcept>
#include <tuple>

namespace protrag {

std::string_view to_string(PoolStage stage) {
    switch (stage) {
        case PoolStage::Raw: return "RAW";
        case PoolStage::Horizontal: return "HORIZONTAL";
        case PoolStage::Vertical: return "VERTICAL";
    }
    return "RAW";
}

PoolStage parse_pool_stage(std::string_view s) {
    if (s == "RAW") return PoolStage::Raw;
    if (s == "HORIZONTAL") return PoolStage::Horizontal;
    if (s == "VERTICAL") return PoolStage::Vertical;
    throw std::invalid_argument("unknown pool stage '" + std::string(s) + "'");
}

std::size_t EvidencePool::snippet_count() const {
    std::size_t n = 0;
    for (const auto& h : homologs) n += h.snippets.size();
    return n;
}

std::vector<AnnotationSnippet> EvidencePool::flatten() const {
    std::vector<AnnotationSnippet> out;
    out.reserve(snippet_count());
    for (const auto& h : homologs) out.insert(out.end(), h.snippets.begin(), h.snippets.end());
    return out;
}

void EvidencePool::check_invariants() const {
    for (std::size_t i = 0; i < homologs.size(); ++i) {
        const auto rank = static_cast<std::uint32_t>(i + 1);
        for (const auto& s : homologs[i].snippets) {
            if (s.homolog_rank != rank) throw std::logic_error("pool snippet carries rank " + std::to_string(s.homolog_rank) +
                                                               " under homolog " + std::to_string(rank));
            if (s.source_accession != homologs[i].hit.subject_accession)
                throw std::logic_error("pool snippet accession does not match its homolog");
            if (s.value.empty()) throw std::logic_error("pool snippet has an empty value");
        }
    }
}

bool is_forward_transition(PoolStage from, PoolStage to) {
    return static_cast<int>(to) > static_cast<int>(from);
}

bool is_sub_multiset(const EvidencePool& inner, const EvidencePool& outer) {
    using Key = std::tuple<std::string, std::string, std::string, std::uint32_t>;
    std::map<Key, long> counts;
    for (const auto& s : outer.flatten()) ++counts[{s.tag.name(), s.value, s.source_accession, s.homolog_rank}];
    for (const auto& s : inner.flatten()) {
        if (--counts[{s.tag.name(), s.value, s.source_accession, s.homolog_rank}] < 0) return false;
    }
    return true;
}

}  // namespace protrag
