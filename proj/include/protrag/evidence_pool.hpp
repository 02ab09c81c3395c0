#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "protrag/annotation_store.hpp"
#include "protrag/homology.hpp"

namespace protrag {

enum class PoolStage { Raw, Horizontal, Vertical };

std::string_view to_string(PoolStage stage);
PoolStage parse_pool_stage(std::string_view s);

struct PoolHomolog {
    HomologHit hit;
    std::vector<AnnotationSnippet> snippets;

    friend bool operator==(const PoolHomolog&, const PoolHomolog&) = default;
};

/// Snippets grouped by homolog rank. Filtering stages keep every homolog (possibly
/// with no snippets left) so that ranks stay 1..n.
struct EvidencePool {
    PoolStage stage = PoolStage::Raw;
    std::vector<PoolHomolog> homologs;
    std::vector<std::string> warnings;

    std::size_t snippet_count() const;

    /// All snippets in (rank, position) order. This is the order used to pair
    /// snippets with embedding vectors.
    std::vector<AnnotationSnippet> flatten() const;

    /// Throws std::logic_error if ranks are not 1..n or a snippet carries the
    /// wrong rank/accession.
    void check_invariants() const;

    friend bool operator==(const EvidencePool&, const EvidencePool&) = default;
};

/// True when moving from `from` to `to` follows RAW -> HORIZONTAL -> VERTICAL
/// (skipping HORIZONTAL is allowed).
bool is_forward_transition(PoolStage from, PoolStage to);

/// True when every snippet of `inner` (tag, value, accession, rank) occurs in
/// `outer` at least as many times.
bool is_sub_multiset(const EvidencePool& inner, const EvidencePool& outer);

}  // namespace protrag
