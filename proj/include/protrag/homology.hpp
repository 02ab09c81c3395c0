#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace protrag {

class AnnotationIndex;
struct EvidencePool;

struct QueryProtein {
    std::string id;
    std::string sequence;

    std::size_t length() const noexcept { return sequence.size(); }
};

/// Uppercases and validates against the 20 standard residues plus B, Z, X, U, O.
/// Throws std::invalid_argument on an empty sequence or a foreign character.
QueryProtein make_query(std::string id, std::string_view sequence);

/// Reads every record of a FASTA stream.
std::vector<QueryProtein> read_fasta(std::istream& in);

bool is_valid_residue(char c);

/// One row of BLAST tabular output (qseqid sseqid pident length nident evalue bitscore).
struct HomologHit {
    std::string query_id;
    std::string subject_accession;
    double percent_identity = 0.0;
    std::uint32_t alignment_length = 0;
    std::uint32_t identity_count = 0;
    double e_value = 0.0;
    double bitscore = 0.0;

    friend bool operator==(const HomologHit&, const HomologHit&) = default;
};

struct RetrievalConfig {
    std::uint32_t top_k = 3;
    /// Fraction in (0, 1]; hits with percent_identity / 100 above it are dropped.
    std::optional<double> identity_ceiling;
    bool exclude_self = true;

    void validate() const;
};

/// Reduces "sp|Q55C17.1|ELOV_DICDI" style subject ids to the bare accession.
std::string normalize_subject_id(std::string_view sseqid);

/// Parses the 7-column tabular format. Lines starting with '#' are skipped.
/// Rows whose pident disagrees with 100*nident/length by more than 0.05 are
/// kept, with a note appended to `warnings` when provided.
std::vector<HomologHit> parse_blast_tabular(std::istream& in, std::vector<std::string>* warnings = nullptr);

/// Strict weak order used for ranking: e-value ascending, bitscore descending,
/// accession ascending.
bool ranks_before(const HomologHit& a, const HomologHit& b);

/// Drops hits where alignment length, identity count and query length all coincide.
std::vector<HomologHit> exclude_self_hits(std::vector<HomologHit> hits, std::size_t query_length);

std::vector<HomologHit> apply_identity_ceiling(std::vector<HomologHit> hits, double ceiling);

/// Applies the configured exclusion filters, sorts, and keeps the first top_k.
/// All hits must share one query id.
std::vector<HomologHit> rank_and_select(std::vector<HomologHit> hits, const RetrievalConfig& config,
                                        std::size_t query_length);

/// Groups hits by query id, preserving per-query input order.
std::map<std::string, std::vector<HomologHit>> group_by_query(const std::vector<HomologHit>& hits);

/// Builds the RAW pool from ranked hits. Accessions missing from the index are
/// skipped with a warning and the remaining homologs are renumbered 1..n.
EvidencePool assemble_raw_pool(const std::vector<HomologHit>& ranked_hits, const AnnotationIndex& index,
                               bool go_resolution);

}  // namespace protrag
