#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protrag/attribute_tag.hpp"

namespace protrag {

/// One (tag, value) evidence unit taken from a homolog's annotation.
struct AnnotationSnippet {
    AttributeTag tag;
    std::string value;
    std::string source_accession;
    /// 1-based rank of the source homolog; 0 until the snippet enters a pool.
    std::uint32_t homolog_rank = 0;

    friend bool operator==(const AnnotationSnippet&, const AnnotationSnippet&) = default;
};

struct ProteinEntry {
    std::string accession;
    std::vector<std::string> secondary_accessions;
    std::string entry_name;
    std::uint32_t sequence_length = 0;
    std::vector<AnnotationSnippet> snippets;
    std::vector<std::string> go_ids;

    friend bool operator==(const ProteinEntry&, const ProteinEntry&) = default;
};

enum class GoNamespace { MolecularFunction, BiologicalProcess, CellularComponent };

std::string_view to_string(GoNamespace ns);
std::optional<GoNamespace> parse_go_namespace(std::string_view s);

struct GoTerm {
    std::string id;
    std::string name;
    GoNamespace ns = GoNamespace::MolecularFunction;

    friend bool operator==(const GoTerm&, const GoTerm&) = default;
};

bool is_valid_accession(std::string_view accession);
bool is_valid_go_id(std::string_view go_id);

/// Parses one Swiss-Prot text record (ID line through the terminating "//").
/// `first_line` is the file line number of the record's first line and is
/// only used to make ParseError line numbers file-relative.
ProteinEntry parse_entry(std::string_view record_text, std::size_t first_line = 1);

/// Reads `[Term]` stanzas (id/name/namespace, plus alt_id aliases) from an OBO file.
std::vector<GoTerm> parse_obo(std::istream& in);

/// Tab-separated human-readable dump used by `index lookup`.
std::string dump_entry(const ProteinEntry& entry);

/// Accession -> byte range of its record in the source flat file, plus GO terms.
/// Immutable after build/load; concurrent lookups are safe.
class AnnotationIndex {
public:
    struct Location {
        std::uint64_t offset = 0;
        std::uint64_t length = 0;
        bool primary = true;

        friend bool operator==(const Location&, const Location&) = default;
    };

    static constexpr int kFormatVersion = 1;

    /// `go_path` may be empty to build without a GO supplement.
    static AnnotationIndex build(const std::filesystem::path& dat_path,
                                 const std::filesystem::path& go_path);

    void save(const std::filesystem::path& dir) const;
    static AnnotationIndex load(const std::filesystem::path& dir);

    /// Throws NotFoundError for unknown accessions.
    ProteinEntry lookup(std::string_view accession) const;
    bool contains(std::string_view accession) const;

    /// Snippet for one GO id (empty when the id is unknown). Throws
    /// std::invalid_argument for syntactically invalid ids.
    std::vector<AnnotationSnippet> resolve_go(std::string_view go_id) const;

    std::size_t record_count() const noexcept { return record_count_; }
    std::size_t go_term_count() const noexcept;
    /// GO terms ordered by id, alt_id copies included.
    std::vector<GoTerm> go_terms() const;
    const std::filesystem::path& dat_path() const noexcept { return dat_path_; }
    const std::map<std::string, Location, std::less<>>& locations() const noexcept { return locations_; }

private:
    std::filesystem::path dat_path_;
    std::map<std::string, Location, std::less<>> locations_;
    std::map<std::string, GoTerm, std::less<>> go_terms_;
    std::size_t record_count_ = 0;
};

}  // namespace protrag
