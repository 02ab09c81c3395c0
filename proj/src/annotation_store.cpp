#include "protrag/annotation_store.hpp"

#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "protrag/error.hpp"
#include "protrag/text.hpp"

namespace protrag {

namespace fs = std::filesystem;

namespace {

bool is_upper_alpha(char c) { return c >= 'A' && c <= 'Z'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_upper_alnum(char c) { return is_upper_alpha(c) || is_digit(c); }

std::string_view rstrip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

std::vector<std::string_view> whitespace_tokens(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

bool is_domain_motif_key(std::string_view key) {
    return key == "DOMAIN" || key == "MOTIF" || key == "REGION";
}

// Accumulates one record's state while its lines are scanned.
class EntryBuilder {
public:
    explicit EntryBuilder(std::size_t first_line) : first_line_(first_line) {}

    void feed(std::string_view line, std::size_t lineno) {
        if (terminated_) {
            if (!text::trim(line).empty())
                throw ParseError(lineno, "content after the // record terminator");
            return;
        }
        if (text::trim(line).empty()) return;
        if (text::trim(line) == "//") {
            flush_comment();
            flush_feature();
            terminated_ = true;
            return;
        }
        if (line.size() < 2) throw ParseError(lineno, "line too short for a line code");
        const auto code = line.substr(0, 2);
        const auto data = line.size() > 5 ? line.substr(5) : std::string_view{};
        if (code != "CC") flush_comment();
        if (code != "FT") flush_feature();

        if (code == "ID") {
            parse_id(data, lineno);
        } else if (code == "AC") {
            parse_ac(data, lineno);
        } else if (code == "CC") {
            parse_cc(data, lineno);
        } else if (code == "DR") {
            parse_dr(data, lineno);
        } else if (code == "FT") {
            parse_ft(data, lineno);
        }
    }

    ProteinEntry finish(std::size_t last_line) {
        if (!terminated_) throw ParseError(last_line, "record is missing its terminating // line");
        if (!have_id_) throw ParseError(first_line_, "record has no ID line");
        if (entry_.accession.empty()) throw ParseError(first_line_, "record has no AC line");
        for (auto& s : entry_.snippets) s.source_accession = entry_.accession;
        return std::move(entry_);
    }

private:
    struct OpenComment {
        std::string topic;
        std::vector<std::string> pieces;
        std::size_t line;
    };

    struct OpenFeature {
        std::string key;
        std::string location;
        std::vector<std::string> note;
        bool note_open = false;
        bool in_note = false;
        std::size_t line;
    };

    void parse_id(std::string_view data, std::size_t lineno) {
        if (have_id_) throw ParseError(lineno, "duplicate ID line");
        const auto toks = whitespace_tokens(data);
        if (toks.empty()) throw ParseError(lineno, "empty ID line");
        entry_.entry_name = std::string(toks[0]);
        bool found = false;
        for (std::size_t i = 1; i < toks.size(); ++i) {
            if (toks[i] == "AA." || toks[i] == "AA") {
                const auto num = toks[i - 1];
                std::uint32_t len = 0;
                for (char c : num) {
                    if (!is_digit(c)) throw ParseError(lineno, "non-numeric sequence length in ID line");
                    len = len * 10 + static_cast<std::uint32_t>(c - '0');
                }
                entry_.sequence_length = len;
                found = true;
                break;
            }
        }
        if (!found) throw ParseError(lineno, "ID line lacks a sequence length");
        have_id_ = true;
    }

    void parse_ac(std::string_view data, std::size_t lineno) {
        for (const auto& part : text::split(data, ';')) {
            const auto acc = text::trim(part);
            if (acc.empty()) continue;
            if (!is_valid_accession(acc))
                throw ParseError(lineno, "invalid accession '" + std::string(acc) + "'");
            if (entry_.accession.empty()) {
                entry_.accession = std::string(acc);
            } else {
                entry_.secondary_accessions.emplace_back(acc);
            }
        }
    }

    void parse_cc(std::string_view data, std::size_t lineno) {
        if (data.starts_with("-!- ")) {
            flush_comment();
            const auto rest = data.substr(4);
            const auto colon = rest.find(':');
            if (colon == std::string_view::npos)
                throw ParseError(lineno, "comment block has no topic separator ':'");
            OpenComment block{AttributeTag::normalize(rest.substr(0, colon)), {}, lineno};
            if (block.topic.empty()) throw ParseError(lineno, "comment block has an empty topic");
            const auto first = text::trim(rest.substr(colon + 1));
            if (!first.empty()) block.pieces.emplace_back(first);
            comment_ = std::move(block);
        } else if (comment_ && data.starts_with("    ")) {
            const auto piece = text::trim(data);
            if (!piece.empty()) comment_->pieces.emplace_back(piece);
        } else {
            // Copyright banner and other free CC text outside a -!- block.
            flush_comment();
        }
    }

    void flush_comment() {
        if (!comment_) return;
        auto value = text::join(comment_->pieces, " ");
        if (value.empty()) throw ParseError(comment_->line, "comment block '" + comment_->topic + "' has no text");
        entry_.snippets.push_back(AnnotationSnippet{AttributeTag(comment_->topic), std::move(value), {}, 0});
        comment_.reset();
    }

    void parse_dr(std::string_view data, std::size_t lineno) {
        if (!data.starts_with("GO;")) return;
        const auto parts = text::split(data, ';');
        if (parts.size() < 2) throw ParseError(lineno, "GO cross-reference without an id");
        const auto id = text::trim(parts[1]);
        if (!is_valid_go_id(id)) throw ParseError(lineno, "invalid GO id '" + std::string(id) + "'");
        entry_.go_ids.emplace_back(id);
    }

    void parse_ft(std::string_view data, std::size_t lineno) {
        if (!data.empty() && data.front() != ' ') {
            flush_feature();
            const auto toks = whitespace_tokens(data);
            OpenFeature f;
            f.key = std::string(toks[0]);
            f.location = text::collapse_whitespace(data.substr(toks[0].size()));
            f.line = lineno;
            feature_ = std::move(f);
            return;
        }
        if (!feature_) throw ParseError(lineno, "feature qualifier outside a feature");
        const auto content = text::trim(data);
        if (content.starts_with('/')) {
            feature_->in_note = false;
            const auto eq = content.find('=');
            const auto name = content.substr(1, eq == std::string_view::npos ? std::string_view::npos : eq - 1);
            if (name == "note" && eq != std::string_view::npos) {
                const auto value = content.substr(eq + 1);
                feature_->note.clear();
                feature_->note.emplace_back(value);
                feature_->in_note = true;
                feature_->note_open = value.starts_with('"') && !(value.size() >= 2 && value.ends_with('"'));
            }
        } else if (feature_->in_note && feature_->note_open) {
            feature_->note.emplace_back(content);
            if (content.ends_with('"')) feature_->note_open = false;
        }
    }

    void flush_feature() {
        if (!feature_) return;
        if (is_domain_motif_key(feature_->key)) {
            std::string value = feature_->key;
            if (!feature_->location.empty()) value += " " + feature_->location;
            auto note = text::join(feature_->note, " ");
            if (note.size() >= 2 && note.front() == '"' && note.back() == '"') note = note.substr(1, note.size() - 2);
            else if (!note.empty() && note.front() == '"') note = note.substr(1);
            note = text::collapse_whitespace(note);
            if (!note.empty()) value += ": " + note;
            entry_.snippets.push_back(
                AnnotationSnippet{AttributeTag(tags::kDomainMotif), std::move(value), {}, 0});
        }
        feature_.reset();
    }

    std::size_t first_line_;
    ProteinEntry entry_;
    bool have_id_ = false;
    bool terminated_ = false;
    std::optional<OpenComment> comment_;
    std::optional<OpenFeature> feature_;
};

std::string read_range(const fs::path& path, std::uint64_t offset, std::uint64_t length) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open annotation file " + path.string());
    in.seekg(static_cast<std::streamoff>(offset));
    std::string buf(length, '\0');
    in.read(buf.data(), static_cast<std::streamsize>(length));
    if (static_cast<std::uint64_t>(in.gcount()) != length)
        throw Error("annotation file " + path.string() + " is shorter than its index expects");
    return buf;
}

}  // namespace

std::string_view to_string(GoNamespace ns) {
    switch (ns) {
        case GoNamespace::MolecularFunction: return "molecular_function";
        case GoNamespace::BiologicalProcess: return "biological_process";
        case GoNamespace::CellularComponent: return "cellular_component";
    }
    return "molecular_function";
}

std::optional<GoNamespace> parse_go_namespace(std::string_view s) {
    if (s == "molecular_function") return GoNamespace::MolecularFunction;
    if (s == "biological_process") return GoNamespace::BiologicalProcess;
    if (s == "cellular_component") return GoNamespace::CellularComponent;
    return std::nullopt;
}

// UniProt accession syntax:
//   [OPQ][0-9][A-Z0-9]{3}[0-9]  |  [A-NR-Z][0-9]([A-Z][A-Z0-9]{2}[0-9]){1,2}
bool is_valid_accession(std::string_view a) {
    if (a.size() == 6 && (a[0] == 'O' || a[0] == 'P' || a[0] == 'Q')) {
        return is_digit(a[1]) && is_upper_alnum(a[2]) && is_upper_alnum(a[3]) && is_upper_alnum(a[4]) &&
               is_digit(a[5]);
    }
    if ((a.size() != 6 && a.size() != 10) || !is_upper_alpha(a[0]) || a[0] == 'O' || a[0] == 'P' ||
        a[0] == 'Q' || !is_digit(a[1])) {
        return false;
    }
    for (std::size_t blk = 2; blk < a.size(); blk += 4) {
        if (!is_upper_alpha(a[blk]) || !is_upper_alnum(a[blk + 1]) || !is_upper_alnum(a[blk + 2]) ||
            !is_digit(a[blk + 3])) {
            return false;
        }
    }
    return true;
}

bool is_valid_go_id(std::string_view id) {
    if (id.size() != 10 || !id.starts_with("GO:")) return false;
    for (char c : id.substr(3))
        if (!is_digit(c)) return false;
    return true;
}

ProteinEntry parse_entry(std::string_view record_text, std::size_t first_line) {
    EntryBuilder builder(first_line);
    std::size_t lineno = first_line;
    std::size_t last = first_line;
    std::size_t start = 0;
    while (start < record_text.size()) {
        auto end = record_text.find('\n', start);
        if (end == std::string_view::npos) end = record_text.size();
        builder.feed(rstrip_cr(record_text.substr(start, end - start)), lineno);
        last = lineno;
        ++lineno;
        start = end + 1;
    }
    return builder.finish(last);
}

std::vector<GoTerm> parse_obo(std::istream& in) {
    std::vector<GoTerm> terms;
    struct Stanza {
        std::string id, name, ns;
        std::vector<std::string> alt_ids;
        std::size_t line = 0;
    };
    std::optional<Stanza> cur;
    auto flush = [&] {
        if (!cur) return;
        if (!is_valid_go_id(cur->id)) throw ParseError(cur->line, "[Term] with invalid or missing id '" + cur->id + "'");
        if (cur->name.empty()) throw ParseError(cur->line, "[Term] " + cur->id + " has no name");
        const auto ns = parse_go_namespace(cur->ns);
        if (!ns) throw ParseError(cur->line, "[Term] " + cur->id + " has unknown namespace '" + cur->ns + "'");
        terms.push_back(GoTerm{cur->id, cur->name, *ns});
        for (const auto& alt : cur->alt_ids) {
            if (is_valid_go_id(alt)) terms.push_back(GoTerm{alt, cur->name, *ns});
        }
        cur.reset();
    };

    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = text::trim(raw);
        if (line.starts_with('[')) {
            flush();
            if (line == "[Term]") cur = Stanza{{}, {}, {}, {}, lineno};
            continue;
        }
        if (!cur || line.empty() || line.starts_with('!')) continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const auto key = line.substr(0, colon);
        auto value = text::trim(line.substr(colon + 1));
        if (const auto bang = value.find(" !"); bang != std::string_view::npos && key != "name")
            value = text::trim(value.substr(0, bang));
        if (key == "id") cur->id = std::string(value);
        else if (key == "name") cur->name = std::string(value);
        else if (key == "namespace") cur->ns = std::string(value);
        else if (key == "alt_id") cur->alt_ids.emplace_back(value);
    }
    flush();
    return terms;
}

std::string dump_entry(const ProteinEntry& e) {
    std::ostringstream os;
    os << "accession\t" << e.accession << '\n';
    for (const auto& s : e.secondary_accessions) os << "secondary\t" << s << '\n';
    os << "entry_name\t" << e.entry_name << '\n';
    os << "length\t" << e.sequence_length << '\n';
    for (const auto& g : e.go_ids) os << "go\t" << g << '\n';
    for (const auto& s : e.snippets) os << "snippet\t" << s.tag.name() << '\t' << s.value << '\n';
    return os.str();
}

AnnotationIndex AnnotationIndex::build(const fs::path& dat_path, const fs::path& go_path) {
    AnnotationIndex index;
    index.dat_path_ = fs::absolute(dat_path);
    std::ifstream in(dat_path, std::ios::binary);
    if (!in) throw Error("cannot open annotation file " + dat_path.string());

    std::string line;
    std::string record;
    std::uint64_t offset = 0;
    std::uint64_t record_start = 0;
    std::size_t record_first_line = 0;
    std::size_t lineno = 0;
    bool in_record = false;

    while (std::getline(in, line)) {
        ++lineno;
        const std::uint64_t consumed = line.size() + (in.eof() ? 0 : 1);
        if (!in_record) {
            if (text::trim(line).empty()) {
                offset += consumed;
                continue;
            }
            in_record = true;
            record_start = offset;
            record_first_line = lineno;
            record.clear();
        }
        record += line;
        record += '\n';
        offset += consumed;
        if (text::trim(line) != "//") continue;

        const auto entry = parse_entry(record, record_first_line);
        const Location loc{record_start, offset - record_start, true};
        auto [it, inserted] = index.locations_.try_emplace(entry.accession, loc);
        if (!inserted) {
            if (it->second.primary) {
                throw Error("duplicate primary accession " + entry.accession + " at byte offsets " +
                            std::to_string(it->second.offset) + " and " + std::to_string(record_start));
            }
            it->second = loc;
        }
        for (const auto& sec : entry.secondary_accessions) {
            index.locations_.try_emplace(sec, Location{record_start, offset - record_start, false});
        }
        ++index.record_count_;
        in_record = false;
    }
    if (in_record) {
        throw Error("truncated final record starting at line " + std::to_string(record_first_line) +
                    " (byte offset " + std::to_string(record_start) + "): missing // terminator");
    }

    if (!go_path.empty()) {
        std::ifstream go(go_path);
        if (!go) throw Error("cannot open GO file " + go_path.string());
        for (auto& term : parse_obo(go)) {
            auto id = term.id;
            index.go_terms_.try_emplace(std::move(id), std::move(term));
        }
    }
    return index;
}

void AnnotationIndex::save(const fs::path& dir) const {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "accessions.tsv", std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write index into " + dir.string());
        out << "#protrag-annotation-index\t" << kFormatVersion << '\n';
        out << "#dat\t" << dat_path_.string() << '\n';
        out << "#records\t" << record_count_ << '\n';
        for (const auto& [acc, loc] : locations_) {
            out << acc << '\t' << loc.offset << '\t' << loc.length << '\t' << (loc.primary ? 'P' : 'S') << '\n';
        }
    }
    std::ofstream out(dir / "go_terms.tsv", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write index into " + dir.string());
    out << "#protrag-go-index\t" << kFormatVersion << '\n';
    for (const auto& [id, term] : go_terms_) {
        out << id << '\t' << to_string(term.ns) << '\t' << term.name << '\n';
    }
}

AnnotationIndex AnnotationIndex::load(const fs::path& dir) {
    AnnotationIndex index;
    std::ifstream in(dir / "accessions.tsv", std::ios::binary);
    if (!in) throw Error("no annotation index found in " + dir.string());
    std::string line;
    std::size_t lineno = 0;
    auto header = [&](std::string_view key) {
        ++lineno;
        if (!std::getline(in, line)) throw ParseError(lineno, "index header is truncated");
        const auto parts = text::split(line, '\t');
        if (parts.size() != 2 || parts[0] != key) throw ParseError(lineno, "expected index header " + std::string(key));
        return parts[1];
    };
    if (header("#protrag-annotation-index") != std::to_string(kFormatVersion))
        throw ParseError(1, "unsupported index format version");
    index.dat_path_ = header("#dat");
    index.record_count_ = std::stoull(header("#records"));
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto parts = text::split(line, '\t');
        if (parts.size() != 4 || (parts[3] != "P" && parts[3] != "S"))
            throw ParseError(lineno, "malformed index row");
        index.locations_.emplace(parts[0], Location{std::stoull(parts[1]), std::stoull(parts[2]), parts[3] == "P"});
    }

    std::ifstream go(dir / "go_terms.tsv", std::ios::binary);
    if (!go) return index;
    lineno = 0;
    while (std::getline(go, line)) {
        ++lineno;
        if (line.empty() || line.starts_with('#')) continue;
        const auto parts = text::split(line, '\t');
        const auto ns = parts.size() == 3 ? parse_go_namespace(parts[1]) : std::nullopt;
        if (!ns) throw ParseError(lineno, "malformed GO index row");
        index.go_terms_.emplace(parts[0], GoTerm{parts[0], parts[2], *ns});
    }
    return index;
}

ProteinEntry AnnotationIndex::lookup(std::string_view accession) const {
    const auto it = locations_.find(accession);
    if (it == locations_.end()) throw NotFoundError("accession " + std::string(accession) + " is not in the index");
    return parse_entry(read_range(dat_path_, it->second.offset, it->second.length));
}

bool AnnotationIndex::contains(std::string_view accession) const {
    return locations_.find(accession) != locations_.end();
}

std::vector<AnnotationSnippet> AnnotationIndex::resolve_go(std::string_view go_id) const {
    if (!is_valid_go_id(go_id)) throw std::invalid_argument("invalid GO id '" + std::string(go_id) + "'");
    const auto it = go_terms_.find(go_id);
    if (it == go_terms_.end()) return {};
    const auto tag = "GO:" + text::to_upper(to_string(it->second.ns));
    return {AnnotationSnippet{AttributeTag(tag), it->second.name, {}, 0}};
}

std::size_t AnnotationIndex::go_term_count() const noexcept { return go_terms_.size(); }

std::vector<GoTerm> AnnotationIndex::go_terms() const {
    std::vector<GoTerm> out;
    out.reserve(go_terms_.size());
    for (const auto& [id, t] : go_terms_) out.push_back(t);
    return out;
}

}  // namespace protrag
