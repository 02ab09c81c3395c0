#include "fixtures.hpp"

#include <fstream>
#include <sstream>

#include <unistd.h>

#include "protrag/horizontal_filter.hpp"

namespace fixtures {

std::filesystem::path data(const std::string& name) { return std::filesystem::path(PROTRAG_TEST_DATA) / name; }

TempDir::TempDir(const std::string& stem) {
    static std::uint64_t counter = 0;
    protrag::Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ ++counter ^ static_cast<std::uint64_t>(::getpid()));
    for (;;) {
        path_ = std::filesystem::temp_directory_path() / (stem + "-" + std::to_string(rng.next() % 1000000000ULL));
        if (std::filesystem::create_directory(path_)) break;
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::vector<TypeRule>& type_rules() {
    static const std::vector<TypeRule> rules{
        {"catalytic", "catalytic", "CATALYTIC ACTIVITY"}, {"function", "function", "FUNCTION"},
        {"location", "location", "SUBCELLULAR LOCATION"},   {"pathway", "pathway", "PATHWAY"},
        {"subunit", "subunit", "SUBUNIT"},                   {"domain", "domain", "DOMAIN_MOTIF"},
        {"modification", "modification", "PTM"},             {"family", "family", "SIMILARITY"},
    };
    return rules;
}

const std::vector<std::string>& all_tags() {
    static const std::vector<std::string> tags{"CATALYTIC ACTIVITY",    "FUNCTION", "SUBCELLULAR LOCATION",
                                               "PATHWAY",               "SUBUNIT",  "DOMAIN_MOTIF",
                                               "PTM",                   "SIMILARITY", "GO:MOLECULAR_FUNCTION",
                                               "GO:BIOLOGICAL_PROCESS", "GO:CELLULAR_COMPONENT"};
    return tags;
}

namespace {

const std::vector<std::string> kFiller{"please", "describe", "the",     "protein", "sequence", "given",  "below",
                                       "what",   "is",       "its",     "report",  "analyze",  "provided", "enzyme",
                                       "this",   "examine",  "explain", "about",   "for",      "summarize"};

}  // namespace

std::vector<protrag::DistillationExample> synthetic_examples(std::size_t per_type, protrag::Rng& rng) {
    std::vector<protrag::DistillationExample> out;
    for (const auto& rule : type_rules()) {
        for (std::size_t i = 0; i < per_type; ++i) {
            std::string instruction;
            const auto words = 3 + rng.below(6);
            const auto keyword_at = rng.below(words);
            for (std::size_t w = 0; w < words; ++w) {
                if (!instruction.empty()) instruction += ' ';
                instruction += w == keyword_at ? rule.keyword : kFiller[rng.below(kFiller.size())];
            }
            const bool relevant = i % 2 == 0;
            std::string tag = rule.tag;
            if (!relevant) {
                do {
                    tag = all_tags()[rng.below(all_tags().size())];
                } while (tag == rule.tag);
            }
            out.push_back(protrag::DistillationExample{instruction, protrag::AttributeTag(tag), relevant ? 1 : 0,
                                                       relevant ? 0.1 : -0.05});
        }
    }
    return out;
}

protrag::DistillationSplit synthetic_split(std::size_t per_type, std::uint64_t seed) {
    protrag::Rng rng(seed);
    const auto all = synthetic_examples(per_type, rng);
    protrag::DistillationSplit split;
    const auto n_train = protrag::train_share(per_type, 4, 1);
    for (std::size_t t = 0; t < type_rules().size(); ++t) {
        std::vector<std::size_t> idx(per_type);
        for (std::size_t i = 0; i < per_type; ++i) idx[i] = t * per_type + i;
        rng.shuffle(idx);
        for (std::size_t k = 0; k < per_type; ++k) (k < n_train ? split.train : split.test).push_back(all[idx[k]]);
    }
    return split;
}

protrag::FilterModel trained_student(std::uint64_t seed) {
    const auto split = synthetic_split(100, seed);
    protrag::TrainConfig cfg;
    cfg.seed = seed;
    return protrag::train_filter(split.train, cfg);
}

}  // namespace fixtures
