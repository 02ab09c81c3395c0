#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "protrag/filter_model.hpp"
#include "protrag/horizontal_filter.hpp"
#include "protrag/rng.hpp"

namespace fixtures {

std::filesystem::path data(const std::string& name);

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem = "protrag-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);

/// Keyword -> relevant tag rule used to synthesize distillation sets.
struct TypeRule {
    std::string type;
    std::string keyword;
    std::string tag;
};
const std::vector<TypeRule>& type_rules();
/// Every tag a snippet may carry in the synthetic sets.
const std::vector<std::string>& all_tags();

/// `per_type` examples for each rule, alternating a relevant and an irrelevant
/// tag, instructions padded with random filler words.
std::vector<protrag::DistillationExample> synthetic_examples(std::size_t per_type, protrag::Rng& rng);

/// 4:1 split per type of synthetic_examples.
protrag::DistillationSplit synthetic_split(std::size_t per_type, std::uint64_t seed);

/// Student trained on the synthetic split with default settings.
protrag::FilterModel trained_student(std::uint64_t seed = 42);

}  // namespace fixtures
