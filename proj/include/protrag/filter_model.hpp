#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protrag/attribute_tag.hpp"
#include "protrag/evidence_pool.hpp"
#include "protrag/horizontal_filter.hpp"

namespace protrag {

struct SparseFeature {
    std::uint32_t index = 0;
    double value = 0.0;
    friend bool operator==(const SparseFeature&, const SparseFeature&) = default;
};

struct TrainConfig {
    std::uint32_t epochs = 4;
    /// Base step size of the AdaGrad-scaled mini-batch updates for the hashed linear model.
    double learning_rate = 2.0;
    std::uint32_t batch_size = 64;
    std::uint64_t seed = 42;
    /// Step size of the transformer-encoder recipe this classifier stands in for.
    /// Recorded in metadata only; it is far too small for the linear model.
    double encoder_learning_rate = 1e-5;

    void validate() const;
};

struct TrainingMetadata {
    std::uint32_t epochs = 0;
    double learning_rate = 0.0;
    std::uint32_t batch_size = 0;
    std::uint64_t seed = 0;
    std::size_t examples = 0;
    double final_loss = 0.0;

    friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

/// Content-agnostic relevance scorer over (instruction, tag).
///
/// Features are hashed (FNV-1a, 2^feature_bits buckets) from instruction words,
/// the tag, the tag's words, and instruction-word x tag crosses, then L2-normalized.
/// The score is the logistic sigmoid of a linear function of those features.
class FilterModel {
public:
    static constexpr int kFormatVersion = 1;

    explicit FilterModel(std::uint32_t feature_bits = 18);

    double score(std::string_view instruction, const AttributeTag& tag) const;
    double logit(std::span<const SparseFeature> features) const;
    std::vector<SparseFeature> features(std::string_view instruction, const AttributeTag& tag) const;

    void save(std::ostream& out) const;
    static FilterModel load(std::istream& in);

    std::uint32_t feature_bits() const noexcept { return feature_bits_; }
    double bias() const noexcept { return bias_; }
    const TrainingMetadata& metadata() const noexcept { return metadata_; }

    friend struct FilterTrainer;

private:
    std::uint32_t feature_bits_;
    std::vector<double> weights_;
    double bias_ = 0.0;
    TrainingMetadata metadata_;
};

struct TrainReport {
    /// Mean training BCE before the first epoch and after each epoch.
    std::vector<double> epoch_losses;
};

/// Mini-batch gradient descent (AdaGrad step scaling) on mean binary cross-entropy from zero weights.
/// Throws std::invalid_argument on an empty or single-class example set.
FilterModel train_filter(std::span<const DistillationExample> examples, const TrainConfig& cfg,
                         TrainReport* report = nullptr, std::uint32_t feature_bits = 18);

double mean_bce(const FilterModel& model, std::span<const DistillationExample> examples);
double accuracy(const FilterModel& model, std::span<const DistillationExample> examples);

/// Keeps snippets whose tag scores strictly above 0.5 for the instruction.
/// Accepts RAW or HORIZONTAL pools and returns a HORIZONTAL pool with every
/// homolog kept in order.
EvidencePool gate(const EvidencePool& pool, const FilterModel& model, std::string_view instruction);

inline constexpr double kGateThreshold = 0.5;

}  // namespace protrag
