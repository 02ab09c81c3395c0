#include "protrag/filter_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "protrag/error.hpp"
#include "protrag/rng.hpp"
#include "protrag/text.hpp"

namespace protrag {

namespace {

constexpr double kAdaGradEpsilon = 1e-8;

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// -log(sigmoid(z)) and -log(1 - sigmoid(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double bce_from_logit(double z, int label) { return label ? softplus(-z) : softplus(z); }

double parse_double(std::string_view s, std::size_t lineno) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(lineno, "bad number '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_uint(std::string_view s, std::size_t lineno) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(lineno, "bad integer '" + std::string(s) + "'");
    return v;
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
}

FilterModel::FilterModel(std::uint32_t feature_bits) : feature_bits_(feature_bits) {
    if (feature_bits < 4 || feature_bits > 26) throw std::invalid_argument("feature_bits must lie in [4, 26]");
    weights_.assign(std::size_t{1} << feature_bits, 0.0);
}

std::vector<SparseFeature> FilterModel::features(std::string_view instruction, const AttributeTag& tag) const {
    auto words = text::words(instruction);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());

    std::vector<std::string> names;
    names.reserve(2 * words.size() + 4);
    names.push_back("t:" + tag.name());
    for (const auto& w : text::words(tag.name())) names.push_back("tw:" + w);
    for (const auto& w : words) {
        names.push_back("i:" + w);
        names.push_back("x:" + w + "|" + tag.name());
    }

    const std::uint64_t mask = (std::uint64_t{1} << feature_bits_) - 1;
    std::map<std::uint32_t, double> acc;
    const double v = 1.0 / std::sqrt(static_cast<double>(names.size()));
    for (const auto& n : names) acc[static_cast<std::uint32_t>(text::fnv1a64(n) & mask)] += v;

    std::vector<SparseFeature> out;
    out.reserve(acc.size());
    for (const auto& [i, x] : acc) out.push_back(SparseFeature{i, x});
    return out;
}

double FilterModel::logit(std::span<const SparseFeature> features) const {
    double z = bias_;
    for (const auto& f : features) z += weights_[f.index] * f.value;
    return z;
}

double FilterModel::score(std::string_view instruction, const AttributeTag& tag) const {
    return sigmoid(logit(features(instruction, tag)));
}

void FilterModel::save(std::ostream& out) const {
    std::size_t nonzero = 0;
    for (double w : weights_) nonzero += w != 0.0;
    out << "protrag-filter-model " << kFormatVersion << '\n';
    out << "feature_bits " << feature_bits_ << '\n';
    out << "seed " << metadata_.seed << '\n';
    out << "epochs " << metadata_.epochs << '\n';
    out << "learning_rate " << text::format_double(metadata_.learning_rate) << '\n';
    out << "batch_size " << metadata_.batch_size << '\n';
    out << "examples " << metadata_.examples << '\n';
    out << "final_loss " << text::format_double(metadata_.final_loss) << '\n';
    out << "bias " << text::format_double(bias_) << '\n';
    out << "weights " << nonzero << '\n';
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (weights_[i] != 0.0) out << i << ' ' << text::format_double(weights_[i]) << '\n';
    }
}

FilterModel FilterModel::load(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto field = [&](std::string_view key) -> std::string {
        ++lineno;
        if (!std::getline(in, line)) throw ParseError(lineno, "model file truncated before '" + std::string(key) + "'");
        const auto sp = line.find(' ');
        if (sp == std::string::npos || std::string_view(line).substr(0, sp) != key)
            throw ParseError(lineno, "expected '" + std::string(key) + "'");
        return line.substr(sp + 1);
    };
    if (parse_uint(field("protrag-filter-model"), lineno) != kFormatVersion)
        throw ParseError(lineno, "unsupported model format version");
    FilterModel m(static_cast<std::uint32_t>(parse_uint(field("feature_bits"), lineno)));
    m.metadata_.seed = parse_uint(field("seed"), lineno);
    m.metadata_.epochs = static_cast<std::uint32_t>(parse_uint(field("epochs"), lineno));
    m.metadata_.learning_rate = parse_double(field("learning_rate"), lineno);
    m.metadata_.batch_size = static_cast<std::uint32_t>(parse_uint(field("batch_size"), lineno));
    m.metadata_.examples = parse_uint(field("examples"), lineno);
    m.metadata_.final_loss = parse_double(field("final_loss"), lineno);
    m.bias_ = parse_double(field("bias"), lineno);
    const auto count = parse_uint(field("weights"), lineno);
    for (std::uint64_t k = 0; k < count; ++k) {
        ++lineno;
        if (!std::getline(in, line)) throw ParseError(lineno, "model file truncated inside weights");
        const auto sp = line.find(' ');
        if (sp == std::string::npos) throw ParseError(lineno, "malformed weight row");
        const auto idx = parse_uint(std::string_view(line).substr(0, sp), lineno);
        if (idx >= m.weights_.size()) throw ParseError(lineno, "weight index out of range");
        m.weights_[idx] = parse_double(std::string_view(line).substr(sp + 1), lineno);
    }
    return m;
}

struct FilterTrainer {
    static FilterModel train(std::span<const DistillationExample> examples, const TrainConfig& cfg, TrainReport* report,
                             std::uint32_t feature_bits) {
        cfg.validate();
        if (examples.empty()) throw std::invalid_argument("train_filter: no examples");
        const auto positives = std::count_if(examples.begin(), examples.end(), [](const auto& e) { return e.label == 1; });
        if (positives == 0 || positives == static_cast<long>(examples.size()))
            throw std::invalid_argument("train_filter: examples contain a single class; BCE training is degenerate");

        FilterModel model(feature_bits);
        std::vector<std::vector<SparseFeature>> feats;
        feats.reserve(examples.size());
        for (const auto& e : examples) feats.push_back(model.features(e.instruction, e.tag));

        auto full_loss = [&] {
            double sum = 0.0;
            for (std::size_t i = 0; i < examples.size(); ++i) sum += bce_from_logit(model.logit(feats[i]), examples[i].label);
            return sum / static_cast<double>(examples.size());
        };

        if (report) report->epoch_losses = {full_loss()};
        Rng rng(cfg.seed);
        std::vector<std::size_t> order(examples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Per-coordinate step scaling (AdaGrad): rare interaction features
        // get usable steps within four passes at batch 64.
        std::vector<double> grad_sq(model.weights_.size(), 0.0);
        double bias_grad_sq = 0.0;
        std::map<std::uint32_t, double> grad;
        for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            rng.shuffle(order);
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                const double n = static_cast<double>(end - start);
                grad.clear();
                double bias_grad = 0.0;
                for (std::size_t p = start; p < end; ++p) {
                    const auto i = order[p];
                    const double residual = sigmoid(model.logit(feats[i])) - examples[i].label;
                    bias_grad += residual;
                    for (const auto& f : feats[i]) grad[f.index] += residual * f.value;
                }
                for (auto [idx, g] : grad) {
                    g /= n;
                    grad_sq[idx] += g * g;
                    model.weights_[idx] -= cfg.learning_rate * g / (std::sqrt(grad_sq[idx]) + kAdaGradEpsilon);
                }
                bias_grad /= n;
                bias_grad_sq += bias_grad * bias_grad;
                model.bias_ -= cfg.learning_rate * bias_grad / (std::sqrt(bias_grad_sq) + kAdaGradEpsilon);
            }
            if (report) report->epoch_losses.push_back(full_loss());
        }

        model.metadata_ = TrainingMetadata{cfg.epochs, cfg.learning_rate, cfg.batch_size, cfg.seed, examples.size(),
                                           full_loss()};
        return model;
    }
};

FilterModel train_filter(std::span<const DistillationExample> examples, const TrainConfig& cfg, TrainReport* report,
                         std::uint32_t feature_bits) {
    return FilterTrainer::train(examples, cfg, report, feature_bits);
}

double mean_bce(const FilterModel& model, std::span<const DistillationExample> examples) {
    if (examples.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& e : examples) sum += bce_from_logit(model.logit(model.features(e.instruction, e.tag)), e.label);
    return sum / static_cast<double>(examples.size());
}

double accuracy(const FilterModel& model, std::span<const DistillationExample> examples) {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& e : examples) {
        const int predicted = model.score(e.instruction, e.tag) > kGateThreshold ? 1 : 0;
        correct += predicted == e.label;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

EvidencePool gate(const EvidencePool& pool, const FilterModel& model, std::string_view instruction) {
    if (pool.stage == PoolStage::Vertical) throw std::invalid_argument("gate: pool has already been vertically filtered");
    EvidencePool out;
    out.stage = PoolStage::Horizontal;
    out.warnings = pool.warnings;
    std::map<std::string, bool> keep;
    for (const auto& h : pool.homologs) {
        PoolHomolog kept{h.hit, {}};
        for (const auto& s : h.snippets) {
            auto it = keep.find(s.tag.name());
            if (it == keep.end()) it = keep.emplace(s.tag.name(), model.score(instruction, s.tag) > kGateThreshold).first;
            if (it->second) kept.snippets.push_back(s);
        }
        out.homologs.push_back(std::move(kept));
    }
    return out;
}

}  // namespace protrag
