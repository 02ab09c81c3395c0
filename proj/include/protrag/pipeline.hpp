#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "protrag/annotation_store.hpp"
#include "protrag/blast_runner.hpp"
#include "protrag/evaluation.hpp"
#include "protrag/evidence_pool.hpp"
#include "protrag/filter_model.hpp"
#include "protrag/homology.hpp"
#include "protrag/horizontal_filter.hpp"
#include "protrag/llm_gateway.hpp"
#include "protrag/qa_record.hpp"
#include "protrag/vertical_filter.hpp"

namespace protrag {

inline constexpr std::string_view kCodeVersion = "0.1.0";

enum class AblationMode { RawOnly, HorizontalOnly, VerticalOnly, Full2D };

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view s);
bool runs_horizontal(AblationMode mode);
bool runs_vertical(AblationMode mode);

struct PipelinePaths {
    std::filesystem::path index;
    std::filesystem::path filter_model;
    std::filesystem::path cache;
    /// Precomputed BLAST tabular hits; when set, BLAST is not run.
    std::filesystem::path hits;
};

struct PipelineConfig {
    AblationMode mode = AblationMode::Full2D;
    std::uint64_t seed = 42;
    std::uint32_t parallelism = 4;
    PipelinePaths paths;
    RetrievalConfig retrieval;
    bool go_resolution = true;
    IgConfig ig;
    DenoiseConfig denoise;
    TrainConfig student;
    DistillationConfig distillation;
    GenerationParams generation;
    BackendConfig scorer;
    BackendConfig embedder;
    BackendConfig generator;
    BlastCommand blast;

    PipelineConfig();

    /// Range checks of every section. Mode-required paths are checked when
    /// services are opened.
    void validate() const;

    /// Key-value tree with every setting (api keys excluded).
    nlohmann::ordered_json to_tree() const;

    /// SHA-256 of the settings that influence a record's artifact.
    std::string digest() const;
};

/// Overlays `overrides` on the defaults. Unknown keys and wrong types throw ConfigError.
PipelineConfig config_from_tree(const nlohmann::json& overrides);
PipelineConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

/// PROTRAG_<ROLE>_ENDPOINT, PROTRAG_<ROLE>_MODEL (ROLE = SCORER, EMBEDDER,
/// GENERATOR) and PROTRAG_API_KEY.
void apply_env_overrides(PipelineConfig& cfg, const EnvLookup& env);

/// Points every backend at its default mock.
void force_offline(PipelineConfig& cfg);

/// Where a default value comes from: "published" for the values of the reference
/// method, "chosen" for values picked for this implementation.
nlohmann::ordered_json default_parameter_origins();

/// Supplies BLAST hits for one record.
class HitSource {
public:
    virtual ~HitSource() = default;
    virtual std::vector<HomologHit> hits_for(const QARecord& record) = 0;
    virtual std::string describe() const = 0;
};

/// Hits from a precomputed table, keyed by query id (= record id).
class TableHitSource : public HitSource {
public:
    explicit TableHitSource(const std::filesystem::path& path);
    std::vector<HomologHit> hits_for(const QARecord& record) override;
    std::string describe() const override;
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

private:
    std::filesystem::path path_;
    std::map<std::string, std::vector<HomologHit>> by_query_;
    std::vector<std::string> warnings_;
};

/// Runs BLAST per record in a scratch directory.
class BlastHitSource : public HitSource {
public:
    BlastHitSource(BlastCommand cmd, std::filesystem::path scratch);
    std::vector<HomologHit> hits_for(const QARecord& record) override;
    std::string describe() const override;

private:
    BlastCommand cmd_;
    std::filesystem::path scratch_;
};

/// Everything run_query needs. Shared read-only across worker threads.
struct PipelineServices {
    PipelineConfig config;
    std::shared_ptr<const AnnotationIndex> index;
    std::shared_ptr<const FilterModel> filter;
    std::shared_ptr<HitSource> hits;
    std::shared_ptr<TokenScorer> scorer;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<TextGenerator> generator;

    /// Loads the index, filter model and hit source named by the config and
    /// builds backend clients. Throws ConfigError when the mode needs something
    /// that is not configured.
    static PipelineServices open(const PipelineConfig& config);
};

/// RAW pool for a record, also used as the snippet source of distillation.
EvidencePool retrieve(const PipelineServices& services, const QARecord& record,
                      std::vector<HomologHit>* selected_hits = nullptr);

/// Opening sentence of the generation prompt for a task label.
std::string task_lead(std::string_view task);

inline constexpr std::string_view kNoEvidenceNote =
    "No evidence retrieved from homologous proteins; answer from the instruction and sequence alone.";

std::string build_prompt(const QARecord& record, std::string_view context);

nlohmann::ordered_json pool_to_json(const EvidencePool& pool);
EvidencePool pool_from_json(const nlohmann::json& j);
nlohmann::ordered_json hit_to_json(const HomologHit& hit);
HomologHit hit_from_json(const nlohmann::json& j);

struct RunArtifact {
    nlohmann::ordered_json doc;
    /// Wall-clock milliseconds per stage; kept out of `doc` so artifacts stay byte-stable.
    std::map<std::string, double> timings_ms;

    std::string serialize() const;
};

/// Executes the configured stages for one record. Stage failures are recorded
/// in the artifact; only configuration errors propagate.
RunArtifact run_query(const PipelineServices& services, const QARecord& record);

/// Rebuilds the context from the artifact's stored snapshots and cluster labels.
std::string replay_context(const nlohmann::json& artifact);

struct BatchSummary {
    std::size_t records = 0;
    std::size_t computed = 0;
    std::size_t resumed = 0;
    std::size_t skipped = 0;
    std::size_t failed_stages = 0;
    std::vector<std::string> skipped_details;
    std::string config_digest;

    nlohmann::ordered_json to_json() const;
};

/// File name (without directory) of a record's artifact.
std::string artifact_file_name(std::string_view record_id);

/// Processes a line-delimited dataset with bounded parallelism. Records whose
/// artifact exists with the same config digest are not recomputed.
BatchSummary run_batch(const PipelineServices& services, const std::filesystem::path& dataset,
                       const std::filesystem::path& out_dir);

/// Scores every artifact in `artifact_dir` against its reference answer.
/// Throws Error when the directory holds no artifacts.
eval::MetricReport run_eval(const std::filesystem::path& artifact_dir, const eval::EntityLexicon& lexicon);

}  // namespace protrag
