#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protrag/evidence_pool.hpp"
#include "protrag/llm_gateway.hpp"

namespace protrag {

enum class DistanceMetric { Euclidean, Cosine };

std::string_view to_string(DistanceMetric metric);
DistanceMetric parse_distance_metric(std::string_view s);

struct DenoiseConfig {
    double eps = 0.35;
    std::uint32_t min_pts = 2;
    DistanceMetric metric = DistanceMetric::Cosine;
    std::uint32_t anchor_top_m = 1;

    void validate() const;
};

inline constexpr std::size_t kEmbeddingBatchSize = 64;

/// One vector per value, order preserved. Values are sent in batches; a failing
/// batch is reported by its index and value range.
std::vector<EmbeddingVector> embed_values(Embedder& provider, std::span<const std::string> values,
                                          std::size_t batch_size = kEmbeddingBatchSize);

/// Cosine distance is 1 - cos(a, b). A zero vector is at distance 1 from any
/// non-zero vector and 0 from another zero vector.
double distance(const EmbeddingVector& a, const EmbeddingVector& b, DistanceMetric metric);

struct SemanticCluster {
    std::size_t id = 0;
    /// Input indices, ascending.
    std::vector<std::size_t> members;

    friend bool operator==(const SemanticCluster&, const SemanticCluster&) = default;
};

struct ClusterSet {
    std::vector<SemanticCluster> clusters;
    std::vector<std::size_t> noise;

    /// Cluster id per input index, -1 for noise.
    std::vector<long> labels(std::size_t n) const;

    friend bool operator==(const ClusterSet&, const ClusterSet&) = default;
};

/// Density-based clustering. A point is core when at least min_pts points
/// (itself included) lie within eps. Clusters are the eps-connected components of
/// core points; a border point joins the cluster of its core neighbor that comes
/// first in lexicographic vector order. Clusters are numbered by that same order
/// of their first member, so the partition does not depend on input order.
ClusterSet dbscan(std::span<const EmbeddingVector> vectors, const DenoiseConfig& cfg);

struct AnchorSelection {
    /// Indices into pool.flatten(), ascending.
    std::vector<std::size_t> selected;
    /// Homolog ranks that served as anchors.
    std::vector<std::uint32_t> anchor_ranks;
    /// Ids of the clusters whose union was selected.
    std::vector<std::size_t> cluster_ids;
    bool pass_through = false;
    std::vector<std::string> warnings;
};

/// Walks homolog ranks from 1 and takes the first anchor_top_m ranks that have
/// at least one clustered (non-noise) snippet; selects the union of every cluster
/// holding one of their snippets. With no qualifying rank the whole pool passes.
AnchorSelection select_anchor_clusters(const ClusterSet& clusters, const EvidencePool& pool,
                                       std::uint32_t anchor_top_m);

struct AssembledContext {
    EvidencePool pool;
    std::string text;
};

/// "Homolog <rank> (<accession>): [TAG]: value" per line, in (rank, position) order.
std::string render_context(const EvidencePool& pool);

/// VERTICAL pool restricted to the selection, plus its rendering.
AssembledContext assemble_context(const EvidencePool& pool, const AnchorSelection& selection);

struct DenoiseResult {
    ClusterSet clusters;
    AnchorSelection selection;
    AssembledContext context;
};

/// Embeds snippet values of a RAW or HORIZONTAL pool, clusters them and keeps
/// the anchored clusters.
DenoiseResult denoise(const EvidencePool& pool, Embedder& embedder, const DenoiseConfig& cfg);

}  // namespace protrag
