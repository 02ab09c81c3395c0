#include "protrag/vertical_filter.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <stdexcept>

#include "protrag/error.hpp"

namespace protrag {

std::string_view to_string(DistanceMetric metric) {
    return metric == DistanceMetric::Cosine ? "cosine" : "euclidean";
}

DistanceMetric parse_distance_metric(std::string_view s) {
    if (s == "cosine") return DistanceMetric::Cosine;
    if (s == "euclidean") return DistanceMetric::Euclidean;
    throw ConfigError("unknown distance metric '" + std::string(s) + "' (expected cosine or euclidean)");
}

void DenoiseConfig::validate() const {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("denoise.eps must be a positive number");
    if (min_pts < 1) throw ConfigError("denoise.min_pts must be >= 1");
    if (anchor_top_m < 1) throw ConfigError("denoise.anchor_top_m must be >= 1");
}

std::vector<EmbeddingVector> embed_values(Embedder& provider, std::span<const std::string> values,
                                          std::size_t batch_size) {
    if (batch_size == 0) throw std::invalid_argument("embed_values: batch_size must be > 0");
    std::vector<EmbeddingVector> out;
    out.reserve(values.size());
    std::size_t batch = 0;
    for (std::size_t start = 0; start < values.size(); start += batch_size, ++batch) {
        const std::size_t end = std::min(values.size(), start + batch_size);
        const auto describe = [&] {
            return "embedding batch " + std::to_string(batch) + " (values " + std::to_string(start) + ".." +
                   std::to_string(end - 1) + ")";
        };
        std::vector<EmbeddingVector> got;
        try {
            got = provider.embed(values.subspan(start, end - start));
        } catch (const std::exception& e) {
            throw Error(describe() + " failed: " + e.what());
        }
        if (got.size() != end - start)
            throw Error(describe() + " returned " + std::to_string(got.size()) + " vectors for " +
                        std::to_string(end - start) + " texts");
        for (auto& v : got) {
            if (v.empty()) throw Error(describe() + " returned an empty vector");
            if (!out.empty() && v.size() != out.front().size())
                throw Error(describe() + " returned vectors of mixed dimension");
            if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }))
                throw Error(describe() + " returned a non-finite value");
            out.push_back(std::move(v));
        }
    }
    return out;
}

double distance(const EmbeddingVector& a, const EmbeddingVector& b, DistanceMetric metric) {
    if (a.size() != b.size()) throw std::invalid_argument("distance: dimension mismatch");
    if (metric == DistanceMetric::Euclidean) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    const double c = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return 1.0 - c;
}

std::vector<long> ClusterSet::labels(std::size_t n) const {
    std::vector<long> out(n, -1);
    for (const auto& c : clusters)
        for (auto m : c.members) out.at(m) = static_cast<long>(c.id);
    return out;
}

ClusterSet dbscan(std::span<const EmbeddingVector> vectors, const DenoiseConfig& cfg) {
    cfg.validate();
    const std::size_t n = vectors.size();
    ClusterSet out;
    if (n == 0) return out;
    for (const auto& v : vectors)
        if (v.size() != vectors.front().size()) throw std::invalid_argument("dbscan: dimension mismatch");

    // canon[i] = rank of point i under lexicographic vector order.
    std::vector<std::size_t> by_canon(n);
    std::iota(by_canon.begin(), by_canon.end(), std::size_t{0});
    std::stable_sort(by_canon.begin(), by_canon.end(),
                     [&](std::size_t a, std::size_t b) { return vectors[a] < vectors[b]; });
    std::vector<std::size_t> canon(n);
    for (std::size_t r = 0; r < n; ++r) canon[by_canon[r]] = r;

    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        neighbors[i].push_back(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (distance(vectors[i], vectors[j], cfg.metric) <= cfg.eps) {
                neighbors[i].push_back(j);
                neighbors[j].push_back(i);
            }
        }
    }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= cfg.min_pts;

    // Expand components of core points, seeding in canonical order.
    constexpr long kUnset = -1;
    std::vector<long> label(n, kUnset);
    long next = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t seed = by_canon[r];
        if (!core[seed] || label[seed] != kUnset) continue;
        std::deque<std::size_t> queue{seed};
        label[seed] = next;
        while (!queue.empty()) {
            const auto p = queue.front();
            queue.pop_front();
            for (auto q : neighbors[p]) {
                if (core[q] && label[q] == kUnset) {
                    label[q] = next;
                    queue.push_back(q);
                }
            }
        }
        ++next;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        std::size_t best = n;
        for (auto q : neighbors[i])
            if (core[q] && (best == n || canon[q] < canon[best])) best = q;
        if (best != n) label[i] = label[best];
    }

    // Renumber clusters by their first member in canonical order.
    std::vector<std::size_t> first(static_cast<std::size_t>(next), n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto l = label[by_canon[r]];
        if (l != kUnset && first[static_cast<std::size_t>(l)] == n) first[static_cast<std::size_t>(l)] = r;
    }
    std::vector<std::size_t> order(first.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return first[a] < first[b]; });
    std::vector<std::size_t> renamed(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) renamed[order[k]] = k;

    out.clusters.resize(order.size());
    for (std::size_t c = 0; c < out.clusters.size(); ++c) out.clusters[c].id = c;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] == kUnset)
            out.noise.push_back(i);
        else
            out.clusters[renamed[static_cast<std::size_t>(label[i])]].members.push_back(i);
    }
    return out;
}

AnchorSelection select_anchor_clusters(const ClusterSet& clusters, const EvidencePool& pool,
                                       std::uint32_t anchor_top_m) {
    if (anchor_top_m < 1) throw std::invalid_argument("anchor_top_m must be >= 1");
    const auto flat = pool.flatten();
    const auto labels = clusters.labels(flat.size());

    AnchorSelection sel;
    std::set<std::size_t> chosen;
    for (std::size_t h = 0; h < pool.homologs.size(); ++h) {
        if (sel.anchor_ranks.size() >= anchor_top_m) break;
        const auto rank = static_cast<std::uint32_t>(h + 1);
        std::set<std::size_t> own;
        for (std::size_t i = 0; i < flat.size(); ++i)
            if (flat[i].homolog_rank == rank && labels[i] >= 0) own.insert(static_cast<std::size_t>(labels[i]));
        if (own.empty()) continue;
        sel.anchor_ranks.push_back(rank);
        chosen.insert(own.begin(), own.end());
    }

    if (chosen.empty()) {
        sel.pass_through = true;
        sel.selected.resize(flat.size());
        std::iota(sel.selected.begin(), sel.selected.end(), std::size_t{0});
        if (!flat.empty()) sel.warnings.push_back("no homolog has a clustered snippet; passing the whole pool through");
        return sel;
    }
    if (sel.anchor_ranks.front() != 1)
        sel.warnings.push_back("rank-1 homolog has no clustered snippet; anchored on rank " +
                               std::to_string(sel.anchor_ranks.front()));
    sel.cluster_ids.assign(chosen.begin(), chosen.end());
    for (std::size_t i = 0; i < flat.size(); ++i)
        if (labels[i] >= 0 && chosen.contains(static_cast<std::size_t>(labels[i]))) sel.selected.push_back(i);
    return sel;
}

std::string render_context(const EvidencePool& pool) {
    std::string out;
    for (const auto& h : pool.homologs) {
        for (const auto& s : h.snippets) {
            out += "Homolog " + std::to_string(s.homolog_rank) + " (" + s.source_accession + "): [" + s.tag.name() +
                   "]: " + s.value + "\n";
        }
    }
    return out;
}

AssembledContext assemble_context(const EvidencePool& pool, const AnchorSelection& selection) {
    AssembledContext out;
    out.pool.stage = PoolStage::Vertical;
    out.pool.warnings = pool.warnings;
    out.pool.warnings.insert(out.pool.warnings.end(), selection.warnings.begin(), selection.warnings.end());
    std::set<std::size_t> keep(selection.selected.begin(), selection.selected.end());
    std::size_t flat_index = 0;
    for (const auto& h : pool.homologs) {
        PoolHomolog kept{h.hit, {}};
        for (const auto& s : h.snippets) {
            if (keep.contains(flat_index)) kept.snippets.push_back(s);
            ++flat_index;
        }
        out.pool.homologs.push_back(std::move(kept));
    }
    out.text = render_context(out.pool);
    return out;
}

DenoiseResult denoise(const EvidencePool& pool, Embedder& embedder, const DenoiseConfig& cfg) {
    cfg.validate();
    if (pool.stage == PoolStage::Vertical) throw std::invalid_argument("denoise: pool is already VERTICAL");
    DenoiseResult result;
    const auto flat = pool.flatten();
    std::vector<std::string> values;
    values.reserve(flat.size());
    for (const auto& s : flat) values.push_back(s.value);
    const auto vectors = embed_values(embedder, values);
    result.clusters = dbscan(vectors, cfg);
    result.selection = select_anchor_clusters(result.clusters, pool, cfg.anchor_top_m);
    result.context = assemble_context(pool, result.selection);
    return result;
}

}  // namespace protrag
