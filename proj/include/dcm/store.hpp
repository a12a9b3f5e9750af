#pragma once

#include "dcm/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dcm {

inline constexpr int kStoreFormatVersion = 1;

struct Provenance {
    std::string chat_model;
    std::string embed_model;
    std::uint64_t seed = 0;

    bool operator==(const Provenance&) const = default;
};

struct StoreManifest {
    int format_version = kStoreFormatVersion;
    std::size_t dim = 0;
    std::vector<std::pair<std::string, std::string>> config;
    std::size_t node_count = 0;
    std::size_t modeling_cluster_count = 0;
    std::size_t coding_cluster_count = 0;
    std::size_t edge_count = 0;
    Provenance provenance;
};

// Nodes, both cluster spaces and the bipartite graph. Mutated only by the
// memory builder (single writer); loaded snapshots are used as const.
class MemoryStore {
public:
    explicit MemoryStore(std::size_t dim = 0, int update_threshold = 5);

    std::size_t dim() const { return dim_; }
    int update_threshold() const { return update_threshold_; }

    const std::vector<ExperienceNode>& nodes() const { return nodes_; }
    const ExperienceNode& node(NodeId id) const { return nodes_.at(to_index(id)); }
    const std::vector<Cluster>& clusters(Space space) const;
    const Cluster& cluster(Space space, ClusterId id) const { return clusters(space).at(to_index(id)); }
    const BipartiteGraph& graph() const { return graph_; }

    Provenance provenance;
    std::vector<std::pair<std::string, std::string>> config_snapshot;

    // Builder interface.
    NodeId add_node(ExperienceNode node);
    ClusterId create_cluster(Space space, NodeId first_member);
    void join_cluster(Space space, ClusterId id, NodeId member);
    Cluster& mutable_cluster(Space space, ClusterId id);
    ExperienceNode& mutable_node(NodeId id) { return nodes_.at(to_index(id)); }
    BipartiteGraph& mutable_graph() { return graph_; }

    // Throws CorruptStore naming the first violated invariant.
    void check_invariants() const;

    // Normalized mean of the members' embeddings in `space`, in member order.
    Embedding recompute_centroid(Space space, ClusterId id) const;

    StoreManifest manifest() const;

    bool operator==(const MemoryStore& other) const;

private:
    const Embedding& member_embedding(Space space, NodeId id) const;
    void refresh_centroid(Space space, ClusterId id);

    std::size_t dim_;
    int update_threshold_;
    std::vector<ExperienceNode> nodes_;
    std::vector<Cluster> modeling_;
    std::vector<Cluster> coding_;
    BipartiteGraph graph_;
};

// Writes manifest.json, nodes.jsonl, clusters.jsonl and graph.jsonl, each via
// a temporary file and rename. Byte-identical for an unchanged store.
StoreManifest save_store(const MemoryStore& store, const std::filesystem::path& dir);

// Throws StoreError for missing files, FormatVersionError for another
// format_version, CorruptStore for invariant violations.
MemoryStore load_store(const std::filesystem::path& dir);

// Keeps ceil(ratio * nodes) nodes chosen uniformly with `seed`; empty clusters
// are dropped, survivors keep their knowledge, centroids and edges are rebuilt.
MemoryStore subsample(const MemoryStore& store, double ratio, std::uint64_t seed);

} // namespace dcm
