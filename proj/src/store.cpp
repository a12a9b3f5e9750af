#include "dcm/store.hpp"

#include "dcm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dcm {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

MemoryStore::MemoryStore(std::size_t dim, int update_threshold) : dim_(dim), update_threshold_(update_threshold) {}

const std::vector<Cluster>& MemoryStore::clusters(Space space) const {
    return space == Space::modeling ? modeling_ : coding_;
}

Cluster& MemoryStore::mutable_cluster(Space space, ClusterId id) {
    auto& list = space == Space::modeling ? modeling_ : coding_;
    return list.at(to_index(id));
}

NodeId MemoryStore::add_node(ExperienceNode node) {
    if (node.e_m.dim() != dim_ || node.e_c.dim() != dim_) {
        throw DimensionMismatch("node embedding dim does not match store dim " + std::to_string(dim_));
    }
    node.id = NodeId{static_cast<std::uint32_t>(nodes_.size())};
    nodes_.push_back(std::move(node));
    return nodes_.back().id;
}

const Embedding& MemoryStore::member_embedding(Space space, NodeId id) const {
    const auto& n = node(id);
    return space == Space::modeling ? n.e_m : n.e_c;
}

ClusterId MemoryStore::create_cluster(Space space, NodeId first_member) {
    auto& list = space == Space::modeling ? modeling_ : coding_;
    Cluster cluster;
    cluster.id = ClusterId{static_cast<std::uint32_t>(list.size())};
    cluster.space = space;
    cluster.members.push_back(first_member);
    cluster.centroid = member_embedding(space, first_member);
    list.push_back(std::move(cluster));
    return list.back().id;
}

void MemoryStore::join_cluster(Space space, ClusterId id, NodeId member) {
    mutable_cluster(space, id).members.push_back(member);
    refresh_centroid(space, id);
}

Embedding MemoryStore::recompute_centroid(Space space, ClusterId id) const {
    const auto& c = cluster(space, id);
    std::vector<double> sum(dim_, 0.0);
    for (auto member : c.members) {
        const auto values = member_embedding(space, member).values();
        for (std::size_t d = 0; d < dim_; ++d) sum[d] += values[d];
    }
    const bool zero = std::all_of(sum.begin(), sum.end(), [](double v) { return v == 0.0; });
    // Opposite members can cancel out; fall back to the founding member.
    if (zero) return member_embedding(space, c.members.front());
    return Embedding::unit(std::move(sum));
}

void MemoryStore::refresh_centroid(Space space, ClusterId id) {
    auto centroid = recompute_centroid(space, id);
    mutable_cluster(space, id).centroid = std::move(centroid);
}

namespace {

[[noreturn]] void corrupt(const std::string& invariant) {
    throw CorruptStore("store invariant violated: " + invariant);
}

void check_items(const Knowledge& k, const std::string& where) {
    for (const auto* tier : {&k.approach, &k.checklist, &k.pitfall}) {
        for (const auto& item : *tier) {
            if (item.empty()) corrupt("knowledge items are non-empty (" + where + ")");
        }
    }
}

bool is_unit(const Embedding& e) {
    double n2 = 0.0;
    for (double v : e.values()) n2 += v * v;
    return std::fabs(n2 - 1.0) <= 1e-9;
}

} // namespace

void MemoryStore::check_invariants() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        const auto name = format_node(n.id);
        if (to_index(n.id) != i) corrupt("node ids are dense and ordered (" + name + ")");
        if (n.e_m.dim() != dim_ || n.e_c.dim() != dim_) corrupt("embedding dim equals store dim (" + name + ")");
        if (!is_unit(n.e_m) || !is_unit(n.e_c)) corrupt("embeddings are unit-normalized (" + name + ")");
        if (to_index(n.modeling_cluster) >= modeling_.size() || to_index(n.coding_cluster) >= coding_.size()) {
            corrupt("node cluster ids exist (" + name + ")");
        }
        if (n.sample_type == SampleType::A && !n.phi.pitfall.empty()) corrupt("Type A nodes carry no pitfalls (" + name + ")");
        if (n.sample_type == SampleType::C && (!n.phi.approach.empty() || !n.phi.checklist.empty())) {
            corrupt("Type C nodes carry no approach or checklist (" + name + ")");
        }
        check_items(n.phi, name);
    }

    for (auto space : {Space::modeling, Space::coding}) {
        const auto& list = clusters(space);
        std::vector<int> seen(nodes_.size(), 0);
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& c = list[i];
            const auto name = format_cluster(space, c.id);
            if (to_index(c.id) != i || c.space != space) corrupt("cluster ids are dense and ordered (" + name + ")");
            if (c.members.empty()) corrupt("clusters have members (" + name + ")");
            if (c.centroid.dim() != dim_) corrupt("centroid dim equals store dim (" + name + ")");
            if (c.knowledge_version < 0) corrupt("knowledge_version >= 0 (" + name + ")");
            check_items(c.knowledge, name);
            for (const auto& k : c.pending_phis) check_items(k, name);
            for (auto m : c.members) {
                if (to_index(m) >= nodes_.size()) corrupt("cluster members exist (" + name + ")");
                const auto& n = nodes_[to_index(m)];
                const auto assigned = space == Space::modeling ? n.modeling_cluster : n.coding_cluster;
                if (assigned != c.id) corrupt("node cluster field agrees with membership (" + name + ")");
                ++seen[to_index(m)];
            }
            const auto expected = recompute_centroid(space, c.id);
            for (std::size_t d = 0; d < dim_; ++d) {
                if (std::fabs(expected.values()[d] - c.centroid.values()[d]) > 1e-9) {
                    corrupt("centroid is the normalized mean of members (" + name + ")");
                }
            }
        }
        for (std::size_t i = 0; i < seen.size(); ++i) {
            if (seen[i] != 1) {
                corrupt("each node belongs to exactly one " + std::string(to_string(space)) + " cluster (" +
                        format_node(NodeId{static_cast<std::uint32_t>(i)}) + ")");
            }
        }
    }

    std::map<BipartiteGraph::Key, std::uint64_t> recount;
    for (const auto& n : nodes_) ++recount[{n.modeling_cluster, n.coding_cluster}];
    if (graph_.total_weight() != nodes_.size()) {
        corrupt("sum of edge weights equals node count (" + std::to_string(graph_.total_weight()) + " != " +
                std::to_string(nodes_.size()) + ")");
    }
    for (const auto& [key, w] : graph_.edges()) {
        if (to_index(key.first) >= modeling_.size() || to_index(key.second) >= coding_.size()) {
            corrupt("edge endpoints exist");
        }
        if (w < 1) corrupt("edge weights are >= 1");
        auto it = recount.find(key);
        if (it == recount.end() || it->second != w) {
            corrupt("edge weight equals co-occurrence count (" + format_cluster(Space::modeling, key.first) + "," +
                    format_cluster(Space::coding, key.second) + ")");
        }
    }
    if (recount.size() != graph_.edge_count()) corrupt("every co-occurring pair has an edge");
}

StoreManifest MemoryStore::manifest() const {
    StoreManifest m;
    m.dim = dim_;
    m.config = config_snapshot;
    m.node_count = nodes_.size();
    m.modeling_cluster_count = modeling_.size();
    m.coding_cluster_count = coding_.size();
    m.edge_count = graph_.edge_count();
    m.provenance = provenance;
    return m;
}

namespace {

bool same_clusters(const std::vector<Cluster>& a, const std::vector<Cluster>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        if (x.id != y.id || x.space != y.space || !(x.centroid == y.centroid) || x.members != y.members ||
            !(x.knowledge == y.knowledge) || x.knowledge_version != y.knowledge_version ||
            x.pending_phis != y.pending_phis) {
            return false;
        }
    }
    return true;
}

bool same_nodes(const std::vector<ExperienceNode>& a, const std::vector<ExperienceNode>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        if (x.id != y.id || x.problem_id != y.problem_id || x.sample_type != y.sample_type ||
            x.modeling_text != y.modeling_text || x.coding_text != y.coding_text || !(x.e_m == y.e_m) ||
            !(x.e_c == y.e_c) || !(x.phi == y.phi) || x.modeling_cluster != y.modeling_cluster ||
            x.coding_cluster != y.coding_cluster) {
            return false;
        }
    }
    return true;
}

} // namespace

bool MemoryStore::operator==(const MemoryStore& other) const {
    return dim_ == other.dim_ && update_threshold_ == other.update_threshold_ && provenance == other.provenance &&
           config_snapshot == other.config_snapshot && same_nodes(nodes_, other.nodes_) &&
           same_clusters(modeling_, other.modeling_) && same_clusters(coding_, other.coding_) &&
           graph_ == other.graph_;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ojson knowledge_json(const Knowledge& k) {
    ojson j;
    j["approach"] = k.approach;
    j["checklist"] = k.checklist;
    j["pitfall"] = k.pitfall;
    return j;
}

Knowledge knowledge_from(const ojson& j) {
    Knowledge k;
    k.approach = j.at("approach").get<std::vector<std::string>>();
    k.checklist = j.at("checklist").get<std::vector<std::string>>();
    k.pitfall = j.at("pitfall").get<std::vector<std::string>>();
    return k;
}

ojson vector_json(const Embedding& e) {
    return ojson(std::vector<double>(e.values().begin(), e.values().end()));
}

void write_atomic(const fs::path& path, const std::string& content) {
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) throw StoreError("cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw StoreError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::vector<ojson> read_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StoreError("missing store file " + path.string());
    std::vector<ojson> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(ojson::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptStore(path.filename().string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

Space space_from(const std::string& s) {
    if (s == "modeling") return Space::modeling;
    if (s == "coding") return Space::coding;
    throw CorruptStore("unknown cluster space '" + s + "'");
}

} // namespace

StoreManifest save_store(const MemoryStore& store, const fs::path& dir) {
    store.check_invariants();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StoreError("cannot create store directory " + dir.string() + ": " + ec.message());

    const auto m = store.manifest();
    ojson manifest;
    manifest["format_version"] = m.format_version;
    manifest["dim"] = m.dim;
    manifest["update_threshold"] = store.update_threshold();
    manifest["counts"] = {{"nodes", m.node_count},
                          {"modeling_clusters", m.modeling_cluster_count},
                          {"coding_clusters", m.coding_cluster_count},
                          {"edges", m.edge_count}};
    manifest["provenance"] = {{"chat_model", m.provenance.chat_model},
                              {"embed_model", m.provenance.embed_model},
                              {"seed", m.provenance.seed}};
    ojson config = ojson::object();
    for (const auto& [k, v] : m.config) config[k] = v;
    manifest["config"] = config;

    std::string nodes;
    for (const auto& n : store.nodes()) {
        ojson j;
        j["id"] = to_index(n.id);
        j["problem_id"] = n.problem_id;
        j["sample_type"] = std::string(to_string(n.sample_type));
        j["modeling_cluster"] = to_index(n.modeling_cluster);
        j["coding_cluster"] = to_index(n.coding_cluster);
        j["modeling_text"] = n.modeling_text;
        j["coding_text"] = n.coding_text;
        j["phi"] = knowledge_json(n.phi);
        j["e_m"] = vector_json(n.e_m);
        j["e_c"] = vector_json(n.e_c);
        nodes += j.dump() + "\n";
    }

    std::string clusters;
    for (auto space : {Space::modeling, Space::coding}) {
        for (const auto& c : store.clusters(space)) {
            ojson j;
            j["space"] = std::string(to_string(space));
            j["id"] = to_index(c.id);
            std::vector<std::uint32_t> members;
            for (auto mbr : c.members) members.push_back(to_index(mbr));
            j["members"] = members;
            j["knowledge_version"] = c.knowledge_version;
            j["knowledge"] = knowledge_json(c.knowledge);
            ojson pending = ojson::array();
            for (const auto& k : c.pending_phis) pending.push_back(knowledge_json(k));
            j["pending_phis"] = pending;
            j["centroid"] = vector_json(c.centroid);
            clusters += j.dump() + "\n";
        }
    }

    std::string graph;
    for (const auto& [key, w] : store.graph().edges()) {
        ojson j;
        j["modeling"] = to_index(key.first);
        j["coding"] = to_index(key.second);
        j["weight"] = w;
        graph += j.dump() + "\n";
    }

    write_atomic(dir / "nodes.jsonl", nodes);
    write_atomic(dir / "clusters.jsonl", clusters);
    write_atomic(dir / "graph.jsonl", graph);
    // Manifest last: a directory with a manifest is a complete store.
    write_atomic(dir / "manifest.json", manifest.dump() + "\n");
    return m;
}

MemoryStore load_store(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw StoreError("no memory store at " + dir.string() + " (missing manifest.json)");

    try {
        const auto manifest_lines = read_lines(manifest_path);
        if (manifest_lines.size() != 1) throw CorruptStore("manifest.json must hold exactly one record");
        const auto& manifest = manifest_lines.front();
        const int version = manifest.at("format_version").get<int>();
        if (version != kStoreFormatVersion) {
            throw FormatVersionError("store format_version " + std::to_string(version) + " is not readable by this build (expects " +
                                     std::to_string(kStoreFormatVersion) + "); rebuild or migrate the store");
        }
        MemoryStore store(manifest.at("dim").get<std::size_t>(), manifest.at("update_threshold").get<int>());
        const auto& prov = manifest.at("provenance");
        store.provenance = {prov.at("chat_model").get<std::string>(), prov.at("embed_model").get<std::string>(),
                            prov.at("seed").get<std::uint64_t>()};
        for (const auto& [k, v] : manifest.at("config").items()) store.config_snapshot.emplace_back(k, v.get<std::string>());

        for (const auto& j : read_lines(dir / "nodes.jsonl")) {
            ExperienceNode n;
            n.problem_id = j.at("problem_id").get<std::string>();
            n.sample_type = sample_type_from_string(j.at("sample_type").get<std::string>());
            n.modeling_cluster = ClusterId{j.at("modeling_cluster").get<std::uint32_t>()};
            n.coding_cluster = ClusterId{j.at("coding_cluster").get<std::uint32_t>()};
            n.modeling_text = j.at("modeling_text").get<std::string>();
            n.coding_text = j.at("coding_text").get<std::string>();
            n.phi = knowledge_from(j.at("phi"));
            n.e_m = Embedding::raw(j.at("e_m").get<std::vector<double>>());
            n.e_c = Embedding::raw(j.at("e_c").get<std::vector<double>>());
            const auto expected_id = store.nodes().size();
            if (j.at("id").get<std::size_t>() != expected_id) throw CorruptStore("store invariant violated: node ids are dense and ordered");
            store.add_node(std::move(n));
        }

        for (const auto& j : read_lines(dir / "clusters.jsonl")) {
            const auto space = space_from(j.at("space").get<std::string>());
            const auto members = j.at("members").get<std::vector<std::uint32_t>>();
            if (members.empty()) throw CorruptStore("store invariant violated: clusters have members");
            for (auto m : members) {
                if (m >= store.nodes().size()) throw CorruptStore("store invariant violated: cluster members exist");
            }
            const auto id = store.create_cluster(space, NodeId{members.front()});
            if (to_index(id) != j.at("id").get<std::uint32_t>()) throw CorruptStore("store invariant violated: cluster ids are dense and ordered");
            auto& c = store.mutable_cluster(space, id);
            for (std::size_t i = 1; i < members.size(); ++i) c.members.push_back(NodeId{members[i]});
            c.knowledge_version = j.at("knowledge_version").get<int>();
            c.knowledge = knowledge_from(j.at("knowledge"));
            for (const auto& p : j.at("pending_phis")) c.pending_phis.push_back(knowledge_from(p));
            c.centroid = Embedding::raw(j.at("centroid").get<std::vector<double>>());
        }

        for (const auto& j : read_lines(dir / "graph.jsonl")) {
            const auto w = j.at("weight").get<std::uint64_t>();
            if (w == 0) throw CorruptStore("store invariant violated: edge weights are >= 1");
            store.mutable_graph().increment(ClusterId{j.at("modeling").get<std::uint32_t>()},
                                            ClusterId{j.at("coding").get<std::uint32_t>()}, w);
        }

        const auto& counts = manifest.at("counts");
        const auto m = store.manifest();
        if (counts.at("nodes").get<std::size_t>() != m.node_count ||
            counts.at("modeling_clusters").get<std::size_t>() != m.modeling_cluster_count ||
            counts.at("coding_clusters").get<std::size_t>() != m.coding_cluster_count ||
            counts.at("edges").get<std::size_t>() != m.edge_count) {
            throw CorruptStore("store invariant violated: manifest counts match file contents");
        }
        store.check_invariants();
        return store;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptStore(std::string("malformed store record: ") + e.what());
    } catch (const InputError& e) {
        throw CorruptStore(std::string("malformed store record: ") + e.what());
    } catch (const DimensionMismatch& e) {
        throw CorruptStore(std::string("store invariant violated: embedding dim equals store dim: ") + e.what());
    }
}

namespace {

std::uint64_t next_random(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace

MemoryStore subsample(const MemoryStore& store, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0) || ratio > 1.0) throw InputError("subsample ratio must be in (0, 1], got " + std::to_string(ratio));
    const std::size_t n = store.nodes().size();
    const auto keep = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));

    // Partial Fisher-Yates on a fixed generator so the choice is platform independent.
    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    std::uint64_t state = seed;
    for (std::size_t i = 0; i < keep && i + 1 < n; ++i) {
        const auto j = i + static_cast<std::size_t>(next_random(state) % (n - i));
        std::swap(order[i], order[j]);
    }
    order.resize(keep);
    std::sort(order.begin(), order.end());

    std::vector<std::int64_t> remap(n, -1);
    MemoryStore out(store.dim(), store.update_threshold());
    out.provenance = store.provenance;
    out.config_snapshot = store.config_snapshot;
    for (auto old : order) {
        auto copy = store.nodes()[old];
        remap[old] = to_index(out.add_node(std::move(copy)));
    }

    for (auto space : {Space::modeling, Space::coding}) {
        for (const auto& c : store.clusters(space)) {
            std::vector<NodeId> survivors;
            for (auto m : c.members) {
                if (remap[to_index(m)] >= 0) survivors.push_back(NodeId{static_cast<std::uint32_t>(remap[to_index(m)])});
            }
            if (survivors.empty()) continue;
            const auto id = out.create_cluster(space, survivors.front());
            for (std::size_t i = 1; i < survivors.size(); ++i) out.join_cluster(space, id, survivors[i]);
            auto& nc = out.mutable_cluster(space, id);
            nc.knowledge = c.knowledge;
            nc.knowledge_version = c.knowledge_version;
            nc.pending_phis = c.pending_phis;
            for (auto s : survivors) {
                auto& node = out.mutable_node(s);
                (space == Space::modeling ? node.modeling_cluster : node.coding_cluster) = id;
            }
        }
    }
    for (const auto& node : out.nodes()) out.mutable_graph().increment(node.modeling_cluster, node.coding_cluster);
    return out;
}

} // namespace dcm
