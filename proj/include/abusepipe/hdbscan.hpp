#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abusepipe/embedding.hpp"

namespace abusepipe {

// Defaults: core point neighborhood of 2, minimum cluster size 5,
// Euclidean distance.
struct ClusterParams {
    int min_samples = 2;
    int min_cluster_size = 5;
    enum class Metric { euclidean } metric = Metric::euclidean;
    enum class Selection { excess_of_mass, leaf } selection = Selection::excess_of_mass;
};

struct ClusterAssignment {
    std::vector<std::string> ids;
    std::vector<std::optional<int>> cluster_of;  // aligned with ids; nullopt = singleton
    std::map<int, std::size_t> cluster_sizes;
    std::size_t singleton_count = 0;

    std::map<std::string, std::optional<int>> as_map() const {
        std::map<std::string, std::optional<int>> out;
        for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = cluster_of[i];
        return out;
    }
};

namespace hdbscan_detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Total order over graph edges: weight first, then the id-string pair.
// Using the ids (not row positions) keeps every downstream step invariant
// under permutation of the input rows, ties included.
struct EdgeKey {
    double w = kInf;
    const std::string* a = nullptr;  // lexicographically smaller id
    const std::string* b = nullptr;

    bool operator<(const EdgeKey& o) const {
        if (w != o.w) return w < o.w;
        if (int c = a->compare(*o.a); c != 0) return c < 0;
        return b->compare(*o.b) < 0;
    }
};

inline EdgeKey make_edge_key(double w, const std::string& x, const std::string& y) {
    return x < y ? EdgeKey{w, &x, &y} : EdgeKey{w, &y, &x};
}

// Mutual reachability: max(core(i), core(j), d(i, j)) where core(i) is the
// distance to the min_samples-th nearest other point.
inline Eigen::MatrixXd mutual_reachability(const Eigen::MatrixXd& points, int min_samples) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double d = (points.row(i) - points.row(j)).norm();
            dist(i, j) = d;
            dist(j, i) = d;
        }
    }
    const Eigen::Index k = std::min<Eigen::Index>(min_samples, n - 1);
    Eigen::VectorXd core(n);
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
        std::nth_element(row.begin(), row.begin() + k, row.end());
        core(i) = row[static_cast<std::size_t>(k)];  // row includes self at distance 0
    }
    Eigen::MatrixXd mreach(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        mreach(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double v = std::max({dist(i, j), core(i), core(j)});
            mreach(i, j) = v;
            mreach(j, i) = v;
        }
    }
    return mreach;
}

struct MstEdge {
    int u = 0;
    int v = 0;
    double w = 0;
};

// Prim over the complete mutual-reachability graph. The EdgeKey total
// order makes all weights distinct, so the MST (and therefore the
// single-linkage hierarchy) is unique.
inline std::vector<MstEdge> minimum_spanning_tree(const Eigen::MatrixXd& mreach,
                                                  const std::vector<std::string>& ids) {
    const int n = static_cast<int>(mreach.rows());
    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<EdgeKey> best(static_cast<std::size_t>(n));
    std::vector<int> best_from(static_cast<std::size_t>(n), -1);
    std::vector<MstEdge> edges;
    edges.reserve(static_cast<std::size_t>(n - 1));

    in_tree[0] = true;
    for (int j = 1; j < n; ++j) {
        best[static_cast<std::size_t>(j)] = make_edge_key(mreach(0, j), ids[0], ids[static_cast<std::size_t>(j)]);
        best_from[static_cast<std::size_t>(j)] = 0;
    }
    for (int step = 1; step < n; ++step) {
        int pick = -1;
        for (int j = 0; j < n; ++j) {
            if (in_tree[static_cast<std::size_t>(j)]) continue;
            if (pick < 0 || best[static_cast<std::size_t>(j)] < best[static_cast<std::size_t>(pick)]) pick = j;
        }
        in_tree[static_cast<std::size_t>(pick)] = true;
        edges.push_back({best_from[static_cast<std::size_t>(pick)], pick, best[static_cast<std::size_t>(pick)].w});
        for (int j = 0; j < n; ++j) {
            if (in_tree[static_cast<std::size_t>(j)]) continue;
            EdgeKey cand = make_edge_key(mreach(pick, j), ids[static_cast<std::size_t>(pick)],
                                         ids[static_cast<std::size_t>(j)]);
            if (cand < best[static_cast<std::size_t>(j)]) {
                best[static_cast<std::size_t>(j)] = cand;
                best_from[static_cast<std::size_t>(j)] = pick;
            }
        }
    }
    return edges;
}

// Binary single-linkage dendrogram. Leaves are points 0..n-1; internal
// nodes n..2n-2 record their children and merge distance.
struct DendroNode {
    int left = -1;
    int right = -1;
    double dist = 0;
    int size = 0;
};

inline std::vector<DendroNode> single_linkage(std::vector<MstEdge> edges,
                                              const std::vector<std::string>& ids, int n) {
    std::sort(edges.begin(), edges.end(), [&](const MstEdge& x, const MstEdge& y) {
        return make_edge_key(x.w, ids[static_cast<std::size_t>(x.u)], ids[static_cast<std::size_t>(x.v)]) <
               make_edge_key(y.w, ids[static_cast<std::size_t>(y.u)], ids[static_cast<std::size_t>(y.v)]);
    });
    std::vector<DendroNode> nodes(static_cast<std::size_t>(std::max(0, n - 1)));
    std::vector<int> root_of(static_cast<std::size_t>(2 * n - 1));
    for (int i = 0; i < 2 * n - 1; ++i) root_of[static_cast<std::size_t>(i)] = i;
    auto find = [&](int x) {
        while (root_of[static_cast<std::size_t>(x)] != x) {
            root_of[static_cast<std::size_t>(x)] =
                root_of[static_cast<std::size_t>(root_of[static_cast<std::size_t>(x)])];
            x = root_of[static_cast<std::size_t>(x)];
        }
        return x;
    };
    auto size_of = [&](int node) { return node < n ? 1 : nodes[static_cast<std::size_t>(node - n)].size; };
    for (int step = 0; step < static_cast<int>(edges.size()); ++step) {
        const MstEdge& e = edges[static_cast<std::size_t>(step)];
        int ru = find(e.u);
        int rv = find(e.v);
        int merged = n + step;
        nodes[static_cast<std::size_t>(step)] = {ru, rv, e.w, size_of(ru) + size_of(rv)};
        root_of[static_cast<std::size_t>(ru)] = merged;
        root_of[static_cast<std::size_t>(rv)] = merged;
    }
    return nodes;
}

struct CondensedRow {
    int parent = 0;
    int child = 0;  // cluster label or point index
    bool child_is_cluster = false;
    double lambda = 0;
    int size = 1;
};

struct CondensedTree {
    std::vector<CondensedRow> rows;
    int n_clusters = 0;  // labels 0 (root) .. n_clusters-1
};

// Walks the dendrogram top down. A split where both sides reach the
// minimum cluster size births two new clusters; otherwise the undersized
// side's points fall out at that lambda and the surviving side keeps the
// cluster label. lambda = 1/distance, infinite for zero distances.
inline CondensedTree condense_tree(const std::vector<DendroNode>& nodes, int n,
                                   int min_cluster_size) {
    CondensedTree tree;
    if (n < 2) {
        tree.n_clusters = n > 0 ? 1 : 0;
        return tree;
    }
    const int root = 2 * n - 2;
    int next_label = 1;

    auto collect_leaves = [&](int node, std::vector<int>& out) {
        std::vector<int> stack{node};
        while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            if (cur < n) {
                out.push_back(cur);
            } else {
                const DendroNode& dn = nodes[static_cast<std::size_t>(cur - n)];
                stack.push_back(dn.left);
                stack.push_back(dn.right);
            }
        }
    };

    std::vector<std::pair<int, int>> stack{{root, 0}};
    while (!stack.empty()) {
        auto [node, cluster] = stack.back();
        stack.pop_back();
        const DendroNode& dn = nodes[static_cast<std::size_t>(node - n)];
        double lambda = dn.dist > 0 ? 1.0 / dn.dist : kInf;
        auto size_of = [&](int x) { return x < n ? 1 : nodes[static_cast<std::size_t>(x - n)].size; };
        int lc = size_of(dn.left);
        int rc = size_of(dn.right);

        auto fall_out = [&](int side) {
            std::vector<int> leaves;
            collect_leaves(side, leaves);
            std::sort(leaves.begin(), leaves.end());
            for (int p : leaves) tree.rows.push_back({cluster, p, false, lambda, 1});
        };

        if (lc >= min_cluster_size && rc >= min_cluster_size) {
            int left_label = next_label++;
            tree.rows.push_back({cluster, left_label, true, lambda, lc});
            int right_label = next_label++;
            tree.rows.push_back({cluster, right_label, true, lambda, rc});
            // children are guaranteed internal nodes: a leaf has size 1 < min_cluster_size
            stack.emplace_back(dn.right, right_label);
            stack.emplace_back(dn.left, left_label);
        } else if (lc < min_cluster_size && rc < min_cluster_size) {
            fall_out(dn.left);
            fall_out(dn.right);
        } else if (lc < min_cluster_size) {
            fall_out(dn.left);
            stack.emplace_back(dn.right, cluster);
        } else {
            fall_out(dn.right);
            stack.emplace_back(dn.left, cluster);
        }
    }
    tree.n_clusters = next_label;
    return tree;
}

// stability(C) = sum over everything leaving C of (lambda_leave - lambda_birth),
// weighted by size. Guarded so inf - inf contributes zero.
inline std::vector<double> compute_stability(const CondensedTree& tree) {
    std::vector<double> birth(static_cast<std::size_t>(tree.n_clusters), 0.0);
    for (const auto& row : tree.rows) {
        if (row.child_is_cluster) birth[static_cast<std::size_t>(row.child)] = row.lambda;
    }
    std::vector<double> stability(static_cast<std::size_t>(tree.n_clusters), 0.0);
    for (const auto& row : tree.rows) {
        double b = birth[static_cast<std::size_t>(row.parent)];
        if (row.lambda > b) {
            stability[static_cast<std::size_t>(row.parent)] += (row.lambda - b) * row.size;
        }
    }
    return stability;
}

// Excess-of-mass cluster extraction. Processes clusters bottom up; a
// cluster whose descendants carry more stability yields to them, otherwise
// it is selected and its whole subtree deselected. The root is never
// selectable. Ties go to the parent.
inline std::vector<bool> select_clusters(const CondensedTree& tree,
                                         ClusterParams::Selection selection) {
    const int nc = tree.n_clusters;
    std::vector<std::vector<int>> children(static_cast<std::size_t>(nc));
    for (const auto& row : tree.rows) {
        if (row.child_is_cluster) children[static_cast<std::size_t>(row.parent)].push_back(row.child);
    }
    std::vector<bool> selected(static_cast<std::size_t>(nc), false);

    if (selection == ClusterParams::Selection::leaf) {
        for (int c = 1; c < nc; ++c) {
            if (children[static_cast<std::size_t>(c)].empty()) selected[static_cast<std::size_t>(c)] = true;
        }
        return selected;
    }

    std::vector<double> stability = compute_stability(tree);
    for (int c = nc - 1; c >= 1; --c) {
        double subtree = 0;
        for (int child : children[static_cast<std::size_t>(c)]) {
            subtree += stability[static_cast<std::size_t>(child)];
        }
        if (subtree > stability[static_cast<std::size_t>(c)]) {
            selected[static_cast<std::size_t>(c)] = false;
            stability[static_cast<std::size_t>(c)] = subtree;
        } else {
            selected[static_cast<std::size_t>(c)] = true;
            std::vector<int> walk = children[static_cast<std::size_t>(c)];
            while (!walk.empty()) {
                int d = walk.back();
                walk.pop_back();
                selected[static_cast<std::size_t>(d)] = false;
                for (int grandchild : children[static_cast<std::size_t>(d)]) walk.push_back(grandchild);
            }
        }
    }
    return selected;
}

}  // namespace hdbscan_detail

// Density clustering per the HDBSCAN pipeline: mutual-reachability
// distances, minimum spanning tree, single-linkage hierarchy, condensation
// at the minimum cluster size, and stability-based extraction. Points that
// land in no stable cluster become singletons. Output cluster ids are
// assigned by ascending smallest member id, so the whole result is a pure
// function of the (id, vector) pairs regardless of row order.
inline ClusterAssignment hdbscan(const EmbeddingMatrix& m, const ClusterParams& params) {
    if (params.min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");
    if (params.min_cluster_size < 2) throw std::invalid_argument("min_cluster_size must be >= 2");
    m.validate();

    using namespace hdbscan_detail;
    const int n = static_cast<int>(m.rows());
    ClusterAssignment out;
    out.ids = m.ids;
    out.cluster_of.assign(static_cast<std::size_t>(n), std::nullopt);
    if (n == 0) return out;
    if (n == 1 || params.min_cluster_size > n) {
        out.singleton_count = static_cast<std::size_t>(n);
        return out;
    }

    Eigen::MatrixXd mreach = mutual_reachability(m.values, params.min_samples);
    auto mst = minimum_spanning_tree(mreach, m.ids);
    auto dendro = single_linkage(std::move(mst), m.ids, n);
    auto tree = condense_tree(dendro, n, params.min_cluster_size);
    auto selected = select_clusters(tree, params.selection);

    std::vector<int> parent_of(static_cast<std::size_t>(tree.n_clusters), -1);
    std::vector<int> point_parent(static_cast<std::size_t>(n), -1);
    for (const auto& row : tree.rows) {
        if (row.child_is_cluster) parent_of[static_cast<std::size_t>(row.child)] = row.parent;
        else point_parent[static_cast<std::size_t>(row.child)] = row.parent;
    }

    // Each point belongs to the selected cluster on its ancestor chain, if any.
    std::vector<int> raw_label(static_cast<std::size_t>(n), -1);
    for (int p = 0; p < n; ++p) {
        int c = point_parent[static_cast<std::size_t>(p)];
        while (c >= 0) {
            if (selected[static_cast<std::size_t>(c)]) {
                raw_label[static_cast<std::size_t>(p)] = c;
                break;
            }
            c = parent_of[static_cast<std::size_t>(c)];
        }
    }

    // Normalize cluster ids by ascending smallest member id.
    std::map<int, const std::string*> min_member;
    for (int p = 0; p < n; ++p) {
        int c = raw_label[static_cast<std::size_t>(p)];
        if (c < 0) continue;
        auto [it, inserted] = min_member.emplace(c, &m.ids[static_cast<std::size_t>(p)]);
        if (!inserted && m.ids[static_cast<std::size_t>(p)] < *it->second) {
            it->second = &m.ids[static_cast<std::size_t>(p)];
        }
    }
    std::vector<std::pair<const std::string*, int>> order;
    for (const auto& [c, id] : min_member) order.emplace_back(id, c);
    std::sort(order.begin(), order.end(),
              [](const auto& x, const auto& y) { return *x.first < *y.first; });
    std::map<int, int> final_id;
    for (std::size_t i = 0; i < order.size(); ++i) final_id[order[i].second] = static_cast<int>(i);

    for (int p = 0; p < n; ++p) {
        int c = raw_label[static_cast<std::size_t>(p)];
        if (c < 0) {
            ++out.singleton_count;
        } else {
            int id = final_id.at(c);
            out.cluster_of[static_cast<std::size_t>(p)] = id;
            ++out.cluster_sizes[id];
        }
    }
    return out;
}

}  // namespace abusepipe
