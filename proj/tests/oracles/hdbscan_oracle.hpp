#pragma once

// Test oracle: brute-force HDBSCAN that enumerates the condensed tree
// directly from pairwise mutual-reachability distances. Uses naive O(n^3)
// agglomeration (no MST, no union-find) and recursive condensation /
// selection, sharing no code with the library implementation. Correctness
// relies on both sides ordering edges by the same (weight, id, id) total
// order, which makes the single-linkage hierarchy unique.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

struct HdbscanResult {
    std::set<std::set<std::string>> clusters;
    std::set<std::string> singletons;
};

inline HdbscanResult brute_hdbscan(const std::vector<std::string>& ids,
                                   const std::vector<std::vector<double>>& points,
                                   int min_samples, int min_cluster_size) {
    const int n = static_cast<int>(ids.size());
    HdbscanResult result;
    if (n == 0) return result;
    if (n == 1 || min_cluster_size > n) {
        for (const auto& id : ids) result.singletons.insert(id);
        return result;
    }

    // Pairwise Euclidean and mutual reachability.
    std::vector<std::vector<double>> dist(static_cast<std::size_t>(n),
                                          std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < points[static_cast<std::size_t>(i)].size(); ++k) {
                double diff = points[static_cast<std::size_t>(i)][k] - points[static_cast<std::size_t>(j)][k];
                s += diff * diff;
            }
            dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::sqrt(s);
            dist[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = std::sqrt(s);
        }
    }
    int k = std::min(min_samples, n - 1);
    std::vector<double> core(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto row = dist[static_cast<std::size_t>(i)];
        std::sort(row.begin(), row.end());
        core[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(k)];
    }
    auto mreach = [&](int i, int j) {
        return std::max({dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                         core[static_cast<std::size_t>(i)], core[static_cast<std::size_t>(j)]});
    };
    using Key = std::tuple<double, std::string, std::string>;
    auto edge_key = [&](int i, int j) {
        const std::string& a = ids[static_cast<std::size_t>(i)];
        const std::string& b = ids[static_cast<std::size_t>(j)];
        return a < b ? Key{mreach(i, j), a, b} : Key{mreach(i, j), b, a};
    };

    // Naive single-linkage agglomeration under the total order: repeatedly
    // merge the two groups whose best cross edge is globally minimal.
    struct Node {
        int left = -1, right = -1;  // -1 for leaves
        double dist = 0;
        std::vector<int> members;
    };
    std::vector<Node> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back({-1, -1, 0.0, {i}});
    std::vector<int> active;
    for (int i = 0; i < n; ++i) active.push_back(i);

    while (active.size() > 1) {
        Key best_key{std::numeric_limits<double>::infinity(), "", ""};
        std::size_t best_a = 0, best_b = 1;
        for (std::size_t a = 0; a < active.size(); ++a) {
            for (std::size_t b = a + 1; b < active.size(); ++b) {
                for (int i : nodes[static_cast<std::size_t>(active[a])].members) {
                    for (int j : nodes[static_cast<std::size_t>(active[b])].members) {
                        Key key = edge_key(i, j);
                        if (key < best_key) {
                            best_key = key;
                            best_a = a;
                            best_b = b;
                        }
                    }
                }
            }
        }
        Node merged;
        merged.left = active[best_a];
        merged.right = active[best_b];
        merged.dist = std::get<0>(best_key);
        merged.members = nodes[static_cast<std::size_t>(merged.left)].members;
        merged.members.insert(merged.members.end(),
                              nodes[static_cast<std::size_t>(merged.right)].members.begin(),
                              nodes[static_cast<std::size_t>(merged.right)].members.end());
        nodes.push_back(merged);
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_a));
        active.push_back(static_cast<int>(nodes.size()) - 1);
    }
    const int root = active[0];

    // Recursive condensation.
    struct Cluster {
        double birth = 0;
        std::vector<std::pair<int, double>> point_leaves;  // (point, leave lambda)
        std::vector<int> children;
        std::vector<int> child_sizes;
        std::vector<double> child_births;
        std::vector<int> all_points;
    };
    std::vector<Cluster> clusters(1);
    const double inf = std::numeric_limits<double>::infinity();

    std::function<void(int, int)> walk = [&](int node, int cluster) {
        const Node& dn = nodes[static_cast<std::size_t>(node)];
        if (dn.left < 0) return;  // leaf: nothing below
        double lambda = dn.dist > 0 ? 1.0 / dn.dist : inf;
        const Node& left = nodes[static_cast<std::size_t>(dn.left)];
        const Node& right = nodes[static_cast<std::size_t>(dn.right)];
        bool left_big = static_cast<int>(left.members.size()) >= min_cluster_size;
        bool right_big = static_cast<int>(right.members.size()) >= min_cluster_size;
        auto fall_out = [&](const Node& side) {
            for (int p : side.members) {
                clusters[static_cast<std::size_t>(cluster)].point_leaves.emplace_back(p, lambda);
            }
        };
        if (left_big && right_big) {
            for (int side : {dn.left, dn.right}) {
                int label = static_cast<int>(clusters.size());
                clusters.emplace_back();
                clusters[static_cast<std::size_t>(label)].birth = lambda;
                clusters[static_cast<std::size_t>(cluster)].children.push_back(label);
                clusters[static_cast<std::size_t>(cluster)].child_sizes.push_back(
                    static_cast<int>(nodes[static_cast<std::size_t>(side)].members.size()));
                clusters[static_cast<std::size_t>(cluster)].child_births.push_back(lambda);
                clusters[static_cast<std::size_t>(label)].all_points =
                    nodes[static_cast<std::size_t>(side)].members;
                walk(side, label);
            }
        } else if (!left_big && !right_big) {
            fall_out(left);
            fall_out(right);
        } else if (!left_big) {
            fall_out(left);
            walk(dn.right, cluster);
        } else {
            fall_out(right);
            walk(dn.left, cluster);
        }
    };
    clusters[0].all_points = nodes[static_cast<std::size_t>(root)].members;
    walk(root, 0);

    // Stability with the same inf-minus-inf guard as the implementation.
    auto stability_of = [&](int c) {
        const Cluster& cl = clusters[static_cast<std::size_t>(c)];
        double s = 0;
        for (const auto& [p, lambda] : cl.point_leaves) {
            (void)p;
            if (lambda > cl.birth) s += lambda - cl.birth;
        }
        for (std::size_t i = 0; i < cl.children.size(); ++i) {
            if (cl.child_births[i] > cl.birth) {
                s += (cl.child_births[i] - cl.birth) * cl.child_sizes[i];
            }
        }
        return s;
    };

    // Excess-of-mass selection, ties to the parent; the root never competes.
    std::function<std::pair<std::set<int>, double>(int)> select =
        [&](int c) -> std::pair<std::set<int>, double> {
        double own = stability_of(c);
        std::set<int> child_set;
        double child_total = 0;
        for (int child : clusters[static_cast<std::size_t>(c)].children) {
            auto [s, v] = select(child);
            child_total += v;
            child_set.insert(s.begin(), s.end());
        }
        if (child_total > own) return {child_set, child_total};
        return {{c}, own};
    };
    std::set<int> chosen;
    for (int child : clusters[0].children) {
        auto [s, v] = select(child);
        (void)v;
        chosen.insert(s.begin(), s.end());
    }

    std::set<int> clustered_points;
    for (int c : chosen) {
        std::set<std::string> member_ids;
        for (int p : clusters[static_cast<std::size_t>(c)].all_points) {
            member_ids.insert(ids[static_cast<std::size_t>(p)]);
            clustered_points.insert(p);
        }
        result.clusters.insert(std::move(member_ids));
    }
    for (int p = 0; p < n; ++p) {
        if (!clustered_points.count(p)) result.singletons.insert(ids[static_cast<std::size_t>(p)]);
    }
    return result;
}

}  // namespace oracle
