#pragma once

// Primal network simplex for the balanced transportation problem
//
//   min sum_ij c_ij x_ij  s.t.  sum_j x_ij = a_i,  sum_i x_ij = b_j,  x >= 0.
//
// The basis is a spanning tree over sources, sinks and an artificial root.
// The initial tree routes every supply through the root (big-M arcs on the
// sink side), which is strongly feasible; the leaving arc is the last
// blocking arc met when walking the pivot cycle from its apex in the
// direction of flow, which keeps the tree strongly feasible and rules out
// cycling on degenerate pivots. Tree bookkeeping (parents, depths, node
// potentials) is rebuilt from the adjacency lists after each pivot: O(V)
// per pivot, which is cheap next to pricing at the sizes we solve.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace nsflows::detail {

struct TransportSolution {
  double cost = 0.0;
  Eigen::MatrixXd plan;
  std::size_t pivots = 0;
};

class TransportSimplex {
 public:
  TransportSimplex(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply, const Eigen::VectorXd& demand)
      : n1_(static_cast<int>(supply.size())),
        n2_(static_cast<int>(demand.size())),
        root_(n1_ + n2_),
        real_arcs_(n1_ * n2_) {
    const int nodes = n1_ + n2_;
    const int arcs = real_arcs_ + nodes;
    src_.resize(arcs);
    tgt_.resize(arcs);
    cost_.resize(arcs);
    flow_.assign(arcs, 0.0);
    in_tree_.assign(arcs, 0);

    double max_cost = 0.0;
    for (int i = 0; i < n1_; ++i) {
      for (int j = 0; j < n2_; ++j) {
        const int e = i * n2_ + j;
        src_[e] = i;
        tgt_[e] = n1_ + j;
        cost_[e] = cost(i, j);
        max_cost = std::max(max_cost, std::abs(cost(i, j)));
      }
    }
    const double art_cost = (max_cost + 1.0) * static_cast<double>(nodes + 1);
    cost_scale_ = std::max(1.0, max_cost);

    adj_.assign(nodes + 1, {});
    for (int u = 0; u < nodes; ++u) {
      const int e = real_arcs_ + u;
      if (u < n1_) {
        src_[e] = u;
        tgt_[e] = root_;
        cost_[e] = 0.0;
        flow_[e] = supply[u];
      } else {
        src_[e] = root_;
        tgt_[e] = u;
        cost_[e] = art_cost;
        flow_[e] = demand[u - n1_];
      }
      in_tree_[e] = 1;
      adj_[u].push_back(e);
      adj_[root_].push_back(e);
    }
    parent_.assign(nodes + 1, -1);
    pred_.assign(nodes + 1, -1);
    up_.assign(nodes + 1, 0);
    depth_.assign(nodes + 1, 0);
    pi_.assign(nodes + 1, 0.0);
    rebuild_tree();
  }

  TransportSolution solve(std::size_t max_pivots = 0) {
    const int arcs = static_cast<int>(cost_.size());
    const int block = std::max(10, static_cast<int>(std::sqrt(static_cast<double>(arcs))));
    const double tol = 1e-12 * cost_scale_;
    if (max_pivots == 0) max_pivots = 100000 + 200 * static_cast<std::size_t>(arcs);
    int next = 0;
    std::size_t pivots = 0;
    while (true) {
      // Block search pricing: scan blocks cyclically, take the most negative
      // reduced cost of the first block that contains one.
      int entering = -1;
      double best = -tol;
      int scanned = 0;
      int in_block = 0;
      for (int e = next; scanned < arcs; ++scanned) {
        if (!in_tree_[e]) {
          const double rc = cost_[e] + pi_[src_[e]] - pi_[tgt_[e]];
          if (rc < best) {
            best = rc;
            entering = e;
          }
        }
        if (++e == arcs) e = 0;
        if (++in_block == block) {
          in_block = 0;
          if (entering >= 0) {
            next = e;
            break;
          }
        }
      }
      if (entering < 0) break;
      pivot(entering);
      if (++pivots > max_pivots) {
        throw std::runtime_error("TransportSimplex: pivot limit exceeded");
      }
    }

    TransportSolution out;
    out.pivots = pivots;
    out.plan = Eigen::MatrixXd::Zero(n1_, n2_);
    for (int e = 0; e < real_arcs_; ++e) {
      if (flow_[e] > 0.0) {
        out.plan(src_[e], tgt_[e] - n1_) = flow_[e];
        out.cost += flow_[e] * cost_[e];
      }
    }
    return out;
  }

 private:
  void pivot(int entering) {
    // Cycle: flow runs src -> tgt on the entering arc, then from tgt up to the
    // apex and down from the apex to src.
    const int u_in = src_[entering];
    const int v_in = tgt_[entering];
    int a = u_in;
    int b = v_in;
    while (a != b) {
      if (depth_[a] >= depth_[b]) {
        a = parent_[a];
      } else {
        b = parent_[b];
      }
    }
    const int apex = a;

    constexpr double inf = std::numeric_limits<double>::infinity();
    double delta = inf;
    int leave_node = -1;
    // Source side, walked upwards from u_in: flow runs parent -> child, so
    // arcs oriented child -> parent lose flow. First strict minimum wins,
    // i.e. the blocking arc closest to u_in (last in cycle order).
    for (int u = u_in; u != apex; u = parent_[u]) {
      if (up_[u]) {
        const double d = flow_[pred_[u]];
        if (d < delta) {
          delta = d;
          leave_node = u;
        }
      }
    }
    // Sink side, walked upwards from v_in: flow runs child -> parent, so
    // arcs oriented parent -> child lose flow. Ties go to the arc closest to
    // the apex, which is last in cycle order.
    for (int u = v_in; u != apex; u = parent_[u]) {
      if (!up_[u]) {
        const double d = flow_[pred_[u]];
        if (d <= delta) {
          delta = d;
          leave_node = u;
        }
      }
    }
    if (leave_node < 0) {
      throw std::runtime_error("TransportSimplex: unbounded pivot");
    }

    if (delta > 0.0) {
      flow_[entering] += delta;
      for (int u = u_in; u != apex; u = parent_[u]) {
        flow_[pred_[u]] += up_[u] ? -delta : delta;
      }
      for (int u = v_in; u != apex; u = parent_[u]) {
        flow_[pred_[u]] += up_[u] ? delta : -delta;
      }
    }
    const int leaving = pred_[leave_node];
    flow_[leaving] = 0.0;
    for (int u = u_in; u != apex; u = parent_[u]) clamp(pred_[u]);
    for (int u = v_in; u != apex; u = parent_[u]) clamp(pred_[u]);

    in_tree_[leaving] = 0;
    erase_adj(src_[leaving], leaving);
    erase_adj(tgt_[leaving], leaving);
    in_tree_[entering] = 1;
    adj_[u_in].push_back(entering);
    adj_[v_in].push_back(entering);
    rebuild_tree();
  }

  void clamp(int e) {
    if (flow_[e] < 0.0) flow_[e] = 0.0;
  }

  void erase_adj(int node, int arc) {
    auto& list = adj_[node];
    const auto it = std::find(list.begin(), list.end(), arc);
    *it = list.back();
    list.pop_back();
  }

  // Parents, depths and potentials from the root; tree arcs have zero
  // reduced cost: cost + pi[src] - pi[tgt] = 0.
  void rebuild_tree() {
    order_.clear();
    order_.push_back(root_);
    parent_[root_] = -1;
    pred_[root_] = -1;
    depth_[root_] = 0;
    pi_[root_] = 0.0;
    for (std::size_t head = 0; head < order_.size(); ++head) {
      const int u = order_[head];
      for (const int e : adj_[u]) {
        if (e == pred_[u]) continue;
        const int v = src_[e] == u ? tgt_[e] : src_[e];
        parent_[v] = u;
        pred_[v] = e;
        depth_[v] = depth_[u] + 1;
        up_[v] = src_[e] == v ? 1 : 0;
        pi_[v] = up_[v] ? pi_[u] - cost_[e] : pi_[u] + cost_[e];
        order_.push_back(v);
      }
    }
  }

  int n1_;
  int n2_;
  int root_;
  int real_arcs_;
  double cost_scale_ = 1.0;
  std::vector<int> src_, tgt_;
  std::vector<double> cost_, flow_;
  std::vector<std::uint8_t> in_tree_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> parent_, pred_, depth_, order_;
  std::vector<std::uint8_t> up_;
  std::vector<double> pi_;
};

}  // namespace nsflows::detail
