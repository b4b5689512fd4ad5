#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "efl/data.hpp"
#include "efl/error.hpp"
#include "efl/model.hpp"

namespace efl {

// Mean absolute pairwise loss gap over unordered participant pairs.
inline double client_disagreement(std::span<const double> losses) {
  detail::require(losses.size() >= 2, "client_disagreement: need >= 2 participants, got ",
                  losses.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i)
    for (std::size_t j = i + 1; j < losses.size(); ++j) sum += std::abs(losses[i] - losses[j]);
  const double r = static_cast<double>(losses.size());
  return sum / (r * (r - 1.0) / 2.0);
}

// RMS deviation of client accuracies around the global accuracy.
inline double sigma_acc(std::span<const double> client_accs, double global_acc) {
  detail::require(!client_accs.empty(), "sigma_acc: empty client list");
  double s = 0.0;
  for (double a : client_accs) s += (a - global_acc) * (a - global_acc);
  return std::sqrt(s / static_cast<double>(client_accs.size()));
}

enum class NmiNorm { geometric, arithmetic };

// Normalized mutual information (natural log). Two single-cluster
// partitions score 1; a single-cluster partition against a split one
// scores 0. Clamped to [0, 1].
template <typename A, typename B>
double nmi(std::span<const A> pred, std::span<const B> truth, NmiNorm norm = NmiNorm::geometric) {
  detail::require(pred.size() == truth.size(), "nmi: length mismatch ", pred.size(), " vs ",
                  truth.size());
  detail::require(!pred.empty(), "nmi: empty labelings");
  const double n = static_cast<double>(pred.size());
  std::map<A, double> pc;
  std::map<B, double> tc;
  std::map<std::pair<A, B>, double> joint;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pc[pred[i]] += 1.0;
    tc[truth[i]] += 1.0;
    joint[{pred[i], truth[i]}] += 1.0;
  }
  if (pc.size() == 1 && tc.size() == 1) return 1.0;
  if (pc.size() == 1 || tc.size() == 1) return 0.0;

  auto entropy = [n](const auto& counts) {
    double h = 0.0;
    for (const auto& [k, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hp = entropy(pc);
  const double ht = entropy(tc);
  double mi = 0.0;
  for (const auto& [key, c] : joint)
    mi += (c / n) * std::log((c * n) / (pc[key.first] * tc[key.second]));
  const double denom = norm == NmiNorm::geometric ? std::sqrt(hp * ht) : 0.5 * (hp + ht);
  return std::clamp(mi / denom, 0.0, 1.0);
}

template <typename A, typename B>
double nmi(const std::vector<A>& pred, const std::vector<B>& truth,
           NmiNorm norm = NmiNorm::geometric) {
  return nmi(std::span<const A>(pred), std::span<const B>(truth), norm);
}

struct ShardScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline ShardScore score(const ModelParams& params, const Dataset& ds) {
  detail::require(ds.size() > 0, "evaluate: empty shard");
  const auto fwd = forward(params, ds.features);
  double loss = 0.0;
  std::size_t hits = 0;
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const auto row = fwd.logits.row(s);
    const auto y = ds.labels[s];
    detail::require(y >= 0 && static_cast<std::size_t>(y) < row.size(), "evaluate: label ", y,
                    " out of range");
    loss -= log_softmax(row)[static_cast<std::size_t>(y)];
    const auto argmax = std::max_element(row.begin(), row.end()) - row.begin();
    if (argmax == y) ++hits;
  }
  const double n = static_cast<double>(ds.size());
  return {loss / n, static_cast<double>(hits) / n};
}

struct Evaluation {
  std::vector<double> client_losses;
  std::vector<double> client_accs;
  double global_acc = 0.0;
};

// Per-client test loss/accuracy plus accuracy on the pooled test set.
inline Evaluation evaluate(const ModelParams& params, std::span<const Dataset* const> shards,
                           const Dataset& global_test) {
  detail::require(!shards.empty(), "evaluate: no shards");
  Evaluation ev;
  for (const Dataset* s : shards) {
    const auto sc = score(params, *s);
    ev.client_losses.push_back(sc.loss);
    ev.client_accs.push_back(sc.accuracy);
  }
  ev.global_acc = score(params, global_test).accuracy;
  return ev;
}

inline Evaluation evaluate(const ModelParams& params, const std::vector<Dataset>& shards,
                           const Dataset& global_test) {
  std::vector<const Dataset*> ptrs;
  for (const auto& s : shards) ptrs.push_back(&s);
  return evaluate(params, std::span<const Dataset* const>(ptrs), global_test);
}

// Metrics for one communication round.
struct RoundRecord {
  std::size_t round = 0;  // 1-based: metrics describe w_{k+1} after round k
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<std::size_t> cohort;
  std::vector<double> weights;
  std::vector<double> train_losses;  // at each participant's final local params
  std::vector<std::size_t> cluster_labels;  // equitable only
  std::vector<std::size_t> true_clusters;
  std::optional<double> nmi;  // equitable only
  bool evaluated = false;
  std::vector<double> client_test_losses;
  std::vector<double> client_test_accs;
  double global_acc = 0.0;
  double mean_client_loss = 0.0;
  double cd = 0.0;
  double sigma_acc = 0.0;
  double wall_time = 0.0;  // seconds
};

}  // namespace efl
