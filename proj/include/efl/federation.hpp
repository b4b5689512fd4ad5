#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "efl/clustering.hpp"
#include "efl/data.hpp"
#include "efl/error.hpp"
#include "efl/metrics.hpp"
#include "efl/model.hpp"
#include "efl/rng.hpp"

namespace efl {

enum class Algorithm { fedavg, fedprox, equitable, fedprox_powd };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::fedavg, Algorithm::fedprox,
                                               Algorithm::equitable, Algorithm::fedprox_powd};

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::fedavg: return "fedavg";
    case Algorithm::fedprox: return "fedprox";
    case Algorithm::equitable: return "equitable";
    case Algorithm::fedprox_powd: return "fedprox_powd";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  for (Algorithm a : kAllAlgorithms)
    if (to_string(a) == s) return a;
  throw ContractViolation(detail::concat(
      "algorithm: unknown value '", s, "' (expected fedavg|fedprox|equitable|fedprox_powd)"));
}

// How fedavg/fedprox/pow-d weight the cohort.
enum class BaselineWeighting { samples, uniform };

struct HyperParams {
  double eta = 0.01;
  double mu = 0.0;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  std::size_t rounds = 1;
  std::size_t cohort_size = 1;
  std::size_t num_clusters = 1;
  std::size_t powd_candidates = 0;  // 0: min(n, 2r)
  Algorithm algorithm = Algorithm::fedavg;

  std::size_t probe_size = 64;
  ActivationLayer activation_layer = ActivationLayer::penultimate;
  bool cosine_similarity = false;
  BaselineWeighting baseline_weighting = BaselineWeighting::samples;
  std::size_t kmeans_restarts = 20;

  // FedAvg's local step has no proximal term.
  double effective_mu() const { return algorithm == Algorithm::fedavg ? 0.0 : mu; }

  std::size_t candidates(std::size_t n) const {
    return powd_candidates != 0 ? powd_candidates : std::min(n, 2 * cohort_size);
  }

  // Throws ContractViolation naming the offending field.
  void validate(std::size_t num_clients) const {
    detail::require(std::isfinite(eta) && eta > 0.0, "eta: must be > 0, got ", eta);
    detail::require(std::isfinite(mu) && mu >= 0.0, "mu: must be >= 0, got ", mu);
    detail::require(local_epochs >= 1, "local_epochs: must be >= 1");
    detail::require(batch_size >= 1, "batch_size: must be >= 1");
    detail::require(cohort_size >= 1, "cohort_size: must be >= 1");
    detail::require(cohort_size <= num_clients, "cohort_size: ", cohort_size,
                    " exceeds client count ", num_clients);
    detail::require(num_clusters >= 1, "num_clusters: must be >= 1");
    detail::require(probe_size >= 1, "probe_size: must be >= 1");
    detail::require(kmeans_restarts >= 1, "kmeans_restarts: must be >= 1");
    if (algorithm == Algorithm::equitable)
      detail::require(num_clusters <= cohort_size, "num_clusters: ", num_clusters,
                      " exceeds cohort_size ", cohort_size);
    if (algorithm == Algorithm::fedprox_powd) {
      const std::size_t d = candidates(num_clients);
      detail::require(d >= cohort_size, "powd_candidates: ", d, " is below cohort_size ",
                      cohort_size);
      detail::require(d <= num_clients, "powd_candidates: ", d, " exceeds client count ",
                      num_clients);
    }
  }
};

struct ClientUpdate {
  std::size_t client_id = 0;
  ModelParams params;
  std::vector<double> activation;
  double train_loss = 0.0;
  std::size_t sample_count = 0;
};

// One proximal SGD step: w <- w - eta * (grad + mu * (w - anchor)).
inline void prox_step(std::span<double> w, std::span<const double> grad,
                      std::span<const double> anchor, double eta, double mu) {
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * (grad[i] + mu * (w[i] - anchor[i]));
}

// E epochs of proximal mini-batch SGD on one client's shard, anchored at the
// received global model. Each epoch reshuffles the shard; a trailing partial
// batch is kept.
inline ClientUpdate local_update(const ClientDataset& client, const ModelParams& global,
                                 const HyperParams& hp, Rng& rng) {
  const Dataset& shard = client.shard;
  detail::require(shard.size() > 0, "local_update: client ", client.client_id,
                  " has an empty shard");
  detail::require(hp.batch_size >= 1 && hp.local_epochs >= 1, "local_update: invalid hyperparams");
  const double mu = hp.effective_mu();

  ModelParams cur = global;
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hp.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size, ++step) {
      const std::size_t stop = std::min(order.size(), start + hp.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Dataset b = shard.subset(idx);
      const LossGrad lg = loss_and_grad(cur, Batch{b.features, b.labels});
      const bool finite = std::isfinite(lg.loss) &&
                          std::all_of(lg.grad.begin(), lg.grad.end(),
                                      [](double g) { return std::isfinite(g); });
      if (!finite)
        throw DivergenceError(detail::concat("non-finite loss or gradient at local step ", step),
                              step);
      prox_step(cur.values, lg.grad, global.values, hp.eta, mu);
    }
  }

  ClientUpdate up;
  up.client_id = client.client_id;
  const std::size_t probe = std::min(hp.probe_size, shard.size());
  std::vector<std::size_t> probe_idx(probe);
  std::iota(probe_idx.begin(), probe_idx.end(), std::size_t{0});
  up.activation = activation_vector(cur, shard.features.select_rows(probe_idx),
                                    hp.activation_layer);
  up.train_loss = mean_loss(cur, Batch{shard.features, shard.labels});
  if (!std::isfinite(up.train_loss))
    throw DivergenceError(detail::concat("non-finite training loss after local step ", step),
                          step);
  up.sample_count = shard.size();
  up.params = std::move(cur);
  return up;
}

// r distinct ids from [0, n), uniformly without replacement (partial
// Fisher-Yates).
inline std::vector<std::size_t> sample_uniform(std::size_t n, std::size_t r, Rng& rng) {
  detail::require(r <= n, "sample_uniform: r=", r, " exceeds n=", n);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, n - 1)(rng);
    std::swap(ids[i], ids[j]);
  }
  ids.resize(r);
  return ids;
}

// The r candidates with the highest losses; equal losses prefer lower ids.
inline std::vector<std::size_t> top_by_loss(std::span<const std::size_t> candidates,
                                            std::span<const double> losses, std::size_t r) {
  detail::require(candidates.size() == losses.size(), "top_by_loss: ", candidates.size(),
                  " candidates but ", losses.size(), " losses");
  detail::require(r <= candidates.size(), "top_by_loss: r=", r, " exceeds d=",
                  candidates.size());
  std::vector<std::size_t> pos(candidates.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return candidates[a] < candidates[b];
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r; ++i) out.push_back(candidates[pos[i]]);
  return out;
}

// Power-of-choice selection: d uniform candidates, keep the r with the
// highest loss. `losses` is indexed by client id.
inline std::vector<std::size_t> sample_powd(std::size_t n, std::size_t d, std::size_t r,
                                            std::span<const double> losses, Rng& rng) {
  detail::require(r <= d, "sample_powd: r=", r, " exceeds d=", d);
  detail::require(d <= n, "sample_powd: d=", d, " exceeds n=", n);
  detail::require(losses.size() == n, "sample_powd: need ", n, " losses, got ", losses.size());
  const auto cand = sample_uniform(n, d, rng);
  std::vector<double> cl;
  for (std::size_t c : cand) cl.push_back(losses[c]);
  return top_by_loss(cand, cl, r);
}

// w = sum_i weights[i] * updates[i].params
inline ModelParams aggregate(std::span<const ClientUpdate> updates,
                             std::span<const double> weights) {
  detail::require(!updates.empty(), "aggregate: no updates");
  detail::require(updates.size() == weights.size(), "aggregate: ", updates.size(),
                  " updates but ", weights.size(), " weights");
  double sum = 0.0;
  for (double w : weights) {
    detail::require(w >= 0.0 && std::isfinite(w), "aggregate: invalid weight ", w);
    sum += w;
  }
  detail::require(std::abs(sum - 1.0) <= 1e-9, "aggregate: weights sum to ", sum, ", not 1");
  ModelParams out{updates.front().params.layer_sizes,
                  std::vector<double>(updates.front().params.total_dim(), 0.0)};
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const auto& v = updates[i].params.values;
    detail::require(v.size() == out.values.size(), "aggregate: update ", i,
                    " has mismatched dimension");
    for (std::size_t j = 0; j < v.size(); ++j) out.values[j] += weights[i] * v[j];
  }
  return out;
}

// Everything the server needs that does not change across rounds.
struct FederationData {
  std::vector<ClientDataset> clients;
  std::vector<Dataset> client_tests;  // indexed by client id
  Dataset global_test;
};

struct ServerState {
  ModelParams global;
  std::size_t round = 0;  // index k of the next round to run
};

struct RoundOptions {
  bool evaluate = true;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  NmiNorm nmi_norm = NmiNorm::geometric;
};

struct RoundResult {
  ServerState state;
  RoundRecord record;
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
// exception by index order is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline std::vector<double> baseline_weights(std::span<const ClientUpdate> updates,
                                            BaselineWeighting mode) {
  std::vector<double> w(updates.size());
  if (mode == BaselineWeighting::uniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(updates.size()));
    return w;
  }
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.sample_count);
  for (std::size_t i = 0; i < updates.size(); ++i)
    w[i] = static_cast<double>(updates[i].sample_count) / total;
  return w;
}

// One communication round: sample the cohort, broadcast, train locally,
// weigh, aggregate, and (optionally) evaluate the new global model.
inline RoundResult run_round(const ServerState& state, const FederationData& data,
                             const HyperParams& hp, const RoundOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.clients.size();
  hp.validate(n);
  const std::size_t k = state.round;

  RoundRecord rec;
  rec.round = k + 1;
  rec.algo = to_string(hp.algorithm);
  rec.seed = opts.seed;

  Rng sampler = make_rng(opts.seed, {stream::kSampling, k});
  if (hp.algorithm == Algorithm::fedprox_powd) {
    const auto cand = sample_uniform(n, hp.candidates(n), sampler);
    std::vector<double> losses(cand.size());
    detail::parallel_for(cand.size(), opts.threads, [&](std::size_t i) {
      const auto& shard = data.clients[cand[i]].shard;
      losses[i] = mean_loss(state.global, Batch{shard.features, shard.labels});
    });
    rec.cohort = top_by_loss(cand, losses, hp.cohort_size);
  } else {
    rec.cohort = sample_uniform(n, hp.cohort_size, sampler);
  }

  std::vector<ClientUpdate> updates(rec.cohort.size());
  detail::parallel_for(rec.cohort.size(), opts.threads, [&](std::size_t i) {
    const std::size_t id = rec.cohort[i];
    Rng rng = make_rng(opts.seed, {stream::kClient, k, id});
    try {
      updates[i] = local_update(data.clients[id], state.global, hp, rng);
    } catch (const DivergenceError& e) {
      throw DivergenceError(detail::concat("round ", k + 1, ", client ", id, ": ", e.what()),
                            e.step());
    }
  });

  for (const auto& u : updates) {
    rec.train_losses.push_back(u.train_loss);
    rec.true_clusters.push_back(data.clients[u.client_id].true_cluster);
  }

  if (hp.algorithm == Algorithm::equitable) {
    ActivationMatrix am{Matrix(updates.size(), updates.front().activation.size()), rec.cohort};
    for (std::size_t i = 0; i < updates.size(); ++i)
      std::copy(updates[i].activation.begin(), updates[i].activation.end(),
                am.rows.row(i).begin());
    Rng crng = make_rng(opts.seed, {stream::kClustering, k});
    const ClusterAssignment ca =
        cluster_and_weigh(am, hp.num_clusters, crng, hp.cosine_similarity,
                          KMeansOptions{hp.kmeans_restarts, 100});
    rec.weights = ca.weights;
    rec.cluster_labels = ca.labels;
    rec.nmi = nmi(rec.cluster_labels, rec.true_clusters, opts.nmi_norm);
  } else {
    rec.weights = baseline_weights(updates, hp.baseline_weighting);
  }

  RoundResult out{{aggregate(updates, rec.weights), k + 1}, std::move(rec)};

  if (opts.evaluate) {
    RoundRecord& r = out.record;
    std::vector<const Dataset*> shards;
    for (std::size_t id : r.cohort) shards.push_back(&data.client_tests[id]);
    const Evaluation ev =
        evaluate(out.state.global, std::span<const Dataset* const>(shards), data.global_test);
    r.evaluated = true;
    r.client_test_losses = ev.client_losses;
    r.client_test_accs = ev.client_accs;
    r.global_acc = ev.global_acc;
    r.mean_client_loss =
        std::accumulate(ev.client_losses.begin(), ev.client_losses.end(), 0.0) /
        static_cast<double>(ev.client_losses.size());
    r.cd = ev.client_losses.size() >= 2 ? client_disagreement(ev.client_losses) : 0.0;
    r.sigma_acc = sigma_acc(ev.client_accs, ev.global_acc);
  }
  out.record.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace efl
