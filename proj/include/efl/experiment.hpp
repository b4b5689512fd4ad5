#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "efl/data.hpp"
#include "efl/error.hpp"
#include "efl/federation.hpp"
#include "efl/metrics.hpp"
#include "efl/model.hpp"
#include "efl/rng.hpp"

namespace efl {

enum class DatasetKind { synthetic, idx };

struct SyntheticParams {
  std::size_t num_classes = 10;
  std::size_t dim = 20;
  std::size_t train_per_class = 1000;
  std::size_t test_per_class = 500;
  double separation = 3.0;
  double noise = 1.0;
};

struct IdxPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
};

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::synthetic;
  SyntheticParams synthetic;
  IdxPaths idx;
  PartitionSpec partition;
  std::size_t test_per_label = 50;  // per client, per label of its cluster
  std::vector<std::size_t> hidden = {32};
  HyperParams hp;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::size_t eval_every = 1;
  std::size_t threads = 1;
  NmiNorm nmi_norm = NmiNorm::geometric;
};

struct RunSummary {
  std::vector<RoundRecord> records;
  double initial_accuracy = 0.0;
  double final_accuracy = 0.0;
  double mean_cd_final = 0.0;         // over the final 20% of records
  double mean_sigma_acc_final = 0.0;  // same window
  std::optional<double> mean_nmi;
  std::string config_echo;
  double total_runtime = 0.0;
  std::filesystem::path csv_path;
};

// ---------------------------------------------------------------------------
// Config file: one `key = value` per line, `#` starts a comment. `cluster`
// may repeat; its value is `clients : labels : samples_per_label`, labels a
// comma list where `a-b` expands to an inclusive range.

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == v.size() && !v.empty(), key, ": expected a non-negative integer, got '", v, "'");
  return x;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == v.size() && !v.empty(), key, ": expected a number, got '", v, "'");
  return x;
}

inline std::vector<int> parse_labels(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& tok : split(v, ',')) {
    const auto dash = tok.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(static_cast<int>(parse_u64(key, tok)));
    } else {
      const auto lo = parse_u64(key, trim(tok.substr(0, dash)));
      const auto hi = parse_u64(key, trim(tok.substr(dash + 1)));
      require(lo <= hi, key, ": empty label range '", tok, "'");
      for (auto l = lo; l <= hi; ++l) out.push_back(static_cast<int>(l));
    }
  }
  return out;
}

inline std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string join_counts(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace detail

inline void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  auto& hp = c.hp;
  if (key == "dataset") {
    if (v == "synthetic") c.dataset = DatasetKind::synthetic;
    else if (v == "idx") c.dataset = DatasetKind::idx;
    else require(false, "dataset: expected synthetic|idx, got '", v, "'");
  } else if (key == "num_classes") c.synthetic.num_classes = parse_count(key, v);
  else if (key == "dim") c.synthetic.dim = parse_count(key, v);
  else if (key == "train_per_class") c.synthetic.train_per_class = parse_count(key, v);
  else if (key == "test_per_class") c.synthetic.test_per_class = parse_count(key, v);
  else if (key == "separation") c.synthetic.separation = parse_double(key, v);
  else if (key == "noise") c.synthetic.noise = parse_double(key, v);
  else if (key == "train_images") c.idx.train_images = v;
  else if (key == "train_labels") c.idx.train_labels = v;
  else if (key == "test_images") c.idx.test_images = v;
  else if (key == "test_labels") c.idx.test_labels = v;
  else if (key == "cluster") {
    const auto parts = split(v, ':');
    require(parts.size() == 3, "cluster: expected 'clients : labels : per_label', got '", v, "'");
    c.partition.clusters.push_back(
        {parse_count(key, parts[0]), parse_labels(key, parts[1]), parse_count(key, parts[2])});
  } else if (key == "test_per_label") c.test_per_label = parse_count(key, v);
  else if (key == "hidden") {
    c.hidden.clear();
    if (!v.empty() && v != "none")
      for (const auto& t : split(v, ',')) c.hidden.push_back(parse_count(key, t));
  } else if (key == "algorithm") hp.algorithm = parse_algorithm(v);
  else if (key == "eta") hp.eta = parse_double(key, v);
  else if (key == "mu") hp.mu = parse_double(key, v);
  else if (key == "local_epochs") hp.local_epochs = parse_count(key, v);
  else if (key == "batch_size") hp.batch_size = parse_count(key, v);
  else if (key == "rounds") hp.rounds = parse_count(key, v);
  else if (key == "cohort_size") hp.cohort_size = parse_count(key, v);
  else if (key == "num_clusters") hp.num_clusters = parse_count(key, v);
  else if (key == "powd_candidates") hp.powd_candidates = parse_count(key, v);
  else if (key == "probe_size") hp.probe_size = parse_count(key, v);
  else if (key == "kmeans_restarts") hp.kmeans_restarts = parse_count(key, v);
  else if (key == "activation_layer") {
    if (v == "penultimate") hp.activation_layer = ActivationLayer::penultimate;
    else if (v == "final") hp.activation_layer = ActivationLayer::final;
    else require(false, "activation_layer: expected penultimate|final, got '", v, "'");
  } else if (key == "similarity") {
    if (v == "raw") hp.cosine_similarity = false;
    else if (v == "cosine") hp.cosine_similarity = true;
    else require(false, "similarity: expected raw|cosine, got '", v, "'");
  } else if (key == "baseline_weighting") {
    if (v == "samples") hp.baseline_weighting = BaselineWeighting::samples;
    else if (v == "uniform") hp.baseline_weighting = BaselineWeighting::uniform;
    else require(false, "baseline_weighting: expected samples|uniform, got '", v, "'");
  } else if (key == "nmi_norm") {
    if (v == "geometric") c.nmi_norm = NmiNorm::geometric;
    else if (v == "arithmetic") c.nmi_norm = NmiNorm::arithmetic;
    else require(false, "nmi_norm: expected geometric|arithmetic, got '", v, "'");
  } else if (key == "seed") c.seed = parse_u64(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else if (key == "eval_every") c.eval_every = parse_count(key, v);
  else if (key == "threads") c.threads = parse_count(key, v);
  else require(false, "unknown config key '", key, "'");
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  c.partition.clusters.clear();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    detail::require(eq != std::string::npos, "config line ", lineno, ": expected key = value");
    apply_config_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(detail::concat("cannot open config ", path.string()));
  return parse_config(in);
}

// Flat text form accepted by parse_config.
inline std::string config_to_text(const ExperimentConfig& c) {
  using detail::format_g9;
  std::ostringstream o;
  const auto& hp = c.hp;
  if (c.dataset == DatasetKind::synthetic) {
    o << "dataset = synthetic\n"
      << "num_classes = " << c.synthetic.num_classes << "\n"
      << "dim = " << c.synthetic.dim << "\n"
      << "train_per_class = " << c.synthetic.train_per_class << "\n"
      << "test_per_class = " << c.synthetic.test_per_class << "\n"
      << "separation = " << format_g9(c.synthetic.separation) << "\n"
      << "noise = " << format_g9(c.synthetic.noise) << "\n";
  } else {
    o << "dataset = idx\n"
      << "train_images = " << c.idx.train_images.string() << "\n"
      << "train_labels = " << c.idx.train_labels.string() << "\n"
      << "test_images = " << c.idx.test_images.string() << "\n"
      << "test_labels = " << c.idx.test_labels.string() << "\n";
  }
  for (const auto& cl : c.partition.clusters) {
    o << "cluster = " << cl.client_count << " : ";
    for (std::size_t i = 0; i < cl.label_set.size(); ++i) o << (i ? "," : "") << cl.label_set[i];
    o << " : " << cl.samples_per_label_per_client << "\n";
  }
  o << "test_per_label = " << c.test_per_label << "\n"
    << "hidden = " << (c.hidden.empty() ? "none" : detail::join_counts(c.hidden)) << "\n"
    << "algorithm = " << to_string(hp.algorithm) << "\n"
    << "eta = " << format_g9(hp.eta) << "\n"
    << "mu = " << format_g9(hp.mu) << "\n"
    << "local_epochs = " << hp.local_epochs << "\n"
    << "batch_size = " << hp.batch_size << "\n"
    << "rounds = " << hp.rounds << "\n"
    << "cohort_size = " << hp.cohort_size << "\n"
    << "num_clusters = " << hp.num_clusters << "\n"
    << "powd_candidates = " << hp.powd_candidates << "\n"
    << "probe_size = " << hp.probe_size << "\n"
    << "kmeans_restarts = " << hp.kmeans_restarts << "\n"
    << "activation_layer = "
    << (hp.activation_layer == ActivationLayer::penultimate ? "penultimate" : "final") << "\n"
    << "similarity = " << (hp.cosine_similarity ? "cosine" : "raw") << "\n"
    << "baseline_weighting = "
    << (hp.baseline_weighting == BaselineWeighting::samples ? "samples" : "uniform") << "\n"
    << "nmi_norm = " << (c.nmi_norm == NmiNorm::geometric ? "geometric" : "arithmetic") << "\n"
    << "seed = " << c.seed << "\n"
    << "output_dir = " << c.output_dir.string() << "\n"
    << "eval_every = " << c.eval_every << "\n"
    << "threads = " << c.threads << "\n";
  return o.str();
}

// Checks everything that can be checked before touching data.
inline void validate_config(const ExperimentConfig& c) {
  validate_partition_spec(c.partition);
  c.hp.validate(c.partition.total_clients());
  detail::require(c.eval_every >= 1, "eval_every: must be >= 1");
  detail::require(c.test_per_label >= 1, "test_per_label: must be >= 1");
  for (std::size_t h : c.hidden) detail::require(h >= 1, "hidden: layer width must be >= 1");
  if (c.dataset == DatasetKind::synthetic) {
    const auto& s = c.synthetic;
    detail::require(s.num_classes >= 1, "num_classes: must be >= 1");
    detail::require(s.dim >= 1, "dim: must be >= 1");
    detail::require(s.train_per_class >= 1, "train_per_class: must be >= 1");
    detail::require(s.test_per_class >= 1, "test_per_class: must be >= 1");
    detail::require(std::isfinite(s.noise) && s.noise > 0.0, "noise: must be > 0");
    detail::require(std::isfinite(s.separation), "separation: must be finite");
    for (const auto& cl : c.partition.clusters)
      for (int l : cl.label_set)
        detail::require(l >= 0 && static_cast<std::size_t>(l) < s.num_classes, "cluster: label ",
                        l, " outside [0, num_classes=", s.num_classes, ")");
  } else {
    for (const auto* p : {&c.idx.train_images, &c.idx.train_labels, &c.idx.test_images,
                          &c.idx.test_labels}) {
      detail::require(!p->empty(), "idx paths: all four of train_images, train_labels, "
                                   "test_images, test_labels are required");
      detail::require(std::filesystem::exists(*p), "idx paths: ", p->string(),
                      " does not exist");
    }
  }
}

struct Federation {
  FederationData data;
  std::vector<std::size_t> layer_sizes;
};

// Builds pools, planted partitions and per-client test shards. Depends only
// on the data-related config and the seed, never on the algorithm.
inline Federation build_federation(const ExperimentConfig& c) {
  Dataset train, test;
  if (c.dataset == DatasetKind::synthetic) {
    const auto& s = c.synthetic;
    Rng train_rng = make_rng(c.seed, {stream::kTrainData});
    Rng test_rng = make_rng(c.seed, {stream::kTestData});
    train = generate_synthetic(s.num_classes, s.dim, s.train_per_class, s.separation, s.noise,
                               train_rng);
    test = generate_synthetic(s.num_classes, s.dim, s.test_per_class, s.separation, s.noise,
                              test_rng);
  } else {
    train = load_idx(c.idx.train_images, c.idx.train_labels);
    test = load_idx(c.idx.test_images, c.idx.test_labels);
    detail::require(train.dim() == test.dim(), "idx: train dim ", train.dim(), " != test dim ",
                    test.dim());
    const std::size_t classes = std::max(train.num_classes, test.num_classes);
    train.num_classes = test.num_classes = classes;
  }

  PartitionSpec test_spec = c.partition;
  for (auto& cl : test_spec.clusters) cl.samples_per_label_per_client = c.test_per_label;

  Federation f;
  Rng part_rng = make_rng(c.seed, {stream::kTrainPartition});
  Rng test_part_rng = make_rng(c.seed, {stream::kTestPartition});
  f.data.clients = partition_planted(train, c.partition, part_rng);
  for (auto& t : partition_planted(test, test_spec, test_part_rng))
    f.data.client_tests.push_back(std::move(t.shard));
  f.data.global_test = std::move(test);
  f.layer_sizes.push_back(train.dim());
  f.layer_sizes.insert(f.layer_sizes.end(), c.hidden.begin(), c.hidden.end());
  f.layer_sizes.push_back(train.num_classes);
  return f;
}

// ---------------------------------------------------------------------------
// Record export.

inline constexpr const char* kRecordsHeader =
    "round,algo,global_acc,mean_client_loss,cd,sigma_acc,nmi,seed";

inline std::string record_csv_row(const RoundRecord& r) {
  using detail::format_g9;
  std::string s = std::to_string(r.round) + "," + r.algo + "," + format_g9(r.global_acc) + "," +
                  format_g9(r.mean_client_loss) + "," + format_g9(r.cd) + "," +
                  format_g9(r.sigma_acc) + "," + (r.nmi ? format_g9(*r.nmi) : std::string()) +
                  "," + std::to_string(r.seed);
  return s;
}

inline nlohmann::json record_to_json(const RoundRecord& r) {
  nlohmann::json j;
  j["round"] = r.round;
  j["algo"] = r.algo;
  j["seed"] = r.seed;
  j["cohort"] = r.cohort;
  j["true_clusters"] = r.true_clusters;
  j["weights"] = r.weights;
  j["train_losses"] = r.train_losses;
  if (!r.cluster_labels.empty()) j["cluster_labels"] = r.cluster_labels;
  j["nmi"] = r.nmi ? nlohmann::json(*r.nmi) : nlohmann::json(nullptr);
  j["client_test_losses"] = r.client_test_losses;
  j["client_test_accs"] = r.client_test_accs;
  j["global_acc"] = r.global_acc;
  j["mean_client_loss"] = r.mean_client_loss;
  j["cd"] = r.cd;
  j["sigma_acc"] = r.sigma_acc;
  j["wall_time"] = r.wall_time;
  return j;
}

inline std::filesystem::path json_companion(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  return p.replace_extension(".json");
}

// Writes `path` (CSV, one row per record) and the per-client detail to the
// companion `.json` next to it.
inline void write_records(const std::vector<RoundRecord>& records,
                          const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec)
      throw IoError(detail::concat("cannot create ", path.parent_path().string(), ": ",
                                   ec.message()));
  }
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(detail::concat("cannot write ", path.string()));
    out << kRecordsHeader << "\n";
    for (const auto& r : records) out << record_csv_row(r) << "\n";
    if (!out) throw IoError(detail::concat("write failed: ", path.string()));
  }
  const auto jpath = json_companion(path);
  std::ofstream jout(jpath, std::ios::binary | std::ios::trunc);
  if (!jout) throw IoError(detail::concat("cannot write ", jpath.string()));
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records) j.push_back(record_to_json(r));
  jout << nlohmann::json{{"records", j}}.dump(2) << "\n";
  if (!jout) throw IoError(detail::concat("write failed: ", jpath.string()));
}

struct CsvRecord {
  std::size_t round = 0;
  std::string algo;
  double global_acc = 0.0;
  double mean_client_loss = 0.0;
  double cd = 0.0;
  double sigma_acc = 0.0;
  std::optional<double> nmi;
  std::uint64_t seed = 0;
};

inline std::vector<CsvRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(detail::concat("cannot open ", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader)
    throw FormatError(detail::concat(path.string(), ": unexpected header"));
  std::vector<CsvRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 8)
      throw FormatError(detail::concat(path.string(), ":", lineno, ": expected 8 fields, got ",
                                       f.size()));
    try {
      CsvRecord r;
      r.round = detail::parse_count("round", f[0]);
      r.algo = f[1];
      r.global_acc = detail::parse_double("global_acc", f[2]);
      r.mean_client_loss = detail::parse_double("mean_client_loss", f[3]);
      r.cd = detail::parse_double("cd", f[4]);
      r.sigma_acc = detail::parse_double("sigma_acc", f[5]);
      if (!f[6].empty()) r.nmi = detail::parse_double("nmi", f[6]);
      r.seed = detail::parse_u64("seed", f[7]);
      out.push_back(std::move(r));
    } catch (const ContractViolation& e) {
      throw FormatError(detail::concat(path.string(), ":", lineno, ": ", e.what()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runner.

inline std::string run_stem(const ExperimentConfig& c) {
  return to_string(c.hp.algorithm) + "_seed" + std::to_string(c.seed);
}

inline void summarize(RunSummary& s) {
  const auto& recs = s.records;
  s.final_accuracy = recs.empty() ? s.initial_accuracy : recs.back().global_acc;
  if (!recs.empty()) {
    const std::size_t window = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(recs.size()))));
    double cd = 0.0, sa = 0.0;
    for (std::size_t i = recs.size() - window; i < recs.size(); ++i) {
      cd += recs[i].cd;
      sa += recs[i].sigma_acc;
    }
    s.mean_cd_final = cd / static_cast<double>(window);
    s.mean_sigma_acc_final = sa / static_cast<double>(window);
  }
  double nmi_sum = 0.0;
  std::size_t nmi_count = 0;
  for (const auto& r : recs)
    if (r.nmi) {
      nmi_sum += *r.nmi;
      ++nmi_count;
    }
  if (nmi_count) s.mean_nmi = nmi_sum / static_cast<double>(nmi_count);
}

inline void write_summary_json(const RunSummary& s, const std::filesystem::path& path) {
  nlohmann::json j;
  j["records"] = s.records.size();
  j["initial_accuracy"] = s.initial_accuracy;
  j["final_accuracy"] = s.final_accuracy;
  j["mean_cd_final"] = s.mean_cd_final;
  j["mean_sigma_acc_final"] = s.mean_sigma_acc_final;
  j["mean_nmi"] = s.mean_nmi ? nlohmann::json(*s.mean_nmi) : nlohmann::json(nullptr);
  j["total_runtime"] = s.total_runtime;
  j["config"] = s.config_echo;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(detail::concat("cannot write ", path.string()));
  out << j.dump(2) << "\n";
}

using RoundCallback = std::function<void(const RoundRecord&)>;

// Runs K rounds from a freshly built federation. Records are kept for every
// eval_every-th round and for the last round. Outputs go to output_dir when
// it is set; a divergence flushes the records gathered so far before
// propagating.
inline RunSummary run_experiment(const ExperimentConfig& c, const RoundCallback& on_round = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_config(c);
  const Federation fed = build_federation(c);

  RunSummary s;
  s.config_echo = config_to_text(c);
  Rng init_rng = make_rng(c.seed, {stream::kInit});
  ServerState state{init_mlp(fed.layer_sizes, init_rng), 0};
  s.initial_accuracy = score(state.global, fed.data.global_test).accuracy;

  const bool write = !c.output_dir.empty();
  if (write) s.csv_path = c.output_dir / (run_stem(c) + ".csv");

  const std::size_t rounds = c.hp.rounds;
  try {
    for (std::size_t k = 0; k < rounds; ++k) {
      RoundOptions opts;
      opts.evaluate = (k + 1) % c.eval_every == 0 || k + 1 == rounds;
      opts.threads = c.threads;
      opts.seed = c.seed;
      opts.nmi_norm = c.nmi_norm;
      RoundResult res = run_round(state, fed.data, c.hp, opts);
      state = std::move(res.state);
      if (res.record.evaluated) {
        if (on_round) on_round(res.record);
        s.records.push_back(std::move(res.record));
      }
    }
  } catch (const DivergenceError&) {
    if (write) write_records(s.records, s.csv_path);
    throw;
  }

  summarize(s);
  s.total_runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (write) {
    write_records(s.records, s.csv_path);
    write_summary_json(s, c.output_dir / (run_stem(c) + ".summary.json"));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Multi-seed sweep.

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1); 0 for a single run
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct SweepRow {
  Algorithm algorithm = Algorithm::fedavg;
  std::size_t runs = 0;
  MeanStd final_acc, cd, sigma_acc;
  std::optional<MeanStd> nmi;
};

inline constexpr const char* kSweepHeader =
    "algo,runs,final_acc_mean,final_acc_std,cd_mean,cd_std,sigma_acc_mean,sigma_acc_std,"
    "nmi_mean,nmi_std";

// Runs every (algorithm, seed) pair. The data and partition for a seed are
// the same for every algorithm, so comparisons are paired.
inline std::vector<SweepRow> run_sweep(const ExperimentConfig& base,
                                       const std::vector<std::uint64_t>& seeds,
                                       const std::vector<Algorithm>& algorithms) {
  detail::require(!seeds.empty(), "sweep: no seeds");
  std::vector<SweepRow> rows;
  for (Algorithm a : algorithms) {
    std::vector<double> acc, cd, sa, nm;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig c = base;
      c.hp.algorithm = a;
      c.seed = seed;
      const RunSummary s = run_experiment(c);
      acc.push_back(s.final_accuracy);
      cd.push_back(s.mean_cd_final);
      sa.push_back(s.mean_sigma_acc_final);
      if (s.mean_nmi) nm.push_back(*s.mean_nmi);
    }
    SweepRow r{a, seeds.size(), mean_std(acc), mean_std(cd), mean_std(sa), std::nullopt};
    if (!nm.empty()) r.nmi = mean_std(nm);
    rows.push_back(r);
  }
  if (!base.output_dir.empty()) {
    const auto path = base.output_dir / "sweep_summary.csv";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(detail::concat("cannot write ", path.string()));
    using detail::format_g9;
    out << kSweepHeader << "\n";
    for (const auto& r : rows) {
      out << to_string(r.algorithm) << "," << r.runs << "," << format_g9(r.final_acc.mean) << ","
          << format_g9(r.final_acc.std) << "," << format_g9(r.cd.mean) << ","
          << format_g9(r.cd.std) << "," << format_g9(r.sigma_acc.mean) << ","
          << format_g9(r.sigma_acc.std) << ","
          << (r.nmi ? format_g9(r.nmi->mean) : std::string()) << ","
          << (r.nmi ? format_g9(r.nmi->std) : std::string()) << "\n";
    }
  }
  return rows;
}

}  // namespace efl
