#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "efl/error.hpp"
#include "efl/matrix.hpp"
#include "efl/rng.hpp"

namespace efl {

struct Dataset {
  Matrix features;          // samples x dim
  std::vector<int> labels;  // in [0, num_classes)
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out{features.select_rows(idx), {}, num_classes};
    out.labels.reserve(idx.size());
    for (std::size_t i : idx) out.labels.push_back(labels[i]);
    return out;
  }
};

struct ClusterSpec {
  std::size_t client_count = 0;
  std::vector<int> label_set;
  std::size_t samples_per_label_per_client = 0;
};

struct PartitionSpec {
  std::vector<ClusterSpec> clusters;

  std::size_t total_clients() const {
    std::size_t n = 0;
    for (const auto& c : clusters) n += c.client_count;
    return n;
  }
};

struct ClientDataset {
  std::size_t client_id = 0;
  Dataset shard;
  std::size_t true_cluster = 0;
  std::vector<std::size_t> source_indices;  // rows of the source pool, in shard order

  std::size_t sample_count() const noexcept { return shard.size(); }
};

// Class mean directions: unit vectors from a Gram-Schmidt pass over a fixed
// pseudo-random matrix. Orthonormal for the first min(num_classes, dim)
// classes; the remainder are normalized random directions. Independent of
// the data seed so train and test pools share class means.
inline Matrix class_directions(std::size_t num_classes, std::size_t dim) {
  Rng rng(derive_seed(0x5eedd1accULL, {num_classes, dim}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix u(num_classes, dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto row = u.row(c);
    for (;;) {
      for (double& v : row) v = normal(rng);
      if (c < dim) {
        for (std::size_t p = 0; p < c; ++p) {
          const double proj = dot(row, u.row(p));
          auto prev = u.row(p);
          for (std::size_t j = 0; j < dim; ++j) row[j] -= proj * prev[j];
        }
      }
      const double norm = std::sqrt(dot(row, row));
      if (norm > 1e-8) {
        for (double& v : row) v /= norm;
        break;
      }
    }
  }
  return u;
}

// Isotropic Gaussian classes centred at separation * u_c with std `noise`.
// Samples are ordered class by class.
inline Dataset generate_synthetic(std::size_t num_classes, std::size_t dim, std::size_t per_class,
                                  double separation, double noise, Rng& rng) {
  detail::require(num_classes >= 1 && dim >= 1 && per_class >= 1,
                  "generate_synthetic: counts must be >= 1");
  detail::require(noise > 0.0, "generate_synthetic: noise must be > 0, got ", noise);
  const Matrix dirs = class_directions(num_classes, dim);
  std::normal_distribution<double> normal(0.0, noise);
  Dataset ds{Matrix(num_classes * per_class, dim), {}, num_classes};
  ds.labels.reserve(num_classes * per_class);
  std::size_t r = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto mean = dirs.row(c);
    for (std::size_t k = 0; k < per_class; ++k, ++r) {
      auto row = ds.features.row(r);
      for (std::size_t j = 0; j < dim; ++j) row[j] = separation * mean[j] + normal(rng);
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

namespace detail {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(concat("cannot open ", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(concat("read failure on ", path.string()));
  return bytes;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                               const std::filesystem::path& path) {
  if (off + 4 > b.size())
    throw IoError(concat(path.string(), ": truncated header at byte ", off));
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream oss;
  oss << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return oss.str();
}

}  // namespace detail

// Reads an IDX image/label file pair (MNIST layout). Pixels are scaled to
// [0, 1]; num_classes is max(label) + 1.
inline Dataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != detail::kIdxImagesMagic)
    throw FormatError(detail::concat(images_path.string(), ": bad magic ",
                                     detail::hex32(img_magic), ", expected ",
                                     detail::hex32(detail::kIdxImagesMagic)));
  const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != detail::kIdxLabelsMagic)
    throw FormatError(detail::concat(labels_path.string(), ": bad magic ",
                                     detail::hex32(lab_magic), ", expected ",
                                     detail::hex32(detail::kIdxLabelsMagic)));

  const std::size_t count = detail::read_be32(img, 4, images_path);
  const std::size_t rows = detail::read_be32(img, 8, images_path);
  const std::size_t cols = detail::read_be32(img, 12, images_path);
  const std::size_t label_count = detail::read_be32(lab, 4, labels_path);
  if (count != label_count)
    throw FormatError(detail::concat("count mismatch: ", count, " images in ",
                                     images_path.string(), " but ", label_count, " labels in ",
                                     labels_path.string()));

  const std::size_t dim = rows * cols;
  if (img.size() < 16 + count * dim)
    throw IoError(detail::concat(images_path.string(), ": truncated, expected ",
                                 16 + count * dim, " bytes, found ", img.size()));
  if (lab.size() < 8 + count)
    throw IoError(detail::concat(labels_path.string(), ": truncated, expected ", 8 + count,
                                 " bytes, found ", lab.size()));

  Dataset ds{Matrix(count, dim), std::vector<int>(count), 0};
  for (std::size_t s = 0; s < count; ++s) {
    auto row = ds.features.row(s);
    for (std::size_t j = 0; j < dim; ++j) row[j] = img[16 + s * dim + j] / 255.0;
    ds.labels[s] = lab[8 + s];
  }
  int max_label = -1;
  for (int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

inline void validate_partition_spec(const PartitionSpec& spec) {
  detail::require(!spec.clusters.empty(), "partition: no clusters");
  std::set<int> seen;
  for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
    const auto& c = spec.clusters[q];
    detail::require(c.client_count >= 1, "partition: cluster ", q, " has no clients");
    detail::require(!c.label_set.empty(), "partition: cluster ", q, " has an empty label set");
    detail::require(c.samples_per_label_per_client >= 1, "partition: cluster ", q,
                    " has samples_per_label_per_client 0");
    for (int l : c.label_set)
      detail::require(seen.insert(l).second, "partition: label ", l,
                      " appears in more than one cluster");
  }
}

// Planted-cluster split: client ids are assigned cluster by cluster; every
// client of cluster q receives exactly samples_per_label_per_client samples
// of each label in q's label set, drawn without replacement. Each shard is
// shuffled so any prefix mixes its labels.
inline std::vector<ClientDataset> partition_planted(const Dataset& ds, const PartitionSpec& spec,
                                                    Rng& rng) {
  validate_partition_spec(spec);
  std::map<int, std::vector<std::size_t>> pools;
  for (std::size_t i = 0; i < ds.size(); ++i) pools[ds.labels[i]].push_back(i);

  for (const auto& c : spec.clusters) {
    for (int l : c.label_set) {
      const std::size_t need = c.client_count * c.samples_per_label_per_client;
      const std::size_t have = pools.count(l) ? pools[l].size() : 0;
      if (have < need)
        throw CapacityError(detail::concat("partition: label ", l, " needs ", need,
                                           " samples, pool has ", have, " (short by ",
                                           need - have, ")"),
                            l, need - have);
    }
  }

  // Shuffle each pool once, in ascending label order for determinism.
  for (auto& [label, pool] : pools) std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<ClientDataset> clients;
  clients.reserve(spec.total_clients());
  for (std::size_t q = 0; q < spec.clusters.size(); ++q) {
    const auto& c = spec.clusters[q];
    std::vector<std::size_t> cursor(c.label_set.size(), 0);
    for (std::size_t k = 0; k < c.client_count; ++k) {
      std::vector<std::size_t> idx;
      idx.reserve(c.label_set.size() * c.samples_per_label_per_client);
      for (std::size_t li = 0; li < c.label_set.size(); ++li) {
        const auto& pool = pools[c.label_set[li]];
        for (std::size_t s = 0; s < c.samples_per_label_per_client; ++s)
          idx.push_back(pool[cursor[li]++]);
      }
      std::shuffle(idx.begin(), idx.end(), rng);
      ClientDataset cd;
      cd.client_id = clients.size();
      cd.shard = ds.subset(idx);
      cd.true_cluster = q;
      cd.source_indices = std::move(idx);
      clients.push_back(std::move(cd));
    }
  }
  return clients;
}

}  // namespace efl
