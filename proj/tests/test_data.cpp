#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <vector>

#include "test_support.hpp"

namespace efl {
namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                      std::vector<unsigned char> pixels,
                                      std::uint32_t magic = 0x00000803) {
  std::vector<unsigned char> b;
  put_be32(b, magic);
  put_be32(b, count);
  put_be32(b, rows);
  put_be32(b, cols);
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<unsigned char> idx_labels(std::vector<unsigned char> labels,
                                      std::uint32_t magic = 0x00000801) {
  std::vector<unsigned char> b;
  put_be32(b, magic);
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

// ---- generate_synthetic ---------------------------------------------------------

TEST(Synthetic, CountsAndLabels) {
  Rng rng(1);
  const auto ds = generate_synthetic(2, 3, 5, 1.0, 0.5, rng);
  EXPECT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.labels, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
  EXPECT_EQ(ds.num_classes, 2u);
}

TEST(Synthetic, WideSeparationIsNearestCentroidSeparable) {
  Rng rng(2);
  const auto ds = generate_synthetic(5, 6, 40, 100.0, 0.1, rng);
  Matrix centroids(5, 6);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < 6; ++j) centroids(ds.labels[i], j) += ds.features(i, j) / 40.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(static_cast<int>(detail::nearest_centroid(ds.features.row(i), centroids)),
              ds.labels[i]);
}

TEST(Synthetic, DeterministicPerSeed) {
  Rng a(3), b(3), c(4);
  const auto da = generate_synthetic(3, 4, 10, 2.0, 1.0, a);
  const auto db = generate_synthetic(3, 4, 10, 2.0, 1.0, b);
  const auto dc = generate_synthetic(3, 4, 10, 2.0, 1.0, c);
  EXPECT_EQ(da.features, db.features);
  EXPECT_NE(da.features, dc.features);
}

TEST(Synthetic, ClassDirectionsOrthonormalWhenTheyFit) {
  const Matrix u = class_directions(4, 6);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_NEAR(dot(u.row(i), u.row(j)), i == j ? 1.0 : 0.0, 1e-12);
}

TEST(Synthetic, RejectsNonPositiveNoise) {
  Rng rng(1);
  EXPECT_THROW(generate_synthetic(2, 2, 2, 1.0, 0.0, rng), ContractViolation);
}

// ---- load_idx -------------------------------------------------------------------

TEST(LoadIdx, ParsesHandCraftedFiles) {
  const auto dir = testing::temp_dir("idx_ok");
  write_bytes(dir / "img", idx_images(1, 2, 2, {0, 255, 128, 0}));
  write_bytes(dir / "lab", idx_labels({7}));
  const auto ds = load_idx(dir / "img", dir / "lab");
  ASSERT_EQ(ds.size(), 1u);
  ASSERT_EQ(ds.dim(), 4u);
  EXPECT_EQ(ds.features(0, 0), 0.0);
  EXPECT_EQ(ds.features(0, 1), 1.0);
  EXPECT_EQ(ds.features(0, 2), 128.0 / 255.0);
  EXPECT_EQ(ds.features(0, 3), 0.0);
  EXPECT_EQ(ds.labels, std::vector<int>{7});
  EXPECT_EQ(ds.num_classes, 8u);
}

TEST(LoadIdx, CountMismatch) {
  const auto dir = testing::temp_dir("idx_count");
  write_bytes(dir / "img", idx_images(2, 1, 1, {1, 2}));
  write_bytes(dir / "lab", idx_labels({0, 1, 2}));
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), FormatError);
}

TEST(LoadIdx, WrongMagicIsNamed) {
  const auto dir = testing::temp_dir("idx_magic");
  write_bytes(dir / "img", idx_images(1, 1, 1, {1}, 0x00000801));
  write_bytes(dir / "lab", idx_labels({0}));
  try {
    load_idx(dir / "img", dir / "lab");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("0x00000801"), std::string::npos) << e.what();
  }
}

TEST(LoadIdx, TruncatedPayload) {
  const auto dir = testing::temp_dir("idx_trunc");
  write_bytes(dir / "img", idx_images(2, 2, 2, {1, 2, 3, 4, 5}));
  write_bytes(dir / "lab", idx_labels({0, 1}));
  EXPECT_THROW(load_idx(dir / "img", dir / "lab"), IoError);
  write_bytes(dir / "short", {0, 0, 8});
  EXPECT_THROW(load_idx(dir / "short", dir / "lab"), IoError);
}

TEST(LoadIdx, MissingFile) {
  EXPECT_THROW(load_idx("/nonexistent/a", "/nonexistent/b"), IoError);
}

// ---- partition_planted ------------------------------------------------------------

Dataset labelled_pool(std::size_t classes, std::size_t per_class) {
  Rng rng(99);
  return generate_synthetic(classes, 3, per_class, 1.0, 1.0, rng);
}

TEST(Partition, PaperShapeSizes) {
  const auto pool = labelled_pool(10, 4800);
  PartitionSpec spec{{{4, {0, 1, 2, 3}, 800}, {6, {4, 5, 6, 7, 8, 9}, 800}}};
  Rng rng(1);
  const auto clients = partition_planted(pool, spec, rng);
  ASSERT_EQ(clients.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(clients[i].client_id, i);
    EXPECT_EQ(clients[i].sample_count(), i < 4 ? 3200u : 4800u);
    EXPECT_EQ(clients[i].true_cluster, i < 4 ? 0u : 1u);
  }
}

TEST(Partition, SingleClientGetsWholeLabel) {
  const auto pool = labelled_pool(3, 7);
  PartitionSpec spec{{{1, {1}, 7}}};
  Rng rng(2);
  const auto clients = partition_planted(pool, spec, rng);
  std::vector<std::size_t> got = clients[0].source_indices;
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::size_t>{7, 8, 9, 10, 11, 12, 13}));
}

TEST(Partition, DisjointPureAndCounted) {
  const auto pool = labelled_pool(6, 50);
  PartitionSpec spec{{{3, {0, 1}, 10}, {2, {2, 3, 4}, 12}, {1, {5}, 50}}};
  Rng rng(3);
  const auto clients = partition_planted(pool, spec, rng);
  // brute-force pairwise index intersection
  for (std::size_t a = 0; a < clients.size(); ++a)
    for (std::size_t b = a + 1; b < clients.size(); ++b)
      for (std::size_t i : clients[a].source_indices)
        for (std::size_t j : clients[b].source_indices) EXPECT_NE(i, j);
  std::vector<std::size_t> per_cluster(3, 0);
  for (const auto& c : clients) {
    const auto& ls = spec.clusters[c.true_cluster].label_set;
    std::map<int, std::size_t> counts;
    for (int y : c.shard.labels) {
      EXPECT_NE(std::find(ls.begin(), ls.end(), y), ls.end());
      ++counts[y];
    }
    for (int l : ls) EXPECT_EQ(counts[l], spec.clusters[c.true_cluster].samples_per_label_per_client);
    per_cluster[c.true_cluster] += c.sample_count();
    for (std::size_t r = 0; r < c.sample_count(); ++r)
      EXPECT_EQ(c.shard.labels[r], pool.labels[c.source_indices[r]]);
  }
  EXPECT_EQ(per_cluster[0], 3u * 2 * 10);
  EXPECT_EQ(per_cluster[1], 2u * 3 * 12);
  EXPECT_EQ(per_cluster[2], 1u * 1 * 50);
}

TEST(Partition, DeterministicPerSeed) {
  const auto pool = labelled_pool(4, 30);
  PartitionSpec spec{{{2, {0, 1}, 10}, {2, {2, 3}, 10}}};
  Rng a(5), b(5);
  const auto ca = partition_planted(pool, spec, a), cb = partition_planted(pool, spec, b);
  for (std::size_t i = 0; i < ca.size(); ++i)
    EXPECT_EQ(ca[i].source_indices, cb[i].source_indices);
}

TEST(Partition, CapacityErrorNamesLabelAndShortfall) {
  const auto pool = labelled_pool(2, 10);
  PartitionSpec spec{{{3, {1}, 4}}};
  Rng rng(1);
  try {
    partition_planted(pool, spec, rng);
    FAIL();
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.label(), 1);
    EXPECT_EQ(e.shortfall(), 2u);
  }
}

TEST(Partition, RejectsOverlappingLabelSets) {
  const auto pool = labelled_pool(3, 10);
  PartitionSpec spec{{{1, {0, 1}, 2}, {1, {1, 2}, 2}}};
  Rng rng(1);
  EXPECT_THROW(partition_planted(pool, spec, rng), ContractViolation);
}

}  // namespace
}  // namespace efl
