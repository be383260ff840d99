#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gpc/types.hpp"

namespace gpc {

struct ClassPartition {
  std::vector<ClassId> old_classes;  // Y_l, sorted
  std::vector<ClassId> new_classes;  // sorted; may be unknown (empty) after loading
};

/// N instances of d features with partial labels. Rows of `x` are instances.
struct FeatureDataset {
  Matrix x;
  Labels labels;
  std::vector<std::int64_t> ids;
  ClassPartition partition;

  std::size_t size() const { return static_cast<std::size_t>(x.rows()); }
  Eigen::Index dim() const { return x.cols(); }
  std::vector<std::size_t> labelled_indices() const;
  std::vector<std::size_t> unlabelled_indices() const;
  /// Throws DimMismatch / Parse on broken invariants.
  void validate() const;
};

enum class FileFormat { Csv, Gpcf };

/// Format implied by the file extension (.csv or .gpcf).
FileFormat format_from_path(const std::string& path);

/// Ground-truth sidecar name: `<stem>.truth.<ext>`.
std::string truth_path(const std::string& path);

/// CSV: header `id,label,f0,...,f{d-1}`, empty label = unlabelled.
/// GPCF: "GPCF", u32 version 1, u64 N, u64 d, N*d float64 row-major, N int64
/// labels (-1 = unlabelled); all little-endian. GPCF ids are row indices.
/// The loaded partition lists the labelled classes as old classes.
FeatureDataset load_features(const std::string& path, FileFormat format);
FeatureDataset load_features(const std::string& path);
void save_features(const FeatureDataset& ds, const std::string& path, FileFormat format);
void save_features(const FeatureDataset& ds, const std::string& path);

/// In-memory GPCF encoding, as written by save_features.
std::string encode_gpcf(const FeatureDataset& ds);
FeatureDataset decode_gpcf(const std::string& bytes);

/// Keeps labels on floor(fraction * n_c) seeded-random instances of every old
/// class c; everything else becomes unlabelled. Features are untouched.
FeatureDataset make_split(const FeatureDataset& full, double labelled_fraction, std::uint64_t seed);

struct SynthSpec {
  std::size_t k_true = 10;
  std::size_t dim = 2;
  std::size_t per_class = 200;
  double center_scale = 100.0;  // centres uniform in [0, scale]^dim
  double sigma = 1.0;           // within-class standard deviation
  double min_separation = 10.0; // minimum centre distance in units of sigma
  std::size_t k_labelled = 6;
  double labelled_fraction = 0.5;
  std::size_t ambient_dim = 0;  // > dim embeds the data by a random orthonormal map
  double ambient_noise = 0.0;   // isotropic noise added in the ambient space
  std::uint64_t seed = 0;
};

struct SyntheticData {
  FeatureDataset dataset;      // labels split per make_split
  std::vector<ClassId> truth;  // ground truth for every instance
  Matrix centers;              // k_true x dim, before any ambient embedding
};

SyntheticData gen_synth(const SynthSpec& spec);

/// Keeps every labelled instance, and unlabelled instances only from the
/// first `overlap` old classes and from new classes. `truth` is indexed like
/// the rows of `split`.
FeatureDataset partial_overlap_split(const FeatureDataset& split, std::span<const ClassId> truth,
                                     std::size_t overlap);

/// Dataset whose labels are the given ground truth.
FeatureDataset with_truth(const FeatureDataset& ds, std::span<const ClassId> truth);

}  // namespace gpc
