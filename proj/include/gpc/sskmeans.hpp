#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gpc/types.hpp"

namespace gpc {

/// Partial label map over instances plus the sorted list of labelled classes.
struct LabelConstraints {
  Labels labelled_of;
  std::vector<ClassId> classes;

  static LabelConstraints from_labels(Labels labels);

  std::size_t size() const { return labelled_of.size(); }
  std::size_t num_classes() const { return classes.size(); }
  bool is_labelled(std::size_t i) const { return labelled_of[i].has_value(); }
  /// Position of `c` in `classes`; throws Domain if absent.
  std::size_t class_index(ClassId c) const;
  std::vector<std::size_t> unlabelled_indices() const;
};

struct KMeansOptions {
  std::size_t max_iter = 300;
  /// Independent k-means++ seedings of the free centres; best inertia wins.
  std::size_t n_init = 20;
  /// Warm start: k x d centres. When set, `owner_of_class` must map every
  /// class index to its centre and n_init is ignored.
  std::optional<Matrix> init_centers;
  std::vector<std::size_t> owner_of_class;
};

struct KMeansResult {
  Matrix centers;                       // k x d
  std::vector<std::size_t> assignment;  // instance -> centre
  std::vector<std::size_t> owner_of_class;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // one entry per Lloyd iteration
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with every labelled class locked to its own centre.
/// Cold start puts the first K^l centres at the labelled class means (centre
/// c owns classes[c]) and seeds the rest by k-means++ over unlabelled points.
KMeansResult ss_kmeans(const Matrix& x, const LabelConstraints& cons, std::size_t k,
                       std::uint64_t seed, const KMeansOptions& options = {});

/// Squared-distance objective of an assignment against given centres.
double kmeans_inertia(const Matrix& x, const Matrix& centers,
                      std::span<const std::size_t> assignment);

enum class CovarianceMode { Full, Diag };

/// Empirical covariance of selected rows plus 1e-6 tr/d I.
Matrix ridged_covariance(const Matrix& x, std::span<const std::size_t> rows,
                         CovarianceMode mode);

struct SubComponent {
  Vector mean;
  Matrix cov;
  double weight = 0.0;
  std::vector<std::size_t> members;  // row indices into the data matrix
};

struct SubclusterResult {
  std::array<SubComponent, 2> parts;

  bool splittable() const { return !parts[0].members.empty() && !parts[1].members.empty(); }
};

/// Unconstrained 2-means over `members` (rows of `x`). When `labels` is
/// non-empty (indexed like the rows of x) each labelled class moves as one
/// block. Throws TooFewPoints for fewer than two members.
SubclusterResult subcluster(const Matrix& x, std::span<const std::size_t> members,
                            std::uint64_t seed, CovarianceMode mode = CovarianceMode::Full,
                            const Labels* labels = nullptr);

}  // namespace gpc
