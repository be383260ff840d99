#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gpc/niw.hpp"
#include "gpc/sskmeans.hpp"
#include "gpc/types.hpp"

namespace gpc {

/// How Gamma(n) in the Hastings ratios is read: `Factorial` is n! and
/// `Gamma` is the ordinary gamma function, (n-1)!.
enum class GammaConvention { Factorial, Gamma };

/// Which components may not be split: those holding any labelled instance,
/// or only those made up entirely of labelled instances.
enum class SplitVeto { AnyLabelled, AllLabelled };

struct MixtureConfig {
  GammaConvention gamma = GammaConvention::Factorial;
  SplitVeto split_veto = SplitVeto::AllLabelled;
  CovarianceMode covariance = CovarianceMode::Full;
  /// Accept every non-vetoed proposal regardless of its Hastings ratio.
  bool force_accept = false;
};

struct GaussComponent {
  double weight = 0.0;
  Vector mean;
  Matrix cov;
  std::optional<SubclusterResult> sub;  // absent when fewer than two members
  std::vector<std::size_t> members;     // sorted row indices
  std::optional<ClassId> label;         // class of the labelled members, if any
  std::size_t labelled_count = 0;

  std::size_t size() const { return members.size(); }
};

struct MixtureState {
  std::vector<GaussComponent> components;
  std::vector<std::size_t> assignment;  // instance -> component
  std::size_t epoch = 0;
  std::mt19937_64 rng;

  std::size_t k() const { return components.size(); }
};

struct Proposal {
  enum class Kind { Split, Merge };
  Kind kind = Kind::Split;
  std::size_t first = 0;
  std::size_t second = 0;  // equals first for splits
  double log_h = 0.0;
  double p = 0.0;
  double u = 0.0;
  bool accepted = false;
  std::optional<std::string> veto_reason;
};

struct SplitMergeLog {
  std::size_t epoch = 0;
  std::size_t k_before = 0;
  std::size_t k_after = 0;
  std::vector<Proposal> proposals;
};

/// K^l + K^l/2 rounded half up.
std::size_t default_k_init(std::size_t labelled_classes);

/// ln Gamma(n) under the chosen convention.
double log_gamma_count(std::size_t n, GammaConvention convention);

/// Builds a component from member rows: mean, ridged covariance, label
/// bookkeeping and its two sub-components.
GaussComponent make_component(const Matrix& z, std::vector<std::size_t> members,
                              const LabelConstraints& cons, std::uint64_t seed,
                              CovarianceMode mode);

/// Semi-supervised k-means with k = K_init followed by per-component fits.
MixtureState init_mixture(const Matrix& z, const LabelConstraints& cons, std::size_t k_init,
                          std::uint64_t seed, const MixtureConfig& config = {});

/// Warm-started semi-supervised k-means from the current component means,
/// then hard-assignment parameter updates. K is unchanged.
void refit(MixtureState& state, const Matrix& z, const LabelConstraints& cons,
           const MixtureConfig& config = {});

/// Recomputes weights pi_i = N_i / N and the instance assignment.
void normalize(MixtureState& state, std::size_t n);

double log_hs(const MixtureState& state, const Matrix& z, const NiwHyper& prior, std::size_t i,
              GammaConvention convention);
double log_hm(const MixtureState& state, const Matrix& z, const NiwHyper& prior, std::size_t i,
              std::size_t j, GammaConvention convention);

/// Sets p = 0 and a veto reason on proposals forbidden by the labels.
void apply_vetoes(const MixtureState& state, std::vector<Proposal>& proposals, SplitVeto mode);

/// One stochastic split pass followed by one merge pass over pre-existing
/// components. Random draws come from state.rng.
std::pair<MixtureState, SplitMergeLog> split_merge_round(MixtureState state, const Matrix& z,
                                                         const LabelConstraints& cons,
                                                         const NiwHyper& prior,
                                                         const MixtureConfig& config = {});

/// Nearest component mean; ties go to the lowest id.
std::size_t assign_by_prototype(const MixtureState& state, const Vector& v);

/// Number of labelled instance pairs that break must-link or cannot-link.
std::size_t count_constraint_violations(const MixtureState& state, const LabelConstraints& cons);

}  // namespace gpc
