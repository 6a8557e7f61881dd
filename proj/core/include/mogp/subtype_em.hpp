#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mogp/gp.hpp"

namespace mogp {

/// Mixture of G stationary GP experts fitted to stable patients.
struct MixtureState {
  std::vector<StationaryParams> experts;
  Eigen::VectorXd priors;            // pi, sums to one
  Eigen::MatrixXd responsibilities;  // N x G, rows sum to one
  double log_likelihood = 0.0;       // observed-data log likelihood

  int num_experts() const { return static_cast<int>(experts.size()); }
};

struct EmConfig {
  double tolerance = 1e-4;  // mean absolute responsibility change
  int max_iterations = 200;
  int kmeans_restarts = 5;
  int max_reseeds = 3;
  /// Generalized M-step: warm-started ascent on kernel and correlation factor.
  FitConfig mstep = mstep_defaults();

  static FitConfig mstep_defaults() {
    FitConfig c;
    c.restarts = 1;
    c.max_iterations = 50;
    return c;
  }
  JitterPolicy jitter;
};

struct EmResult {
  MixtureState state;
  std::vector<double> log_likelihood_trace;  // initial value, then one per iteration
  int iterations = 0;
  int reseeds = 0;
  bool converged = false;
};

/// Posterior subtype membership of every patient plus the observed-data log
/// likelihood, computed in log space.
struct EStep {
  Eigen::MatrixXd responsibilities;
  double log_likelihood = 0.0;
};
EStep e_step(std::span<const ObservationSet> data, std::span<const StationaryParams> experts,
             const Eigen::VectorXd& priors, const JitterPolicy& jitter = {});

/// EM with k-means seeding: the first M-step uses the hard k-means assignment,
/// after which E- and M-steps alternate. Throws DegenerateCluster when an
/// expert keeps collapsing below one patient of responsibility mass after all
/// reseeds.
EmResult em_fit(std::span<const ObservationSet> data, int num_experts, const EmConfig& config,
                std::uint64_t seed);

/// EM from explicit initial experts and priors (no reseeding).
EmResult em_fit(std::span<const ObservationSet> data, std::vector<StationaryParams> init_experts,
                Eigen::VectorXd init_priors, const EmConfig& config);

struct Seeding {
  std::vector<StationaryParams> experts;
  std::vector<int> labels;  // k-means cluster of each patient
};

/// Initial experts from k-means over per-patient summaries (per-stream mean
/// and variance). Deterministic per seed and invariant to duplicating the data.
Seeding kmeans_seed(std::span<const ObservationSet> data, int num_experts, int restarts,
                    std::uint64_t seed, const LengthScaleBounds& bounds);

struct SelectionRow {
  int num_experts = 0;
  double q_star = 0.0;   // final observed-data log likelihood
  double penalty = 0.0;  // Psi_G, number of hyper-parameters
  double log_bayes_factor = std::numeric_limits<double>::quiet_NaN();  // vs G - 1
};

struct ModelSelectionTrace {
  std::vector<SelectionRow> rows;
  double threshold = 1.0;  // on the Bayes factor itself, not its log
  int selected = 1;
};

struct SelectionConfig {
  double bayes_threshold = 1.0;
  int max_experts = 12;
};

struct Selection {
  EmResult fit;
  ModelSelectionTrace trace;
};

/// Psi_G = G (D(D+1)/2 + D + 1).
double selection_penalty(int num_experts, int dim);

/// log B_{G,G-1} under the BIC approximation.
double log_bayes_factor(double q_g, double psi_g, double q_prev, double psi_prev,
                        std::size_t num_patients);

/// Grows G from 1 until the Bayes factor against G - 1 drops below the
/// threshold (or G reaches the cap) and returns the last accepted fit.
Selection select_num_experts(std::span<const ObservationSet> data, const SelectionConfig& selection,
                             const EmConfig& config, std::uint64_t seed);

}  // namespace mogp
