#pragma once
/*
 * Empirical checks of the convergence argument with measured constants.
 *
 * Quantities at checkpoint t, with theta_C^t the parameters of a run trained on coreset C:
 *   G_V    mean validation gradient
 *   G_ref  mean reference-split gradient (population-risk proxy)
 *   gamma  mean coreset gradient
 *   kappa  1 - min_m cos(grad_m, G_V) over coreset samples m
 *   E      |gamma - G_ref|
 *   delta  |G_V - G_ref|
 *   B      max per-sample gradient norm seen on the trajectory
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cld/core.hpp"
#include "cld/trainer.hpp"

namespace cld {

struct CheckpointAlignment {
  int checkpoint = 0;
  bool flagged = false;  // G_V vanished, cosine undefined
  std::vector<double> cosines;
  double min_cosine = 0.0;
  double kappa = 0.0;
  double subset_error = 0.0;  // E_t
  double delta = 0.0;
  double gap_rhs = 0.0;    // B sqrt(2 kappa) + delta
  bool gap_holds = true;
};

struct AlignmentReport {
  std::vector<CheckpointAlignment> checkpoints;
  double gradient_bound = 0.0;  // B
  double kappa_max = 0.0;
  double delta_max = 0.0;
  bool gap_holds = true;
  std::vector<int> violations;
};

namespace detail {
inline ModelParams snapshot_params(const TrainResult& run, std::size_t t) {
  return {run.final_params.classes, run.final_params.dim, run.snapshots[t]};
}

inline std::vector<double> subtract(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}
}  // namespace detail

/// `coreset_rows` index into data.train. The gradient bound B is the maximum norm over the
/// coreset and validation per-sample gradients at every checkpoint.
inline AlignmentReport alignment_diagnostics(const TrainResult& run, std::span<const std::size_t> coreset_rows,
                                             const Dataset& data, double tolerance = 1e-12) {
  if (run.snapshots.empty()) throw Error(ErrorKind::MissingSnapshots, "alignment needs parameter snapshots");
  if (coreset_rows.empty()) throw Error(ErrorKind::InvalidArgument, "coreset is empty");

  AlignmentReport report;
  for (std::size_t t = 0; t < run.snapshots.size(); ++t) {
    const auto params = detail::snapshot_params(run, t);
    CheckpointAlignment cp;
    cp.checkpoint = static_cast<int>(t);

    const auto g_val = batch_gradient(params, data.validation);
    const auto g_ref = reference_gradient(params, data);
    const auto g_coreset = batch_gradient(params, data.train, coreset_rows);
    const double g_val_norm = norm(g_val);

    for (std::size_t i = 0; i < data.validation.size(); ++i) {
      const auto g = per_sample_gradient(params, data.validation.x(i), data.validation.labels[i]);
      report.gradient_bound = std::max(report.gradient_bound, norm(g));
    }
    double min_cos = 1.0;
    for (auto row : coreset_rows) {
      const auto g = per_sample_gradient(params, data.train.x(row), data.train.labels[row]);
      const double gn = norm(g);
      report.gradient_bound = std::max(report.gradient_bound, gn);
      // a zero per-sample gradient is treated as orthogonal to G_V
      const double c = (gn == 0.0 || g_val_norm == 0.0) ? 0.0 : std::clamp(dot(g, g_val) / (gn * g_val_norm), -1.0, 1.0);
      cp.cosines.push_back(c);
      min_cos = std::min(min_cos, c);
    }
    cp.flagged = g_val_norm == 0.0;
    cp.min_cosine = min_cos;
    cp.kappa = std::clamp(1.0 - min_cos, 0.0, 2.0);
    cp.subset_error = norm(detail::subtract(g_coreset, g_ref));
    cp.delta = norm(detail::subtract(g_val, g_ref));
    report.checkpoints.push_back(std::move(cp));
  }

  // B is a trajectory-wide constant, so the inequality is evaluated once it is known.
  for (auto& cp : report.checkpoints) {
    if (cp.flagged) continue;
    cp.gap_rhs = report.gradient_bound * std::sqrt(2.0 * cp.kappa) + cp.delta;
    cp.gap_holds = cp.subset_error <= cp.gap_rhs + tolerance;
    if (!cp.gap_holds) {
      report.gap_holds = false;
      report.violations.push_back(cp.checkpoint);
    }
    report.kappa_max = std::max(report.kappa_max, cp.kappa);
    report.delta_max = std::max(report.delta_max, cp.delta);
  }
  return report;
}

/// Empirical smoothness: `safety` times the largest secant ratio |g(b) - g(a)| / |b - a| over
/// consecutive snapshots. Zero-displacement pairs are skipped.
template <class GradFn>
double smoothness_estimate(const std::vector<std::vector<double>>& snapshots, GradFn&& grad, double safety = 2.0) {
  if (snapshots.size() < 2) throw Error(ErrorKind::TooShort, "smoothness estimate needs at least 2 snapshots");
  double best = 0.0;
  bool any = false;
  auto previous = grad(std::span<const double>(snapshots[0]));
  for (std::size_t t = 1; t < snapshots.size(); ++t) {
    auto current = grad(std::span<const double>(snapshots[t]));
    const double step = norm(detail::subtract(snapshots[t], snapshots[t - 1]));
    if (step > 0.0) {
      any = true;
      best = std::max(best, norm(detail::subtract(current, previous)) / step);
    }
    previous = std::move(current);
  }
  if (!any) throw Error(ErrorKind::AllStepsZero, "no snapshot pair moved");
  return safety * best;
}

/// Smoothness of both the coreset risk and the reference risk along a recorded run.
inline double trajectory_smoothness(const TrainResult& run, const Dataset& data, double safety = 2.0) {
  const ModelParams shape = run.final_params;
  const auto& rows = run.trained_rows;
  const double on_coreset = smoothness_estimate(run.snapshots, [&](std::span<const double> theta) {
    const ModelParams p{shape.classes, shape.dim, {theta.begin(), theta.end()}};
    return batch_gradient(p, data.train, rows);
  }, safety);
  const double on_reference = smoothness_estimate(run.snapshots, [&](std::span<const double> theta) {
    const ModelParams p{shape.classes, shape.dim, {theta.begin(), theta.end()}};
    return reference_gradient(p, data);
  }, safety);
  return std::max(on_coreset, on_reference);
}

struct DescentStep {
  int step = 0;
  double lhs = 0.0;  // R_{t+1}
  double rhs = 0.0;  // R_t - eta <G_t, gamma_t> + L eta^2 / 2 |gamma_t|^2
  bool holds = true;
};

struct BoundReport {
  double smoothness = 0.0;  // L
  double learning_rate = 0.0;
  int epochs = 0;
  bool step_size_ok = true;  // eta <= 1/L
  double initial_risk = 0.0;
  double min_grad_norm_sq = 0.0;
  double optimization_term = 0.0;  // 2 R_0 / (eta T)
  double noise_term = 0.0;         // L eta B^2
  double alignment_term = 0.0;     // (B sqrt(2 kappa) + delta)^2
  double bound = 0.0;
  double slack = 0.0;
  bool bound_holds = false;
  std::vector<DescentStep> descent;
  bool descent_holds = true;
  std::vector<int> descent_violations;
};

/// Checks the per-step descent inequality and the final convergence bound on a full-batch
/// run over its trained rows. R_inf is taken as 0 (cross-entropy is non-negative).
inline BoundReport bound_check(const TrainResult& run, const Dataset& data, const AlignmentReport& alignment,
                                  double smoothness, double learning_rate, double descent_tolerance = 1e-9) {
  if (run.snapshots.size() < 2) throw Error(ErrorKind::MissingSnapshots, "bound check needs parameter snapshots");
  BoundReport b;
  b.smoothness = smoothness;
  b.learning_rate = learning_rate;
  b.epochs = static_cast<int>(run.snapshots.size()) - 1;
  b.step_size_ok = learning_rate <= 1.0 / smoothness;

  std::vector<double> risk;
  double min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < run.snapshots.size(); ++t) {
    const auto p = detail::snapshot_params(run, t);
    risk.push_back(evaluate(p, data.reference).mean_loss);
  }
  for (std::size_t t = 0; t + 1 < run.snapshots.size(); ++t) {
    const auto p = detail::snapshot_params(run, t);
    const auto g_ref = reference_gradient(p, data);
    const auto gamma = batch_gradient(p, data.train, run.trained_rows);
    min_sq = std::min(min_sq, dot(g_ref, g_ref));
    DescentStep s;
    s.step = static_cast<int>(t);
    s.lhs = risk[t + 1];
    s.rhs = risk[t] - learning_rate * dot(g_ref, gamma) + 0.5 * smoothness * learning_rate * learning_rate * dot(gamma, gamma);
    s.holds = s.lhs <= s.rhs + descent_tolerance;
    if (!s.holds) {
      b.descent_holds = false;
      b.descent_violations.push_back(s.step);
    }
    b.descent.push_back(s);
  }

  const double B = alignment.gradient_bound;
  b.initial_risk = risk.front();
  b.min_grad_norm_sq = min_sq;
  b.optimization_term = 2.0 * b.initial_risk / (learning_rate * b.epochs);
  b.noise_term = smoothness * learning_rate * B * B;
  const double a = B * std::sqrt(2.0 * alignment.kappa_max) + alignment.delta_max;
  b.alignment_term = a * a;
  b.bound = b.optimization_term + b.noise_term + b.alignment_term;
  b.slack = b.bound - b.min_grad_norm_sq;
  b.bound_holds = b.slack > 0.0;
  return b;
}

struct TheoryConfig {
  int epochs = 30;
  int pilot_epochs = 30;
  double step_fraction = 0.5;  // eta = step_fraction / L
  double safety = 2.0;
};

struct TheoryOutcome {
  double pilot_learning_rate = 0.0;
  double pilot_smoothness = 0.0;
  double run_smoothness = 0.0;
  TrainResult run;
  AlignmentReport alignment;
  BoundReport bound;

  bool all_pass() const { return alignment.gap_holds && bound.descent_holds && bound.bound_holds; }
};

/// Pilot run at eta = 1/L_ub to estimate L, then a full-batch run at eta = step_fraction / L
/// on the coreset, followed by both checks. The descent check uses the larger of the pilot
/// and run estimates.
inline TheoryOutcome run_theory(const Dataset& data, std::span<const std::int64_t> coreset_ids,
                                const TheoryConfig& cfg = {}) {
  TheoryOutcome out;
  TrainConfig pilot;
  pilot.batch_size = 0;
  pilot.epochs = cfg.pilot_epochs;
  pilot.record_parameter_snapshots = true;
  const double upper = std::max(softmax_smoothness_upper_bound(data.train), softmax_smoothness_upper_bound(data.reference));
  pilot.learning_rate = 1.0 / upper;
  out.pilot_learning_rate = pilot.learning_rate;
  const auto pilot_run = train_and_log(data, pilot, coreset_ids);
  out.pilot_smoothness = trajectory_smoothness(pilot_run, data, cfg.safety);

  TrainConfig main = pilot;
  main.epochs = cfg.epochs;
  main.learning_rate = cfg.step_fraction / out.pilot_smoothness;
  out.run = train_and_log(data, main, coreset_ids);
  out.run_smoothness = trajectory_smoothness(out.run, data, cfg.safety);

  out.alignment = alignment_diagnostics(out.run, out.run.trained_rows, data);
  out.bound = bound_check(out.run, data, out.alignment, std::max(out.pilot_smoothness, out.run_smoothness),
                             main.learning_rate);
  return out;
}

}  // namespace cld
