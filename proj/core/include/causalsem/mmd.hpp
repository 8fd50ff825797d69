#pragma once

#include <vector>

#include "causalsem/tensor.hpp"

namespace causalsem {

/// RBF mixture kernel: k(x,y) = sum_bw exp(-|x-y|^2 / (2 bw^2)).
struct KernelSpec {
  std::vector<double> bandwidths;

  static KernelSpec single(double bw) { return {{bw}}; }
  static KernelSpec mixture(std::vector<double> bws) { return {std::move(bws)}; }
  /// Bandwidths scales * median pairwise distance of the sample rows.
  static KernelSpec median_heuristic(const Matrix& samples,
                                     const std::vector<double>& scales = {0.25, 0.5, 1.0,
                                                                          2.0, 4.0});
  void validate() const;
};

double median_pairwise_distance(const Matrix& X);

Matrix kernel_matrix(const Matrix& X, const Matrix& Y, const KernelSpec& spec);

/// Squared maximum mean discrepancy. The biased V-statistic is smooth at
/// zero and is the one used inside training losses; the unbiased U-statistic
/// (off-diagonal means) serves diagnostics and needs n,m >= 2.
double mmd2(const Matrix& X, const Matrix& Y, const KernelSpec& spec,
            bool unbiased = false);

/// Conditional MMD estimator configuration. The matrix added to the
/// conditioning Gram matrix is lambda_reg * I; the default scales the
/// regularizer with the sample count (lambda_factor * n).
struct CmmdConfig {
  double lambda_reg = 1.0;
  KernelSpec cond_kernel;
  KernelSpec target_kernel;

  static CmmdConfig defaults(const Matrix& conditioning, const Matrix& targets,
                             double lambda_factor = 0.1);
};

/// Regularized kernel conditional discrepancy between T_real and T_gen given
/// shared per-row conditioning C:
///   tr(Kt^-1 L_r Kt^-1 K) + tr(Kt^-1 L_g Kt^-1 K) - 2 tr(Kt^-1 L_gr Kt^-1 K)
/// with K = k(C,C), Kt = K + lambda I. Exactly zero when T_gen == T_real.
double cmmd2(const Matrix& C, const Matrix& T_real, const Matrix& T_gen,
             const CmmdConfig& config);

/// P = Kt^{-1} K Kt^{-1}; the constant weighting matrix of the estimator.
Matrix cmmd_weight_matrix(const Matrix& C, const CmmdConfig& config);

// --- differentiable versions -------------------------------------------------

/// Kernel matrix with gradients into X and Y.
Var kernel_op(Tape& tape, Var X, Var Y, const KernelSpec& spec);

/// Biased squared MMD on the tape.
Var mmd2_op(Tape& tape, Var X, Var Y, const KernelSpec& spec);

/// CMMD with constant conditioning; gradients flow through the target Gram
/// matrices only (both T_real and T_gen).
Var cmmd2_op(Tape& tape, const Matrix& C, Var T_real, Var T_gen,
             const CmmdConfig& config);

}  // namespace causalsem
