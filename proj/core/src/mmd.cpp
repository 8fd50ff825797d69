#include "causalsem/mmd.hpp"

#include <algorithm>
#include <cmath>

#include "causalsem/errors.hpp"

namespace causalsem {

void KernelSpec::validate() const {
  if (bandwidths.empty()) throw ConfigError("kernel: at least one bandwidth required");
  for (double bw : bandwidths)
    if (!(bw > 0.0)) throw ConfigError("kernel: bandwidths must be positive");
}

double median_pairwise_distance(const Matrix& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) return 1.0;
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      dists.push_back((X.row(i) - X.row(j)).norm());
  auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

KernelSpec KernelSpec::median_heuristic(const Matrix& samples,
                                        const std::vector<double>& scales) {
  double med = median_pairwise_distance(samples);
  if (!(med > 1e-9)) med = 1.0;  // degenerate sample sets fall back to unit scale
  KernelSpec spec;
  for (double s : scales) spec.bandwidths.push_back(s * med);
  spec.validate();
  return spec;
}

namespace {

// Pairwise squared distances via explicit differences: exact zeros on the
// diagonal and exact symmetry when X and Y hold identical data.
Matrix pairwise_sqdist(const Matrix& X, const Matrix& Y) {
  if (X.cols() != Y.cols()) throw DimensionError("kernel: dimension mismatch");
  const Eigen::Index n = X.rows(), m = Y.rows();
  Matrix D(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      D(i, j) = (X.row(i) - Y.row(j)).squaredNorm();
  return D;
}

Matrix kernel_from_sqdist(const Matrix& D, const KernelSpec& spec) {
  Matrix K = Matrix::Zero(D.rows(), D.cols());
  for (double bw : spec.bandwidths)
    K += (-D.array() / (2.0 * bw * bw)).exp().matrix();
  return K;
}

}  // namespace

Matrix kernel_matrix(const Matrix& X, const Matrix& Y, const KernelSpec& spec) {
  spec.validate();
  return kernel_from_sqdist(pairwise_sqdist(X, Y), spec);
}

double mmd2(const Matrix& X, const Matrix& Y, const KernelSpec& spec, bool unbiased) {
  spec.validate();
  const Eigen::Index n = X.rows(), m = Y.rows();
  const Matrix Kxx = kernel_matrix(X, X, spec);
  const Matrix Kyy = kernel_matrix(Y, Y, spec);
  const Matrix Kxy = kernel_matrix(X, Y, spec);
  if (!unbiased)
    return Kxx.mean() + Kyy.mean() - 2.0 * Kxy.mean();

  if (n < 2 || m < 2) throw Error("mmd2: unbiased estimator needs at least 2 samples per set");
  const double sx = (Kxx.sum() - Kxx.trace()) / static_cast<double>(n * (n - 1));
  const double sy = (Kyy.sum() - Kyy.trace()) / static_cast<double>(m * (m - 1));
  return sx + sy - 2.0 * Kxy.mean();
}

Matrix cmmd_weight_matrix(const Matrix& C, const CmmdConfig& config) {
  if (!(config.lambda_reg > 0.0)) throw ConfigError("cmmd: lambda_reg must be positive");
  const Eigen::Index n = C.rows();
  Eigen::MatrixXd K = kernel_matrix(C, C, config.cond_kernel);
  Eigen::MatrixXd Kt = K;
  Kt.diagonal().array() += config.lambda_reg;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Kt);
  if (ldlt.info() != Eigen::Success)
    throw NumericError("cmmd: conditioning solve failed; increase lambda_reg");
  Eigen::MatrixXd Y = ldlt.solve(K);             // Kt^{-1} K
  Eigen::MatrixXd P = ldlt.solve(Y.transpose()); // Kt^{-1} K Kt^{-1} (symmetric)
  Matrix out(n, n);
  out = P;
  return out;
}

CmmdConfig CmmdConfig::defaults(const Matrix& conditioning, const Matrix& targets,
                                double lambda_factor) {
  CmmdConfig cfg;
  cfg.lambda_reg = lambda_factor * static_cast<double>(conditioning.rows());
  cfg.cond_kernel = KernelSpec::median_heuristic(conditioning);
  cfg.target_kernel = KernelSpec::median_heuristic(targets);
  return cfg;
}

double cmmd2(const Matrix& C, const Matrix& T_real, const Matrix& T_gen,
             const CmmdConfig& config) {
  if (C.rows() != T_real.rows() || C.rows() != T_gen.rows())
    throw DimensionError("cmmd: row count mismatch between conditioning and targets");
  const Matrix P = cmmd_weight_matrix(C, config);
  const Matrix Lr = kernel_matrix(T_real, T_real, config.target_kernel);
  const Matrix Lg = kernel_matrix(T_gen, T_gen, config.target_kernel);
  const Matrix Lgr = kernel_matrix(T_gen, T_real, config.target_kernel);
  const double tr = Lr.cwiseProduct(P).sum();
  const double tg = Lg.cwiseProduct(P).sum();
  const double tgr = Lgr.cwiseProduct(P).sum();
  return tr + tg - 2.0 * tgr;
}

Var kernel_op(Tape& tape, Var X, Var Y, const KernelSpec& spec) {
  spec.validate();
  const Tensor& tx = tape.value(X);
  const Tensor& ty = tape.value(Y);
  if (tx.rank() != 2 || ty.rank() != 2)
    throw DimensionError("kernel_op: operands must be rank 2");
  Matrix D = pairwise_sqdist(to_matrix(tx), to_matrix(ty));
  Matrix K = kernel_from_sqdist(D, spec);

  KernelSpec captured = spec;
  return tape.custom(
      from_matrix(K), {X, Y},
      [X, Y, D, captured](Tape& t, Var, const std::vector<double>& up) {
        const Matrix Xv = to_matrix(t.value(X));
        const Matrix Yv = to_matrix(t.value(Y));
        Eigen::Map<const Matrix> G(up.data(), D.rows(), D.cols());
        Matrix B = Matrix::Zero(D.rows(), D.cols());
        for (double bw : captured.bandwidths) {
          const double inv = 1.0 / (bw * bw);
          B += (G.array() * (-D.array() * (0.5 * inv)).exp() * inv).matrix();
        }
        if (t.requires_grad(X)) {
          Matrix gx = B * Yv - (B.rowwise().sum().asDiagonal() * Xv);
          t.accumulate(X, gx.data(), static_cast<std::size_t>(gx.size()));
        }
        if (t.requires_grad(Y)) {
          Matrix gy = B.transpose() * Xv - (B.colwise().sum().transpose().asDiagonal() * Yv);
          t.accumulate(Y, gy.data(), static_cast<std::size_t>(gy.size()));
        }
      });
}

Var mmd2_op(Tape& tape, Var X, Var Y, const KernelSpec& spec) {
  Var kxx = tape.mean(kernel_op(tape, X, X, spec));
  Var kyy = tape.mean(kernel_op(tape, Y, Y, spec));
  Var kxy = tape.mean(kernel_op(tape, X, Y, spec));
  return tape.add(tape.add(kxx, kyy), tape.scale(kxy, -2.0));
}

Var cmmd2_op(Tape& tape, const Matrix& C, Var T_real, Var T_gen,
             const CmmdConfig& config) {
  const Tensor& tr = tape.value(T_real);
  const Tensor& tg = tape.value(T_gen);
  if (static_cast<Eigen::Index>(tr.rows()) != C.rows() ||
      static_cast<Eigen::Index>(tg.rows()) != C.rows())
    throw DimensionError("cmmd2_op: row count mismatch");
  Var P = tape.constant(from_matrix(cmmd_weight_matrix(C, config)));
  Var lr = tape.sum(tape.mul(kernel_op(tape, T_real, T_real, config.target_kernel), P));
  Var lg = tape.sum(tape.mul(kernel_op(tape, T_gen, T_gen, config.target_kernel), P));
  Var lgr = tape.sum(tape.mul(kernel_op(tape, T_gen, T_real, config.target_kernel), P));
  return tape.add(tape.add(lr, lg), tape.scale(lgr, -2.0));
}

}  // namespace causalsem
