#pragma once

#include <cstdio>
#include <functional>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include "fibrehom/core.hpp"
#include "fibrehom/forms.hpp"
#include "fibrehom/kron.hpp"

namespace fibrehom {

/// Matrix-free Hermitian operator acting on blocks of column vectors.
struct LinOp {
  Index n = 0;
  std::function<void(const Eigen::Ref<const MatXc>&, Eigen::Ref<MatXc>)> apply;

  MatXc operator()(const Eigen::Ref<const MatXc>& x) const {
    MatXc y(x.rows(), x.cols());
    apply(x, y);
    return y;
  }

  static LinOp from(const HermitianForm& a) {
    return LinOp{a.n(), [&a](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) {
                   y = a.matrix() * x;
                 }};
  }
  static LinOp from(const KronForm& a) {
    return LinOp{a.n(), [&a](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) {
                   a.apply(x, y);
                 }};
  }
  static LinOp from_dense(const MatXc& a) {
    return LinOp{a.rows(), [&a](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) {
                   y = a * x;
                 }};
  }
  static LinOp identity(Index n) {
    return LinOp{n, [](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) { y = x; }};
  }
  /// Diagonal (Jacobi) preconditioner from a pencil diagonal.
  static LinOp jacobi(const VecX& diag) {
    VecX inv = diag.unaryExpr([](Real d) { return d > 0.0 ? 1.0 / d : 1.0; });
    return LinOp{inv.size(), [inv](const Eigen::Ref<const MatXc>& x, Eigen::Ref<MatXc> y) {
                   y = inv.asDiagonal() * x;
                 }};
  }
};

/// Ascending eigenvalues with residual norms and M-orthonormal eigenvectors.
struct SpectralResult {
  VecX eigenvalues;
  VecX residuals;
  MatXc vectors;
  int iterations = 0;
  Index requested_k = 0;  // k before degenerate-cluster extension
};

struct EigOptions {
  Index k = 1;
  Real tol = 1e-8;
  int max_iter = 2000;
  Index block_extra = 5;
  std::uint64_t seed = 0x5eedf1b5u;
  MatXc constraints;                               // columns deflated via M-orthogonal projection
  std::function<void(MatXc&)> subspace_projector;  // confines iterates to a subspace
  std::function<void(MatXc&)> residual_projector;  // convergence measure for restricted pencils
  bool verbose = false;
};

struct DenseEigs {
  VecX values;
  MatXc vectors;
};

/// Full spectrum of the Hermitian pencil (K, M), M positive definite.
inline DenseEigs dense_eigs(const MatXc& k, const MatXc& m) {
  if (k.rows() > 5000) throw ParameterError("dense_eigs: dimension cap 5000 exceeded");
  Eigen::GeneralizedSelfAdjointEigenSolver<MatXc> es(k, m,
                                                     Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success) throw SolveError("dense_eigs: factorisation failed", {});
  return DenseEigs{es.eigenvalues(), es.eigenvectors()};
}

namespace detail {

// SVQB: returns T such that the columns of S*T are B-orthonormal, dropping
// near-dependent directions.  gram = S^H B S.
inline MatXc svqb_transform(const MatXc& gram_in, Real drop_tol = 1e-12) {
  MatXc gram = 0.5 * (gram_in + gram_in.adjoint());
  Eigen::SelfAdjointEigenSolver<MatXc> es(gram);
  const VecX d = es.eigenvalues();
  const Real dmax = d.size() ? std::max(d.maxCoeff(), 0.0) : 0.0;
  if (!(dmax > 0.0)) return MatXc(gram.rows(), 0);
  std::vector<Index> keep;
  for (Index i = 0; i < d.size(); ++i)
    if (d[i] > drop_tol * dmax) keep.push_back(i);
  MatXc t(gram.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j)
    t.col(static_cast<Index>(j)) = es.eigenvectors().col(keep[j]) / std::sqrt(d[keep[j]]);
  return t;
}

}  // namespace detail

/// Locally optimal block preconditioned solver for the k smallest eigenvalues
/// of the Hermitian pencil (A, B), B positive definite.  Degenerate clusters
/// at index k are returned whole (k is extended until the gap exceeds
/// 10*tol).  Throws SolveError with the best residuals if max_iter runs out.
inline SpectralResult smallest_eigs(const LinOp& a_op, const LinOp& b_op, const EigOptions& opts,
                                    const LinOp* precond = nullptr) {
  const Index n = a_op.n;
  if (opts.k < 1) throw ParameterError("smallest_eigs: k must be >= 1");
  if (opts.k > n) throw ParameterError("smallest_eigs: k exceeds dimension");
  const Index m = std::min<Index>(n, opts.k + opts.block_extra);

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<Real> dist(0.0, 1.0);
  auto randn = [&](Index rows, Index cols) {
    MatXc z(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) z(i, j) = Complex(dist(rng), dist(rng));
    return z;
  };

  const bool has_constraints = opts.constraints.cols() > 0;
  MatXc y, by;
  Eigen::LLT<MatXc> y_gram;
  if (has_constraints) {
    y = opts.constraints;
    by = b_op(y);
    MatXc g = y.adjoint() * by;
    y_gram.compute(0.5 * (g + g.adjoint()));
  }
  auto constrain = [&](MatXc& z) {
    if (has_constraints) z -= y * y_gram.solve(by.adjoint() * z);
    if (opts.subspace_projector) opts.subspace_projector(z);
  };

  MatXc x = randn(n, m);
  constrain(x);
  MatXc bx = b_op(x);
  {
    MatXc t = detail::svqb_transform(x.adjoint() * bx);
    if (t.cols() == 0) throw SolveError("smallest_eigs: empty feasible subspace", {});
    x = (x * t).eval();
    bx = (bx * t).eval();
  }
  MatXc ax = a_op(x);
  VecX lambda;
  {
    MatXc ga = x.adjoint() * ax;
    Eigen::SelfAdjointEigenSolver<MatXc> es(0.5 * (ga + ga.adjoint()));
    lambda = es.eigenvalues();
    const MatXc& c = es.eigenvectors();
    x = (x * c).eval();
    ax = (ax * c).eval();
    bx = (bx * c).eval();
  }

  MatXc p(n, 0), ap(n, 0), bp(n, 0);
  VecX best_res = VecX::Constant(m, std::numeric_limits<Real>::infinity());

  auto cluster_k = [&](const VecX& vals) {
    Index ke = std::min<Index>(opts.k, vals.size());
    while (ke < vals.size()) {
      const Real scale = std::max(1.0, std::abs(vals[ke - 1]));
      if (vals[ke] - vals[ke - 1] > 10.0 * opts.tol * scale) break;
      ++ke;
    }
    return ke;
  };

  for (int it = 1; it <= opts.max_iter; ++it) {
    MatXc r = ax - bx * lambda.head(x.cols()).asDiagonal();
    VecX res(x.cols());
    if (opts.residual_projector) {
      MatXc rp = r;
      opts.residual_projector(rp);
      for (Index i = 0; i < x.cols(); ++i) res[i] = rp.col(i).norm();
    } else {
      for (Index i = 0; i < x.cols(); ++i) res[i] = r.col(i).norm();
    }
    for (Index i = 0; i < std::min<Index>(res.size(), best_res.size()); ++i)
      best_res[i] = std::min(best_res[i], res[i]);

    if (opts.verbose) {
      std::printf("lobpcg it %4d:", it);
      for (Index i = 0; i < std::min<Index>(4, res.size()); ++i)
        std::printf(" l=%.6g r=%.2e", lambda[i], res[i]);
      std::printf("\n");
    }
    const Index ke = cluster_k(lambda);
    bool done = x.cols() >= std::min<Index>(ke, m);
    for (Index i = 0; i < std::min<Index>(ke, x.cols()) && done; ++i)
      if (res[i] > opts.tol * std::max(1.0, std::abs(lambda[i]))) done = false;
    if (done) {
      SpectralResult out;
      const Index kk = std::min<Index>(ke, x.cols());
      out.eigenvalues = lambda.head(kk);
      out.residuals = res.head(kk);
      out.vectors = x.leftCols(kk);
      out.iterations = it;
      out.requested_k = opts.k;
      return out;
    }

    // preconditioned, constrained search directions, B-orthogonal to X and P
    MatXc w;
    if (precond) {
      w = (*precond)(r);
      r.resize(0, 0);
    } else {
      w = std::move(r);
    }
    constrain(w);
    w -= x * (bx.adjoint() * w);
    if (p.cols() > 0) w -= p * (bp.adjoint() * w);
    MatXc bw = b_op(w);
    {
      MatXc t = detail::svqb_transform(w.adjoint() * bw);
      if (t.cols() == 0) continue;
      w = (w * t).eval();
      bw = (bw * t).eval();
    }
    MatXc aw = a_op(w);

    // Rayleigh-Ritz over [X W P] assembled blockwise (the tall blocks are
    // never concatenated)
    const Index nx = x.cols(), nw = w.cols(), np = p.cols();
    const Index ns = nx + nw + np;
    MatXc gb = MatXc::Identity(ns, ns), ga(ns, ns);
    auto put = [&](MatXc& g, Index r0, Index c0, const MatXc& blockv) {
      g.block(r0, c0, blockv.rows(), blockv.cols()) = blockv;
      if (r0 != c0) g.block(c0, r0, blockv.cols(), blockv.rows()) = blockv.adjoint();
    };
    put(ga, 0, 0, x.adjoint() * ax);
    put(ga, 0, nx, x.adjoint() * aw);
    put(ga, nx, nx, w.adjoint() * aw);
    put(gb, 0, nx, x.adjoint() * bw);
    if (np > 0) {
      put(ga, 0, nx + nw, x.adjoint() * ap);
      put(ga, nx, nx + nw, w.adjoint() * ap);
      put(ga, nx + nw, nx + nw, p.adjoint() * ap);
      put(gb, 0, nx + nw, x.adjoint() * bp);
      put(gb, nx, nx + nw, w.adjoint() * bp);
    }
    MatXc tb = detail::svqb_transform(gb, 1e-10);
    if (tb.cols() == 0)
      throw SolveError("smallest_eigs: basis collapsed",
                       std::vector<Real>(best_res.data(), best_res.data() + best_res.size()));
    MatXc ga_t = tb.adjoint() * ga * tb;
    Eigen::SelfAdjointEigenSolver<MatXc> es(0.5 * (ga_t + ga_t.adjoint()));
    const Index nkeep = std::min<Index>(m, tb.cols());
    MatXc c = tb * es.eigenvectors().leftCols(nkeep);
    lambda = es.eigenvalues().head(nkeep);

    const MatXc cx = c.topRows(nx);
    const MatXc cw = c.middleRows(nx, nw);
    const MatXc cp = np > 0 ? c.bottomRows(np) : MatXc(0, nkeep);

    // conjugate block: the W/P part of the new Ritz vectors
    MatXc p_next = w * cw;
    if (np > 0) p_next.noalias() += p * cp;

    MatXc x_next = x * cx;
    x_next.noalias() += p_next;
    MatXc ax_next = ax * cx;
    ax_next.noalias() += aw * cw;
    if (np > 0) ax_next.noalias() += ap * cp;
    MatXc bx_next = bx * cx;
    bx_next.noalias() += bw * cw;
    if (np > 0) bx_next.noalias() += bp * cp;

    x = std::move(x_next);
    ax = std::move(ax_next);
    bx = std::move(bx_next);

    // keep only conjugate directions above the cancellation noise of the
    // A-products, then rebuild their products exactly
    Real op_scale = 0.0;
    for (Index j = 0; j < ax.cols(); ++j) op_scale = std::max(op_scale, ax.col(j).norm());
    const Real noise = 1e3 * std::numeric_limits<Real>::epsilon() * std::max(1.0, op_scale);
    std::vector<Index> keep;
    for (Index j = 0; j < p_next.cols(); ++j)
      if (p_next.col(j).norm() > noise) keep.push_back(j);
    if (static_cast<Index>(keep.size()) < p_next.cols()) {
      MatXc p2(n, static_cast<Index>(keep.size()));
      for (std::size_t j = 0; j < keep.size(); ++j) p2.col(static_cast<Index>(j)) = p_next.col(keep[j]);
      p_next = std::move(p2);
    }
    for (Index j = 0; j < p_next.cols(); ++j) p_next.col(j) /= p_next.col(j).norm();
    constrain(p_next);
    p = std::move(p_next);
    if (p.cols() > 0) {
      bp = b_op(p);
      MatXc tp = detail::svqb_transform(p.adjoint() * bp, 1e-8);
      p = (p * tp).eval();
      bp = (bp * tp).eval();
      ap = a_op(p);
    } else {
      ap.resize(n, 0);
      bp.resize(n, 0);
    }
  }
  throw SolveError("smallest_eigs: no convergence within max_iter",
                   std::vector<Real>(best_res.data(), best_res.data() + best_res.size()));
}

/// Shift-invert block iteration for the k smallest eigenvalues of a sparse
/// Hermitian pencil (K, M): factorises K + shift*M once and iterates with
/// Rayleigh-Ritz in the (K, M) pencil.  Suited to stiff 2D problems where a
/// direct factorisation is cheap; same result contract as smallest_eigs.
inline SpectralResult shift_invert_eigs(const SparseC& k_mat, const SparseC& m_mat,
                                        const EigOptions& opts, Real shift = 1.0) {
  const Index n = k_mat.rows();
  if (opts.k < 1 || opts.k > n) throw ParameterError("shift_invert_eigs: bad k");
  const Index m = std::min<Index>(n, opts.k + opts.block_extra);

  Eigen::SparseMatrix<Complex> a = (k_mat + shift * m_mat).pruned();
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success)
    throw SolveError("shift_invert_eigs: factorisation failed", {});

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<Real> dist(0.0, 1.0);
  MatXc x(n, m);
  for (Index j = 0; j < m; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = Complex(dist(rng), dist(rng));

  VecX lambda = VecX::Zero(m);
  VecX best_res = VecX::Constant(m, std::numeric_limits<Real>::infinity());
  for (int it = 1; it <= opts.max_iter; ++it) {
    x = lu.solve((m_mat * x).eval());
    MatXc bx = m_mat * x;
    MatXc t = detail::svqb_transform(x.adjoint() * bx);
    if (t.cols() == 0) throw SolveError("shift_invert_eigs: basis collapsed", {});
    x = (x * t).eval();
    bx = (bx * t).eval();
    MatXc kx = k_mat * x;
    MatXc ga = x.adjoint() * kx;
    Eigen::SelfAdjointEigenSolver<MatXc> es(0.5 * (ga + ga.adjoint()));
    x = (x * es.eigenvectors()).eval();
    kx = (kx * es.eigenvectors()).eval();
    bx = (bx * es.eigenvectors()).eval();
    lambda = es.eigenvalues();

    MatXc r = kx - bx * lambda.asDiagonal();
    VecX res(x.cols());
    for (Index i = 0; i < x.cols(); ++i) res[i] = r.col(i).norm();
    for (Index i = 0; i < res.size(); ++i) best_res[i] = std::min(best_res[i], res[i]);

    Index ke = std::min<Index>(opts.k, lambda.size());
    while (ke < lambda.size() &&
           lambda[ke] - lambda[ke - 1] <= 10.0 * opts.tol * std::max(1.0, std::abs(lambda[ke - 1])))
      ++ke;
    bool done = true;
    for (Index i = 0; i < ke; ++i)
      if (res[i] > opts.tol * std::max(1.0, std::abs(lambda[i]))) { done = false; break; }
    if (done) {
      SpectralResult out;
      out.eigenvalues = lambda.head(ke);
      out.residuals = res.head(ke);
      out.vectors = x.leftCols(ke);
      out.iterations = it;
      out.requested_k = opts.k;
      return out;
    }
  }
  throw SolveError("shift_invert_eigs: no convergence within max_iter",
                   std::vector<Real>(best_res.data(), best_res.data() + best_res.size()));
}

/// Preconditioned conjugate gradients for Hermitian positive definite systems.
inline VecXc pcg(const LinOp& a_op, const VecXc& rhs, Real rel_tol, int max_iter,
                 const LinOp* precond = nullptr, int* iterations = nullptr) {
  const Index n = a_op.n;
  VecXc x = VecXc::Zero(n);
  VecXc r = rhs;
  const Real bnorm = rhs.norm();
  if (bnorm == 0.0) return x;
  auto apply1 = [&](const VecXc& v) {
    MatXc out(n, 1);
    a_op.apply(v, out);
    return VecXc(out.col(0));
  };
  auto prec1 = [&](const VecXc& v) {
    if (!precond) return v;
    MatXc out(n, 1);
    precond->apply(v, out);
    return VecXc(out.col(0));
  };
  VecXc z = prec1(r);
  VecXc d = z;
  Complex rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    VecXc ad = apply1(d);
    const Complex alpha = rz / d.dot(ad);
    x += alpha * d;
    r -= alpha * ad;
    if (r.norm() <= rel_tol * bnorm) {
      if (iterations) *iterations = it + 1;
      return x;
    }
    z = prec1(r);
    const Complex rz_new = r.dot(z);
    d = z + (rz_new / rz) * d;
    rz = rz_new;
  }
  throw SolveError("pcg: no convergence within max_iter", {r.norm() / bnorm});
}

}  // namespace fibrehom
