//! Exact reference solver for the constrained system `L u = M f`,
//! `S u = h`: direct Cholesky solves, the explicit Green's matrix
//! `G = (K L K^T)^{-1}`, and its eigendecomposition. Every learned
//! quantity in this crate is checked against these routines.

use crate::assembly::{LumpedMass, SparseOperator};
use crate::dense::{Cholesky, DenseMatrix};
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Default cap on the interior size for dense inversion and
/// eigendecomposition.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Reusable constrained solver: factors `K L K^T` once and solves for many
/// right-hand sides.
pub struct ConstrainedSolver<'a> {
    domain: &'a Domain,
    operator: &'a SparseOperator,
    factor: Cholesky,
}

impl<'a> ConstrainedSolver<'a> {
    pub fn new(operator: &'a SparseOperator, domain: &'a Domain) -> Result<Self> {
        let restricted = operator.restricted_dense(domain.interior_idx(), domain.interior_idx());
        let factor = restricted.cholesky()?;
        Ok(ConstrainedSolver { domain, operator, factor })
    }

    /// Right-hand side of the reduced system: `K M f - K L S^T h`.
    pub fn reduced_rhs(&self, mass: &LumpedMass, f: &[f64], h: &[f64]) -> Vec<f64> {
        let domain = self.domain;
        assert_eq!(f.len(), domain.n_vertices());
        assert_eq!(h.len(), domain.n_boundary());
        let kmf = domain.select_interior(&mass.apply(f));
        let lsh = self.operator.matvec(&domain.scatter_boundary(h));
        let klsh = domain.select_interior(&lsh);
        kmf.iter().zip(&klsh).map(|(a, b)| a - b).collect()
    }

    /// Solves for the full vertex vector `u = K^T u_int + S^T h`.
    pub fn solve(&self, mass: &LumpedMass, f: &[f64], h: &[f64]) -> Vec<f64> {
        let rhs = self.reduced_rhs(mass, f, h);
        let u_int = self.factor.solve(&rhs);
        let mut u = self.domain.scatter_interior(&u_int);
        for (&b, &hb) in self.domain.boundary_idx().iter().zip(h) {
            u[b] = hb;
        }
        u
    }
}

/// One-shot constrained solve; factors internally. See
/// [`ConstrainedSolver`] for amortized use.
pub fn solve_constrained(
    operator: &SparseOperator,
    mass: &LumpedMass,
    f: &[f64],
    h: &[f64],
    domain: &Domain,
) -> Result<Vec<f64>> {
    Ok(ConstrainedSolver::new(operator, domain)?.solve(mass, f, h))
}

fn check_dense_cap(domain: &Domain, cap: usize) -> Result<()> {
    let size = domain.n_interior();
    if size > cap {
        return Err(Error::DenseCapExceeded { size, cap });
    }
    Ok(())
}

/// The Green's matrix `G = (K L K^T)^{-1}`, materialized densely.
pub fn greens_matrix(operator: &SparseOperator, domain: &Domain) -> Result<DenseMatrix> {
    greens_matrix_capped(operator, domain, DEFAULT_DENSE_CAP)
}

pub fn greens_matrix_capped(
    operator: &SparseOperator,
    domain: &Domain,
    cap: usize,
) -> Result<DenseMatrix> {
    check_dense_cap(domain, cap)?;
    let restricted = operator.restricted_dense(domain.interior_idx(), domain.interior_idx());
    Ok(restricted.cholesky()?.inverse())
}

/// Solution via the explicit Green's-matrix path:
/// `u = K^T { G (K M f - K L S^T h) } + S^T h`. This is the independent
/// counterpart of [`ConstrainedSolver::solve`].
pub fn solve_via_greens(
    greens: &DenseMatrix,
    operator: &SparseOperator,
    mass: &LumpedMass,
    f: &[f64],
    h: &[f64],
    domain: &Domain,
) -> Vec<f64> {
    let kmf = domain.select_interior(&mass.apply(f));
    let klsh = domain.select_interior(&operator.matvec(&domain.scatter_boundary(h)));
    let rhs: Vec<f64> = kmf.iter().zip(&klsh).map(|(a, b)| a - b).collect();
    let u_int = greens.matvec(&rhs);
    let mut u = domain.scatter_interior(&u_int);
    for (&b, &hb) in domain.boundary_idx().iter().zip(h) {
        u[b] = hb;
    }
    u
}

/// Eigendecomposition `K L K^T = Phi diag(lambda) Phi^T` with eigenvalues
/// ascending. Fails with [`Error::NonPositiveSpectrum`] if any eigenvalue
/// is not strictly positive.
pub fn eigendecompose_restricted(
    operator: &SparseOperator,
    domain: &Domain,
) -> Result<(DenseMatrix, Vec<f64>)> {
    eigendecompose_restricted_capped(operator, domain, DEFAULT_DENSE_CAP)
}

pub fn eigendecompose_restricted_capped(
    operator: &SparseOperator,
    domain: &Domain,
    cap: usize,
) -> Result<(DenseMatrix, Vec<f64>)> {
    check_dense_cap(domain, cap)?;
    let restricted = operator.restricted_dense(domain.interior_idx(), domain.interior_idx());
    let (phi, lambda) = restricted.jacobi_eigen();
    if let Some(&bad) = lambda.iter().find(|&&l| l <= 0.0) {
        return Err(Error::NonPositiveSpectrum(bad));
    }
    Ok((phi, lambda))
}

/// Relative Frobenius error of the rank-`r` reconstruction of `G` that
/// keeps the `r` largest `1/lambda` modes.
pub fn low_rank_truncation_error(
    operator: &SparseOperator,
    domain: &Domain,
    rank: usize,
) -> Result<f64> {
    let n = domain.n_interior();
    if rank > n {
        return Err(Error::InvalidData(format!("rank {rank} exceeds interior size {n}")));
    }
    let greens = greens_matrix(operator, domain)?;
    let (phi, lambda) = eigendecompose_restricted(operator, domain)?;

    // Eigenvalues ascend, so the first `rank` columns carry the largest
    // 1/lambda weights.
    let mut approx = DenseMatrix::zeros(n, n);
    for m in 0..rank {
        let w = 1.0 / lambda[m];
        for i in 0..n {
            let pi = phi.get(i, m);
            if pi == 0.0 {
                continue;
            }
            for j in 0..n {
                let v = approx.get(i, j) + w * pi * phi.get(j, m);
                approx.set(i, j, v);
            }
        }
    }
    let mut diff = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = approx.get(i, j) - greens.get(i, j);
            diff += d * d;
        }
    }
    Ok(diff.sqrt() / greens.frobenius_norm())
}

/// Relative L2 distance used by the oracle cross-checks.
fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    (diff / norm.max(f64::MIN_POSITIVE)).sqrt()
}

/// Outcome of one oracle self-check.
#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Runs the two-path equivalence and eigendecomposition checks for one
/// operator on one domain, with `n_instances` random `(f, h)` pairs.
pub fn run_oracle_checks(
    operator: &SparseOperator,
    mass: &LumpedMass,
    domain: &Domain,
    n_instances: usize,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();

    let solver = ConstrainedSolver::new(operator, domain)?;
    let greens = greens_matrix(operator, domain)?;

    let mut worst = 0.0f64;
    for _ in 0..n_instances {
        let f: Vec<f64> = (0..domain.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..domain.n_boundary()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let direct = solver.solve(mass, &f, &h);
        let via_greens = solve_via_greens(&greens, operator, mass, &f, &h, domain);
        worst = worst.max(rel_l2(&via_greens, &direct));
    }
    lines.push(CheckLine {
        name: "solve-path equivalence".into(),
        passed: worst < 1e-10,
        detail: format!("worst relative L2 over {n_instances} instances: {worst:.3e}"),
    });

    let restricted = operator.restricted_dense(domain.interior_idx(), domain.interior_idx());
    let gl = greens.matmul(&restricted);
    let mut identity_err = 0.0f64;
    for i in 0..gl.rows() {
        for j in 0..gl.cols() {
            let expect = if i == j { 1.0 } else { 0.0 };
            identity_err = identity_err.max((gl.get(i, j) - expect).abs());
        }
    }
    lines.push(CheckLine {
        name: "G * (K L K^T) = I".into(),
        passed: identity_err < 1e-10,
        detail: format!("max deviation from identity: {identity_err:.3e}"),
    });

    match eigendecompose_restricted(operator, domain) {
        Ok((phi, lambda)) => {
            let n = domain.n_interior();
            let mut recon_err = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for m in 0..n {
                        s += phi.get(i, m) * phi.get(j, m) / lambda[m];
                    }
                    let d = s - greens.get(i, j);
                    recon_err += d * d;
                }
            }
            let rel = recon_err.sqrt() / greens.frobenius_norm();
            lines.push(CheckLine {
                name: "Phi Lambda^-1 Phi^T reconstructs G".into(),
                passed: rel < 1e-8,
                detail: format!("relative Frobenius error: {rel:.3e}"),
            });
            lines.push(CheckLine {
                name: "positive spectrum".into(),
                passed: lambda.iter().all(|&l| l > 0.0),
                detail: format!(
                    "lambda_min = {:.6e}",
                    lambda.first().copied().unwrap_or(f64::NAN)
                ),
            });
        }
        Err(e) => lines.push(CheckLine {
            name: "eigendecomposition".into(),
            passed: false,
            detail: format!("failed: {e}"),
        }),
    }

    Ok(lines)
}
