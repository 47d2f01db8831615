//! Assembly of the discrete differential operator `L` and the lumped mass
//! `M` on grid domains.
//!
//! `L` discretizes `-Delta` with the standard second-difference stencil, so
//! its interior restriction `K L K^T` is symmetric positive definite. Rows
//! are assembled for every vertex, boundary included; the restriction to
//! the interior happens downstream in the solver. The biharmonic operator
//! is the mass-weighted composition `L diag(1/m) L`, which keeps the
//! sparsity bookkeeping in one place and is rank-checked at assembly.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::geometry::Domain;

/// Compressed-sparse-row matrix with consolidated entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    /// Builds CSR from coordinate triplets, summing duplicates. Columns
    /// within each row end up sorted ascending.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        symmetric: bool,
    ) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut rows = Vec::with_capacity(triplets.len());
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if rows.last() == Some(&r) && col_idx.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_idx.push(c);
                values.push(v);
            }
        }

        let mut row_ptr = vec![0usize; n_rows + 1];
        for &r in &rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator { n_rows, n_cols, row_ptr, col_idx, values, symmetric }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Row `i` as parallel (columns, values) slices; columns ascending.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// Largest absolute asymmetry `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Dense materialization of the submatrix with the given row and
    /// column index sets (in their given order).
    pub fn restricted_dense(&self, row_idx: &[usize], col_idx: &[usize]) -> DenseMatrix {
        let mut col_rank = vec![usize::MAX; self.n_cols];
        for (rank, &c) in col_idx.iter().enumerate() {
            col_rank[c] = rank;
        }
        let mut out = DenseMatrix::zeros(row_idx.len(), col_idx.len());
        for (ri, &r) in row_idx.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let rank = col_rank[c];
                if rank != usize::MAX {
                    out.set(ri, rank, v);
                }
            }
        }
        out
    }

    /// `self * diag(d) * other` via row-wise sparse accumulation. Terms are
    /// multiplied as `(a_ik * b_kj) * d_k`, which keeps the result exactly
    /// symmetric when both factors are the same symmetric matrix.
    pub fn scaled_product(&self, diag: &[f64], other: &SparseOperator) -> SparseOperator {
        assert_eq!(self.n_cols, other.n_rows);
        assert_eq!(diag.len(), self.n_cols);
        let n_rows = self.n_rows;
        let n_cols = other.n_cols;
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();

        let mut acc = vec![0.0f64; n_cols];
        let mut seen = vec![false; n_cols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..n_rows {
            let (acols, avals) = self.row(i);
            for (&k, &aik) in acols.iter().zip(avals) {
                let dk = diag[k];
                let (bcols, bvals) = other.row(k);
                for (&j, &bkj) in bcols.iter().zip(bvals) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += (aik * bkj) * dk;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            row_ptr[i + 1] = col_idx.len();
        }
        SparseOperator { n_rows, n_cols, row_ptr, col_idx, values, symmetric: false }
    }
}

/// Diagonal lumped mass: per-vertex volume weights that sum to the domain
/// volume.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedMass {
    diag: Vec<f64>,
}

impl LumpedMass {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `M f` applied elementwise.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.diag.len());
        self.diag.iter().zip(f).map(|(m, x)| m * x).collect()
    }
}

/// Second-difference discretization of `-Delta`, scaled by `1/h^2`:
/// diagonal `2*dim/h^2`, each existing axis neighbor `-1/h^2`. Rows are
/// assembled identically for every vertex.
pub fn assemble_laplacian(domain: &Domain) -> SparseOperator {
    let n = domain.n_per_axis();
    let n_v = domain.n_vertices();
    let dim = domain.dim();
    let h = domain.spacing();
    let inv_h2 = 1.0 / (h * h);
    let diag = (2 * dim) as f64 * inv_h2;

    let mut triplets = Vec::with_capacity(n_v * (2 * dim + 1));
    let mut stride = 1usize;
    for v in 0..n_v {
        triplets.push((v, v, diag));
    }
    for _axis in 0..dim {
        for v in 0..n_v {
            let i = (v / stride) % n;
            if i > 0 {
                triplets.push((v, v - stride, -inv_h2));
            }
            if i + 1 < n {
                triplets.push((v, v + stride, -inv_h2));
            }
        }
        stride *= n;
    }
    SparseOperator::from_triplets(n_v, n_v, triplets, true)
}

/// Trapezoidal lumped mass: `h^dim` per vertex, halved once per axis on
/// which the vertex sits at either grid end. Sums to the unit volume.
pub fn assemble_lumped_mass(domain: &Domain) -> LumpedMass {
    let n = domain.n_per_axis();
    let h = domain.spacing();
    let dim = domain.dim();
    let cell = h.powi(dim as i32);
    let diag = (0..domain.n_vertices())
        .map(|v| {
            let mut m = cell;
            for &i in &domain.axis_indices(v) {
                if i == 0 || i == n - 1 {
                    m *= 0.5;
                }
            }
            m
        })
        .collect();
    LumpedMass { diag }
}

/// Cap on the interior size for the assembly-time rank probe; larger
/// restrictions skip the probe.
pub const RANK_PROBE_CAP: usize = 4096;

/// Biharmonic operator `B = L diag(1/m) L` with `L` the full Laplacian
/// stencil and `m` the lumped masses. Requires a two-ring boundary so the
/// interior restriction stays full-rank; a Cholesky probe of the
/// restriction asserts this at assembly (for interiors up to
/// [`RANK_PROBE_CAP`]).
pub fn assemble_biharmonic(domain: &Domain) -> Result<SparseOperator> {
    if domain.boundary_ring_width() < 2 {
        return Err(Error::InvalidDomain(
            "biharmonic assembly needs boundary_ring_width >= 2".into(),
        ));
    }
    let lap = assemble_laplacian(domain);
    let mass = assemble_lumped_mass(domain);
    let inv_mass: Vec<f64> = mass.diag().iter().map(|m| 1.0 / m).collect();
    let mut b = lap.scaled_product(&inv_mass, &lap);
    b.symmetric = true;

    if domain.n_interior() > 0 && domain.n_interior() <= RANK_PROBE_CAP {
        let restricted = b.restricted_dense(domain.interior_idx(), domain.interior_idx());
        restricted.cholesky().map_err(|_| {
            Error::SingularOperator("restricted biharmonic operator failed rank probe".into())
        })?;
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_3x3_stencil_values() {
        let d = Domain::grid(3, 2, 1).unwrap();
        let l = assemble_laplacian(&d);
        // h = 1/2: diagonal 4/h^2 = 16, neighbors -1/h^2 = -4.
        assert_eq!(l.get(4, 4), 16.0);
        for nb in [1, 3, 5, 7] {
            assert_eq!(l.get(4, nb), -4.0);
        }
        assert_eq!(l.get(4, 0), 0.0);
    }

    #[test]
    fn laplacian_kills_constants_on_interior_rows() {
        for n in [3, 5, 9] {
            let d = Domain::grid(n, 2, 1).unwrap();
            let l = assemble_laplacian(&d);
            let v = vec![3.25; d.n_vertices()];
            let lv = l.matvec(&v);
            for &i in d.interior_idx() {
                assert_eq!(lv[i], 0.0, "interior row {i} not exactly zero");
            }
        }
    }

    #[test]
    fn laplacian_exactly_symmetric() {
        for n in [3, 6, 10] {
            let d = Domain::grid(n, 2, 1).unwrap();
            let l = assemble_laplacian(&d);
            assert_eq!(l.asymmetry(), 0.0);
        }
        let d3 = Domain::grid(4, 3, 1).unwrap();
        assert_eq!(assemble_laplacian(&d3).asymmetry(), 0.0);
    }

    #[test]
    fn lumped_mass_3x3() {
        let d = Domain::grid(3, 2, 1).unwrap();
        let m = assemble_lumped_mass(&d);
        assert_eq!(m.diag()[4], 0.25);
        assert_eq!(m.diag()[1], 0.125); // edge midpoint
        assert_eq!(m.diag()[0], 0.0625); // corner
        let total: f64 = m.diag().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lumped_mass_2x2_uniform() {
        let d = Domain::grid_with_options(2, 2, 1, true).unwrap();
        let m = assemble_lumped_mass(&d);
        assert_eq!(m.diag(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn lumped_mass_partition_of_unity() {
        for (n, dim) in [(100, 2), (7, 3)] {
            let d = Domain::grid(n, dim, 1).unwrap();
            let m = assemble_lumped_mass(&d);
            assert!(m.diag().iter().all(|&x| x > 0.0));
            let total: f64 = m.diag().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} dim={dim}: total {total}");
        }
    }

    #[test]
    fn biharmonic_5x5_single_interior() {
        let d = Domain::grid(5, 2, 2).unwrap();
        assert_eq!(d.n_interior(), 1);
        let b = assemble_biharmonic(&d).unwrap();
        let restricted = b.restricted_dense(d.interior_idx(), d.interior_idx());
        assert_eq!(restricted.rows(), 1);
        assert!(restricted.get(0, 0) > 0.0);
    }

    #[test]
    fn biharmonic_kills_constants_on_interior_rows() {
        let d = Domain::grid(7, 2, 2).unwrap();
        let b = assemble_biharmonic(&d).unwrap();
        let v = vec![-1.5; d.n_vertices()];
        let bv = b.matvec(&v);
        for &i in d.interior_idx() {
            assert_eq!(bv[i], 0.0);
        }
    }

    #[test]
    fn biharmonic_exactly_symmetric() {
        for n in [5, 8, 11] {
            let d = Domain::grid(n, 2, 2).unwrap();
            let b = assemble_biharmonic(&d).unwrap();
            assert_eq!(b.asymmetry(), 0.0, "n={n}");
        }
    }

    #[test]
    fn restrictions_are_positive_definite() {
        for n in [4, 8, 16, 32] {
            let d = Domain::grid(n, 2, 1).unwrap();
            let l = assemble_laplacian(&d);
            let r = l.restricted_dense(d.interior_idx(), d.interior_idx());
            assert!(r.cholesky().is_ok(), "laplacian restriction n={n}");
        }
        for n in [5, 8, 16, 32] {
            let d = Domain::grid(n, 2, 2).unwrap();
            let b = assemble_biharmonic(&d).unwrap();
            let r = b.restricted_dense(d.interior_idx(), d.interior_idx());
            assert!(r.cholesky().is_ok(), "biharmonic restriction n={n}");
        }
    }

    #[test]
    fn biharmonic_rejects_single_ring() {
        let d = Domain::grid(5, 2, 1).unwrap();
        assert!(assemble_biharmonic(&d).is_err());
    }

    #[test]
    fn csr_consolidates_duplicates() {
        let m = SparseOperator::from_triplets(
            2,
            2,
            vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 4.0)],
            false,
        );
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.nnz(), 3);
    }
}
