//! Grid domains on the unit square/cube and the interior/boundary
//! selection maps.
//!
//! Selection is represented by index sets rather than 0/1 matrices: `K v`
//! and `S v` become gathers over `interior_idx` / `boundary_idx`, and the
//! transposes become scatters into a zero vector. Vertices are ordered
//! row-major (the x index varies fastest), and every serialized array in
//! this crate uses that ordering.

use crate::error::{Error, Result};

/// A discretized problem domain: a uniform grid on `[0,1]^dim` with a
/// partition of its vertices into interior and boundary sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    dim: usize,
    shape: Vec<usize>,
    spacing: f64,
    boundary_ring_width: usize,
    /// Vertex coordinates, `dim` entries per vertex, row-major order.
    points: Vec<f64>,
    interior_idx: Vec<usize>,
    boundary_idx: Vec<usize>,
    /// For each vertex, its rank within its own partition.
    local_rank: Vec<usize>,
    is_boundary: Vec<bool>,
}

impl Domain {
    /// Builds a grid domain with `n_per_axis` vertices per axis. Vertices
    /// whose axis index falls within `boundary_ring_width` of either end of
    /// any axis are boundary; the rest are interior. Fails if no interior
    /// vertex remains.
    pub fn grid(n_per_axis: usize, dim: usize, boundary_ring_width: usize) -> Result<Self> {
        Self::grid_with_options(n_per_axis, dim, boundary_ring_width, false)
    }

    /// As [`Domain::grid`], but `allow_degenerate` additionally permits
    /// domains whose interior is empty.
    pub fn grid_with_options(
        n_per_axis: usize,
        dim: usize,
        boundary_ring_width: usize,
        allow_degenerate: bool,
    ) -> Result<Self> {
        if n_per_axis < 2 {
            return Err(Error::InvalidDomain(format!(
                "need at least 2 vertices per axis, got {n_per_axis}"
            )));
        }
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidDomain(format!("dim must be 2 or 3, got {dim}")));
        }
        if boundary_ring_width == 0 {
            return Err(Error::InvalidDomain("boundary ring width must be positive".into()));
        }
        if 2 * boundary_ring_width >= n_per_axis && !allow_degenerate {
            return Err(Error::InvalidDomain(format!(
                "ring width {boundary_ring_width} leaves no interior on a grid of {n_per_axis}"
            )));
        }

        let n = n_per_axis;
        let ring = boundary_ring_width;
        let n_v = n.pow(dim as u32);
        let spacing = 1.0 / (n as f64 - 1.0);

        let mut points = Vec::with_capacity(n_v * dim);
        let mut interior_idx = Vec::new();
        let mut boundary_idx = Vec::new();
        let mut local_rank = vec![0usize; n_v];
        let mut is_boundary = vec![false; n_v];

        let on_ring = |i: usize| i < ring || i >= n - ring;
        for v in 0..n_v {
            let mut rem = v;
            let mut boundary = false;
            // Row-major: axis 0 (x) varies fastest.
            for _axis in 0..dim {
                let i = rem % n;
                rem /= n;
                points.push(i as f64 * spacing);
                boundary |= on_ring(i);
            }
            is_boundary[v] = boundary;
            if boundary {
                local_rank[v] = boundary_idx.len();
                boundary_idx.push(v);
            } else {
                local_rank[v] = interior_idx.len();
                interior_idx.push(v);
            }
        }

        Ok(Domain {
            dim,
            shape: vec![n; dim],
            spacing,
            boundary_ring_width,
            points,
            interior_idx,
            boundary_idx,
            local_rank,
            is_boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertices per axis.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn n_per_axis(&self) -> usize {
        self.shape[0]
    }

    /// Grid spacing `h = 1/(n-1)`.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn boundary_ring_width(&self) -> usize {
        self.boundary_ring_width
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn n_interior(&self) -> usize {
        self.interior_idx.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_idx.len()
    }

    /// Coordinates of vertex `v`.
    pub fn point(&self, v: usize) -> &[f64] {
        &self.points[v * self.dim..(v + 1) * self.dim]
    }

    /// All coordinates, `dim` per vertex, row-major vertex order.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Interior vertex indices, ascending (the rows of `K`).
    pub fn interior_idx(&self) -> &[usize] {
        &self.interior_idx
    }

    /// Boundary vertex indices, ascending (the rows of `S`).
    pub fn boundary_idx(&self) -> &[usize] {
        &self.boundary_idx
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.is_boundary[v]
    }

    /// Rank of vertex `v` within the boundary ordering. Panics if `v` is
    /// interior.
    pub fn boundary_rank(&self, v: usize) -> usize {
        assert!(self.is_boundary[v], "vertex {v} is not a boundary vertex");
        self.local_rank[v]
    }

    /// `K v`: the interior entries of a full-length vector.
    pub fn select_interior(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n_vertices(), "length mismatch in select_interior");
        self.interior_idx.iter().map(|&i| values[i]).collect()
    }

    /// `S v`: the boundary entries of a full-length vector.
    pub fn select_boundary(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n_vertices(), "length mismatch in select_boundary");
        self.boundary_idx.iter().map(|&i| values[i]).collect()
    }

    /// `K^T v`: scatter interior values into a zero full-length vector.
    pub fn scatter_interior(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n_interior(), "length mismatch in scatter_interior");
        let mut out = vec![0.0; self.n_vertices()];
        for (&i, &x) in self.interior_idx.iter().zip(values) {
            out[i] = x;
        }
        out
    }

    /// `S^T v`: scatter boundary values into a zero full-length vector.
    pub fn scatter_boundary(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n_boundary(), "length mismatch in scatter_boundary");
        let mut out = vec![0.0; self.n_vertices()];
        for (&i, &x) in self.boundary_idx.iter().zip(values) {
            out[i] = x;
        }
        out
    }

    /// Axis indices of vertex `v` in row-major order.
    pub fn axis_indices(&self, v: usize) -> Vec<usize> {
        let n = self.n_per_axis();
        let mut rem = v;
        (0..self.dim)
            .map(|_| {
                let i = rem % n;
                rem /= n;
                i
            })
            .collect()
    }

    /// Vertex index from axis indices.
    pub fn vertex_at(&self, idx: &[usize]) -> usize {
        let n = self.n_per_axis();
        idx.iter().rev().fold(0, |acc, &i| acc * n + i)
    }
}
