//! The factorized neural solution operator.
//!
//! A backbone maps vertex coordinates to per-point features `Phi` (never
//! seeing `f` or `h`); heads decode `Psi` and per-vertex masses from
//! `Phi`. Predictions compose the factors exactly as the discrete solve
//! does, in low-rank form:
//!
//! ```text
//! G     ~ (K Phi)(K Phi)^T
//! K L S^T ~ (K Psi)(S Psi)^T
//! u     = K^T { G (K M f - (K Psi)(S Psi)^T h) } + S^T h
//! ```
//!
//! The backbone is a stack of pre-norm residual blocks: a per-point
//! transform plus a learned global-context vector pooled over all points
//! and broadcast back. Coordinates enter through a fixed sinusoidal lift.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::nncore::kernels::{gemm_nn, gemm_tn};
use crate::nncore::{load_checkpoint, save_checkpoint, ParamSet, Tape, Var};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgfConfig {
    /// Feature dimension `d` (the rank budget of the learned factors).
    pub feature_dim: usize,
    /// Number of mixing blocks.
    pub blocks: usize,
    /// Sinusoidal frequencies per axis in the coordinate lift.
    pub fourier_freqs: usize,
    /// Frequencies per axis in the tensor-product sine features
    /// (`sin(k pi x_a) sin(m pi x_b)` per axis pair). These vanish on the
    /// domain boundary and align with the interior operator's eigenbasis.
    pub prod_freqs: usize,
    /// Init scale multiplier on the Psi head output layer; keeps early
    /// predictions near zero so the factor product starts small.
    pub psi_scale: f64,
    /// Init value of the final-norm gain. The prediction is quartic in
    /// the feature scale, so a sub-unit gain keeps the first optimizer
    /// steps in range; the gain is learnable and recovers.
    pub phi_gain: f64,
    /// Init value of the mass head output bias (pre-softplus).
    pub mass_bias: f64,
    /// Parameter init seed.
    pub seed: u64,
}

impl NgfConfig {
    /// Full-scale defaults: d = 128, eight blocks.
    pub fn full_scale() -> Self {
        NgfConfig {
            feature_dim: 128,
            blocks: 8,
            fourier_freqs: 4,
            prod_freqs: 4,
            psi_scale: 0.001,
            phi_gain: 0.25,
            mass_bias: -6.5,
            seed: 0,
        }
    }

    /// Desk-scale defaults: d = 64, four blocks.
    pub fn desk_scale() -> Self {
        NgfConfig { feature_dim: 64, blocks: 4, ..Self::full_scale() }
    }

    /// Input width of the coordinate lift for a `dim`-dimensional domain.
    pub fn lift_width(&self, dim: usize) -> usize {
        let pairs = dim * (dim - 1) / 2;
        dim + 2 * dim * self.fourier_freqs + pairs * self.prod_freqs * self.prod_freqs
    }
}

impl Default for NgfConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

/// Fixed sinusoidal featurization of vertex coordinates: the raw
/// coordinates, `sin(k pi x), cos(k pi x)` per axis for `k = 1..=freqs`,
/// then `sin(k pi x_a) sin(m pi x_b)` over axis pairs for
/// `k, m = 1..=prod_freqs`. Row-major over vertices.
pub fn coordinate_features(domain: &Domain, freqs: usize, prod_freqs: usize) -> Vec<f64> {
    let dim = domain.dim();
    let pairs = dim * (dim - 1) / 2;
    let width = dim + 2 * dim * freqs + pairs * prod_freqs * prod_freqs;
    let mut out = Vec::with_capacity(domain.n_vertices() * width);
    for v in 0..domain.n_vertices() {
        let p = domain.point(v);
        out.extend_from_slice(p);
        for &x in p {
            for k in 1..=freqs {
                let w = k as f64 * PI * x;
                out.push(w.sin());
                out.push(w.cos());
            }
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                for k in 1..=prod_freqs {
                    for m in 1..=prod_freqs {
                        out.push(
                            (k as f64 * PI * p[a]).sin() * (m as f64 * PI * p[b]).sin(),
                        );
                    }
                }
            }
        }
    }
    out
}

/// Parameter leaves bound to a tape, resolvable by name.
pub(crate) struct BoundParams<'p> {
    params: &'p ParamSet,
    pub vars: Vec<Var>,
}

impl<'p> BoundParams<'p> {
    pub fn bind(tape: &mut Tape, params: &'p ParamSet) -> Self {
        let vars = params
            .iter()
            .map(|p| tape.leaf(p.shape.clone(), p.values.clone()))
            .collect();
        BoundParams { params, vars }
    }

    pub fn get(&self, name: &str) -> Var {
        let i = self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("unbound parameter {name}"));
        self.vars[i]
    }
}

/// Adds backbone parameters (lift, blocks, final norm) to `params`.
pub(crate) fn init_backbone_params<R: Rng>(
    params: &mut ParamSet,
    in_dim: usize,
    d: usize,
    blocks: usize,
    rng: &mut R,
) {
    add_linear(params, "lift", in_dim, d, 1.0, rng);
    for b in 0..blocks {
        add_norm(params, &format!("block{b}.norm"), d);
        add_linear(params, &format!("block{b}.point"), d, d, 1.0, rng);
        add_linear(params, &format!("block{b}.ctx"), d, d, 1.0, rng);
        add_linear(params, &format!("block{b}.out"), d, d, 1.0, rng);
    }
    // Output affine (no normalization): row-wise norming would pin the
    // diagonal of the factor product (K Phi)(K Phi)^T to a near-constant.
    add_norm(params, "final_scale", d);
}

pub(crate) fn add_linear<R: Rng>(
    params: &mut ParamSet,
    name: &str,
    fan_in: usize,
    fan_out: usize,
    scale: f64,
    rng: &mut R,
) {
    let limit = scale * (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect();
    params.add(format!("{name}.w"), vec![fan_in, fan_out], w);
    params.add(format!("{name}.b"), vec![1, fan_out], vec![0.0; fan_out]);
}

fn add_norm(params: &mut ParamSet, name: &str, d: usize) {
    params.add(format!("{name}.gain"), vec![1, d], vec![1.0; d]);
    params.add(format!("{name}.bias"), vec![1, d], vec![0.0; d]);
}

pub(crate) fn linear(tape: &mut Tape, bound: &BoundParams, name: &str, x: Var) -> Var {
    let y = tape.matmul(x, bound.get(&format!("{name}.w")));
    tape.add_row(y, bound.get(&format!("{name}.b")))
}

fn affine_norm(tape: &mut Tape, bound: &BoundParams, name: &str, x: Var) -> Var {
    let n = tape.layernorm(x);
    let g = tape.mul_row(n, bound.get(&format!("{name}.gain")));
    tape.add_row(g, bound.get(&format!("{name}.bias")))
}

/// Backbone forward pass: `n x in_dim` coordinates to `n x d` features.
pub(crate) fn backbone_forward(
    tape: &mut Tape,
    bound: &BoundParams,
    blocks: usize,
    x: Var,
) -> Var {
    let lifted = linear(tape, bound, "lift", x);
    let mut hidden = tape.gelu(lifted);
    for b in 0..blocks {
        let t = affine_norm(tape, bound, &format!("block{b}.norm"), hidden);
        let p = linear(tape, bound, &format!("block{b}.point"), t);
        let p = tape.gelu(p);
        let pooled = tape.mean_rows(p);
        let ctx = linear(tape, bound, &format!("block{b}.ctx"), pooled);
        let ctx = tape.gelu(ctx);
        let mixed = tape.add_row(p, ctx);
        let out = linear(tape, bound, &format!("block{b}.out"), mixed);
        hidden = tape.add(hidden, out);
    }
    let scaled = tape.mul_row(hidden, bound.get("final_scale.gain"));
    tape.add_row(scaled, bound.get("final_scale.bias"))
}

/// Plain (value-space) feature bundle used for evaluation.
#[derive(Debug, Clone)]
pub struct Features {
    pub n_points: usize,
    pub feature_dim: usize,
    /// `n x d` backbone features.
    pub phi: Vec<f64>,
    /// `n x d` boundary-operator features.
    pub psi: Vec<f64>,
    /// `n` positive per-vertex masses.
    pub mass: Vec<f64>,
}

/// Prediction output: the full-vertex solution and the predicted masses.
#[derive(Debug, Clone)]
pub struct PredictionBundle {
    pub u: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Taped forward products of one NGF pass.
pub(crate) struct NgfForward {
    pub leaves: Vec<Var>,
    pub phi: Var,
    pub psi: Var,
    pub mass: Var,
}

#[derive(Debug, Clone)]
pub struct NgfModel {
    pub config: NgfConfig,
    pub params: ParamSet,
}

impl NgfModel {
    pub fn new(config: NgfConfig, dim: usize) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.feature_dim;
        let mut params = ParamSet::new();
        init_backbone_params(&mut params, config.lift_width(dim), d, config.blocks, &mut rng);
        add_linear(&mut params, "psi.hidden", d, d, 1.0, &mut rng);
        add_linear(&mut params, "psi.out", d, d, config.psi_scale, &mut rng);
        add_linear(&mut params, "mass.hidden", d, d, 1.0, &mut rng);
        add_linear(&mut params, "mass.out", d, 1, 1.0, &mut rng);
        let bias = params.index_of("mass.out.b").unwrap();
        params.get_mut(bias).values[0] = config.mass_bias;
        let gain = params.index_of("final_scale.gain").unwrap();
        params.get_mut(gain).values.fill(config.phi_gain);
        NgfModel { config, params }
    }

    pub fn coord_features(&self, domain: &Domain) -> Vec<f64> {
        coordinate_features(domain, self.config.fourier_freqs, self.config.prod_freqs)
    }

    /// Records the full feature pass (backbone and both heads) on a tape.
    pub(crate) fn forward_taped(
        &self,
        tape: &mut Tape,
        coord_feats: &[f64],
        n_points: usize,
    ) -> NgfForward {
        let width = coord_feats.len() / n_points;
        let x = tape.leaf([n_points, width], coord_feats.to_vec());
        let bound = BoundParams::bind(tape, &self.params);
        let phi = backbone_forward(tape, &bound, self.config.blocks, x);

        let psi_hidden = linear(tape, &bound, "psi.hidden", phi);
        let psi_hidden = tape.gelu(psi_hidden);
        let psi = linear(tape, &bound, "psi.out", psi_hidden);

        let mass_hidden = linear(tape, &bound, "mass.hidden", phi);
        let mass_hidden = tape.gelu(mass_hidden);
        let mass_z = linear(tape, &bound, "mass.out", mass_hidden);
        let mass = tape.softplus(mass_z);

        NgfForward { leaves: bound.vars, phi, psi, mass }
    }

    /// Records the solution prediction for one `(f, h)` pair on top of a
    /// taped forward pass. Boundary rows of the output equal `h` exactly.
    pub(crate) fn predict_taped(
        &self,
        tape: &mut Tape,
        fwd: &NgfForward,
        domain: &Domain,
        f: &[f64],
        h: &[f64],
    ) -> Var {
        let n = domain.n_vertices();
        let interior = domain.interior_idx();
        let boundary = domain.boundary_idx();

        let f_leaf = tape.leaf([n, 1], f.to_vec());
        let h_leaf = tape.leaf([boundary.len(), 1], h.to_vec());

        let mf = tape.mul(fwd.mass, f_leaf);
        let kmf = tape.gather_rows(mf, interior);

        let kphi = tape.gather_rows(fwd.phi, interior);
        let kpsi = tape.gather_rows(fwd.psi, interior);
        let spsi = tape.gather_rows(fwd.psi, boundary);

        // (K Psi)(S Psi)^T h as two thin products.
        let sth = tape.matmul_tn(spsi, h_leaf);
        let lth = tape.matmul(kpsi, sth);

        let rhs = tape.sub(kmf, lth);

        // (K Phi)(K Phi)^T rhs.
        let proj = tape.matmul_tn(kphi, rhs);
        let u_int = tape.matmul(kphi, proj);

        let scattered_int = tape.scatter_rows(u_int, interior, n);
        let scattered_bnd = tape.scatter_rows(h_leaf, boundary, n);
        tape.add(scattered_int, scattered_bnd)
    }

    /// Squared-norm empirical risk for one instance:
    /// `|u - u_pred|^2 + lambda |mass_pred - mass|^2`.
    pub(crate) fn loss_taped(
        &self,
        tape: &mut Tape,
        fwd: &NgfForward,
        domain: &Domain,
        inst: &crate::problems::ProblemInstance,
        lambda: f64,
    ) -> Var {
        let u_pred = self.predict_taped(tape, fwd, domain, &inst.f, &inst.h);
        let n = domain.n_vertices();
        let u_true = tape.leaf([n, 1], inst.u.clone());
        let du = tape.sub(u_pred, u_true);
        let du2 = tape.mul(du, du);
        let u_term = tape.sum(du2);

        let mass_true = tape.leaf([n, 1], inst.mass_diag.clone());
        let dm = tape.sub(fwd.mass, mass_true);
        let dm2 = tape.mul(dm, dm);
        let m_term = tape.sum(dm2);
        let m_scaled = tape.scale(m_term, lambda);
        tape.add(u_term, m_scaled)
    }

    /// Evaluates the feature bundle in value space. Features depend only
    /// on the domain geometry, never on `f` or `h`.
    pub fn features(&self, domain: &Domain) -> Features {
        let coord_feats = self.coord_features(domain);
        let n = domain.n_vertices();
        let mut tape = Tape::new();
        let fwd = self.forward_taped(&mut tape, &coord_feats, n);
        Features {
            n_points: n,
            feature_dim: self.config.feature_dim,
            phi: tape.value(fwd.phi).to_vec(),
            psi: tape.value(fwd.psi).to_vec(),
            mass: tape.value(fwd.mass).to_vec(),
        }
    }

    /// Applies the factorized operator to one `(f, h)` pair using
    /// precomputed features. This is the cheap per-instance path: the
    /// backbone never reruns.
    pub fn predict_from_features(
        feat: &Features,
        domain: &Domain,
        f: &[f64],
        h: &[f64],
    ) -> PredictionBundle {
        let n = domain.n_vertices();
        let d = feat.feature_dim;
        assert_eq!(feat.n_points, n);
        assert_eq!(f.len(), n);
        assert_eq!(h.len(), domain.n_boundary());
        let interior = domain.interior_idx();
        let boundary = domain.boundary_idx();
        let ni = interior.len();
        let nb = boundary.len();

        let gather = |src: &[f64], idx: &[usize]| -> Vec<f64> {
            let mut out = Vec::with_capacity(idx.len() * d);
            for &i in idx {
                out.extend_from_slice(&src[i * d..(i + 1) * d]);
            }
            out
        };
        let kphi = gather(&feat.phi, interior);
        let kpsi = gather(&feat.psi, interior);
        let spsi = gather(&feat.psi, boundary);

        let mut sth = vec![0.0; d];
        gemm_tn(d, nb, 1, &spsi, h, &mut sth, false);
        let mut lth = vec![0.0; ni];
        gemm_nn(ni, d, 1, &kpsi, &sth, &mut lth, false);

        let mut rhs = Vec::with_capacity(ni);
        for (pos, &i) in interior.iter().enumerate() {
            rhs.push(feat.mass[i] * f[i] - lth[pos]);
        }

        let mut proj = vec![0.0; d];
        gemm_tn(d, ni, 1, &kphi, &rhs, &mut proj, false);
        let mut u_int = vec![0.0; ni];
        gemm_nn(ni, d, 1, &kphi, &proj, &mut u_int, false);

        let mut u = domain.scatter_interior(&u_int);
        for (&b, &hb) in boundary.iter().zip(h) {
            u[b] = hb;
        }
        PredictionBundle { u, mass: feat.mass.clone() }
    }

    /// Full prediction for one instance (feature pass plus application).
    pub fn predict(&self, domain: &Domain, f: &[f64], h: &[f64]) -> PredictionBundle {
        let feat = self.features(domain);
        Self::predict_from_features(&feat, domain, f, h)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let hyper = serde_json::json!({
            "model": "ngf",
            "config": self.config,
        });
        save_checkpoint(path, &hyper, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (hyper, params) = load_checkpoint(path)?;
        if hyper["model"] != "ngf" {
            return Err(Error::InvalidData(format!(
                "checkpoint holds a {} model, expected ngf",
                hyper["model"]
            )));
        }
        let config: NgfConfig = serde_json::from_value(hyper["config"].clone())?;
        Ok(NgfModel { config, params })
    }
}

/// Reference (quadratic-cost) materialization helpers used by tests: the
/// learned Green's factor product and boundary operator as dense arrays.
pub fn materialize_neural_green(feat: &Features, domain: &Domain) -> Vec<f64> {
    let d = feat.feature_dim;
    let interior = domain.interior_idx();
    let ni = interior.len();
    let mut kphi = Vec::with_capacity(ni * d);
    for &i in interior {
        kphi.extend_from_slice(&feat.phi[i * d..(i + 1) * d]);
    }
    let mut g = vec![0.0; ni * ni];
    for i in 0..ni {
        for j in 0..ni {
            let a = &kphi[i * d..(i + 1) * d];
            let b = &kphi[j * d..(j + 1) * d];
            g[i * ni + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
        }
    }
    g
}
