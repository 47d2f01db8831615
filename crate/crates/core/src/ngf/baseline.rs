//! Direct-regression baseline: the same backbone, but conditioned on the
//! source and boundary function values concatenated to the query-point
//! coordinates, regressing the solution pointwise. This is the
//! conditioning style that couples the network to the functions seen in
//! training.

use super::model::{
    add_linear, backbone_forward, coordinate_features, init_backbone_params, linear, BoundParams,
    NgfConfig,
};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::nncore::{load_checkpoint, save_checkpoint, ParamSet, Tape, Var};
use rand::SeedableRng;
use std::path::Path;

/// Extra input channels: source value, boundary indicator, boundary value
/// extended by zero to the interior.
const EXTRA_CHANNELS: usize = 3;

#[derive(Debug, Clone)]
pub struct DirectRegressor {
    pub config: NgfConfig,
    pub params: ParamSet,
}

impl DirectRegressor {
    pub fn new(config: NgfConfig, dim: usize) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        let d = config.feature_dim;
        let in_dim = config.lift_width(dim) + EXTRA_CHANNELS;
        let mut params = ParamSet::new();
        init_backbone_params(&mut params, in_dim, d, config.blocks, &mut rng);
        add_linear(&mut params, "head.hidden", d, d, 1.0, &mut rng);
        add_linear(&mut params, "head.out", d, 1, 1.0, &mut rng);
        DirectRegressor { config, params }
    }

    pub fn coord_features(&self, domain: &Domain) -> Vec<f64> {
        coordinate_features(domain, self.config.fourier_freqs, self.config.prod_freqs)
    }

    /// Per-point input rows: coordinate features concatenated with
    /// `f`, the boundary indicator, and `S^T h` (zero on the interior).
    pub fn assemble_inputs(
        &self,
        domain: &Domain,
        coord_feats: &[f64],
        f: &[f64],
        h: &[f64],
    ) -> Vec<f64> {
        let n = domain.n_vertices();
        let width = coord_feats.len() / n;
        assert_eq!(f.len(), n);
        assert_eq!(h.len(), domain.n_boundary());
        let h_ext = domain.scatter_boundary(h);
        let mut out = Vec::with_capacity(n * (width + EXTRA_CHANNELS));
        for v in 0..n {
            out.extend_from_slice(&coord_feats[v * width..(v + 1) * width]);
            out.push(f[v]);
            out.push(if domain.is_boundary_vertex(v) { 1.0 } else { 0.0 });
            out.push(h_ext[v]);
        }
        out
    }

    /// Taped forward pass to the pointwise solution regression.
    pub(crate) fn forward_taped(
        &self,
        tape: &mut Tape,
        inputs: &[f64],
        n_points: usize,
    ) -> (Vec<Var>, Var) {
        let width = inputs.len() / n_points;
        let x = tape.leaf([n_points, width], inputs.to_vec());
        let bound = BoundParams::bind(tape, &self.params);
        let phi = backbone_forward(tape, &bound, self.config.blocks, x);
        let hidden = linear(tape, &bound, "head.hidden", phi);
        let hidden = tape.gelu(hidden);
        let u = linear(tape, &bound, "head.out", hidden);
        (bound.vars, u)
    }

    /// Pointwise prediction for one `(f, h)` pair.
    pub fn predict(&self, domain: &Domain, f: &[f64], h: &[f64]) -> Vec<f64> {
        let coord_feats = self.coord_features(domain);
        let inputs = self.assemble_inputs(domain, &coord_feats, f, h);
        let mut tape = Tape::new();
        let (_, u) = self.forward_taped(&mut tape, &inputs, domain.n_vertices());
        tape.value(u).to_vec()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let hyper = serde_json::json!({
            "model": "direct",
            "config": self.config,
        });
        save_checkpoint(path, &hyper, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (hyper, params) = load_checkpoint(path)?;
        if hyper["model"] != "direct" {
            return Err(Error::InvalidData(format!(
                "checkpoint holds a {} model, expected direct",
                hyper["model"]
            )));
        }
        let config: NgfConfig = serde_json::from_value(hyper["config"].clone())?;
        Ok(DirectRegressor { config, params })
    }
}
