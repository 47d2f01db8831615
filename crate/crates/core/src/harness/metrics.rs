//! Evaluation metrics and the report structure shared by the experiment
//! protocols.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative L2 distance `|pred - true|_2 / |true|_2`.
pub fn relative_l2(u_true: &[f64], u_pred: &[f64]) -> Result<f64> {
    assert_eq!(u_true.len(), u_pred.len(), "length mismatch in relative_l2");
    let norm: f64 = u_true.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff: f64 = u_true
        .iter()
        .zip(u_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub per_instance: Vec<f64>,
    pub mean: f64,
}

impl SplitMetrics {
    pub fn from_errors(per_instance: Vec<f64>) -> Self {
        let mean = if per_instance.is_empty() {
            0.0
        } else {
            per_instance.iter().sum::<f64>() / per_instance.len() as f64
        };
        SplitMetrics { per_instance, mean }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub train: SplitMetrics,
    pub test: SplitMetrics,
    /// test mean / train mean.
    pub generalization_ratio: f64,
    pub wall_clock_seconds: f64,
    /// Reference errors from the original full-resolution experiments,
    /// recorded for context next to the desk-scale numbers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_full_scale: Option<serde_json::Value>,
}

impl MetricsReport {
    pub fn new(
        model: impl Into<String>,
        seed: u64,
        config: serde_json::Value,
        train_errors: Vec<f64>,
        test_errors: Vec<f64>,
        wall_clock_seconds: f64,
    ) -> Self {
        let train = SplitMetrics::from_errors(train_errors);
        let test = SplitMetrics::from_errors(test_errors);
        let generalization_ratio = if train.mean > 0.0 { test.mean / train.mean } else { 0.0 };
        MetricsReport {
            model: model.into(),
            seed,
            config,
            train,
            test,
            generalization_ratio,
            wall_clock_seconds,
            reference_full_scale: None,
        }
    }

    /// The report minus its wall clock: the part that must be bit-stable
    /// across reruns with one seed.
    pub fn deterministic_view(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().unwrap().remove("wall_clock_seconds");
        v
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_prediction_is_zero() {
        let u = vec![1.0, -2.0, 3.0];
        assert_eq!(relative_l2(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn pythagorean_case() {
        let u = vec![0.0, 3.0, 4.0];
        let p = vec![0.0, 0.0, 0.0];
        assert_eq!(relative_l2(&u, &p).unwrap(), 1.0);
    }

    #[test]
    fn single_entry() {
        assert_eq!(relative_l2(&[2.0], &[3.0]).unwrap(), 0.5);
    }

    #[test]
    fn zero_reference_rejected() {
        assert!(matches!(relative_l2(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroReference)));
    }

    #[test]
    fn scale_covariance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let u: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let alpha: f64 = rng.gen_range(0.1..10.0);
            let su: Vec<f64> = u.iter().map(|x| alpha * x).collect();
            let sp: Vec<f64> = p.iter().map(|x| alpha * x).collect();
            let base = relative_l2(&u, &p).unwrap();
            let scaled = relative_l2(&su, &sp).unwrap();
            assert!((base - scaled).abs() < 1e-15 * base.max(1.0));
        }
    }

    #[test]
    fn deterministic_view_drops_wall_clock() {
        let r = MetricsReport::new(
            "ngf",
            1,
            serde_json::json!({}),
            vec![0.1, 0.2],
            vec![0.3],
            12.5,
        );
        let v = r.deterministic_view();
        assert!(v.get("wall_clock_seconds").is_none());
        assert_eq!(v["train"]["mean"], serde_json::json!(0.15000000000000002));
    }
}
