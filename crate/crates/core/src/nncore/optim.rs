//! ADAM with a one-cycle learning-rate schedule, and gradient
//! accumulation over micro-batches.

use super::params::ParamSet;

/// One-cycle schedule: linear warmup from `max_lr / div_factor` to
/// `max_lr` over the first `warmup_frac` of the run, then cosine decay to
/// `max_lr / (div_factor * final_div_factor)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneCycle {
    pub max_lr: f64,
    pub total_steps: usize,
    pub warmup_frac: f64,
    pub div_factor: f64,
    pub final_div_factor: f64,
}

impl OneCycle {
    pub fn new(max_lr: f64, total_steps: usize) -> Self {
        OneCycle {
            max_lr,
            total_steps: total_steps.max(1),
            warmup_frac: 0.3,
            div_factor: 25.0,
            final_div_factor: 1e4,
        }
    }

    /// Step at which the learning rate peaks at exactly `max_lr`.
    pub fn peak_step(&self) -> usize {
        ((self.total_steps as f64 * self.warmup_frac).round() as usize)
            .clamp(1, self.total_steps)
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        let initial = self.max_lr / self.div_factor;
        let final_lr = initial / self.final_div_factor;
        let peak = self.peak_step();
        if step <= peak {
            initial + (self.max_lr - initial) * step as f64 / peak as f64
        } else {
            let span = (self.total_steps - peak).max(1) as f64;
            let t = ((step - peak) as f64 / span).min(1.0);
            final_lr
                + (self.max_lr - final_lr) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
        }
    }
}

/// Standard ADAM (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with bias
/// correction, driven by a [`OneCycle`] schedule.
#[derive(Debug, Clone)]
pub struct Adam {
    pub schedule: OneCycle,
    beta1: f64,
    beta2: f64,
    eps: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: usize,
}

impl Adam {
    pub fn new(schedule: OneCycle, params: &ParamSet) -> Self {
        Adam {
            schedule,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step_count
    }

    /// Applies one update. `grads` must match the parameter layout.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), params.len(), "gradient layout mismatch");
        assert!(
            self.step_count < self.schedule.total_steps,
            "optimizer stepped past its schedule"
        );
        let lr = self.schedule.lr_at(self.step_count);
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);

        for (p, (g, (m, v))) in (0..params.len()).zip(
            grads
                .iter()
                .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut())),
        ) {
            let values = &mut params.get_mut(p).values;
            assert_eq!(g.len(), values.len());
            for i in 0..values.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Averages gradients over `k` micro-batches before one optimizer step.
#[derive(Debug, Clone, Default)]
pub struct GradAccumulator {
    sums: Vec<Vec<f64>>,
    count: usize,
}

impl GradAccumulator {
    pub fn new(params: &ParamSet) -> Self {
        GradAccumulator { sums: params.zeros_like(), count: 0 }
    }

    pub fn add(&mut self, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), self.sums.len());
        for (acc, g) in self.sums.iter_mut().zip(grads) {
            for (a, &x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Mean gradients accumulated so far; resets the accumulator.
    pub fn take_mean(&mut self) -> Vec<Vec<f64>> {
        assert!(self.count > 0, "no gradients accumulated");
        let k = self.count as f64;
        let mean = self
            .sums
            .iter_mut()
            .map(|acc| {
                let out: Vec<f64> = acc.iter().map(|x| x / k).collect();
                acc.fill(0.0);
                out
            })
            .collect();
        self.count = 0;
        mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_params() -> ParamSet {
        let mut p = ParamSet::new();
        p.add("w", vec![2, 1], vec![0.5, -0.5]);
        p.add("b", vec![1], vec![0.1]);
        p
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut params = toy_params();
        let before = params.clone();
        let mut adam = Adam::new(OneCycle::new(1e-2, 10), &params);
        let zeros = params.zeros_like();
        adam.step(&mut params, &zeros);
        assert_eq!(params, before);
    }

    #[test]
    fn one_cycle_shape() {
        let max_lr = 1e-4;
        let sched = OneCycle::new(max_lr, 1000);
        let peak = sched.peak_step();
        assert_eq!(sched.lr_at(peak), max_lr);
        // Warmup start is max_lr / div_factor.
        assert!((sched.lr_at(0) - max_lr / 25.0).abs() < 1e-18);
        // Monotone decay after the peak.
        let mut prev = sched.lr_at(peak);
        for s in (peak + 1)..=1000 {
            let lr = sched.lr_at(s);
            assert!(lr <= prev + 1e-18, "lr rose at step {s}");
            prev = lr;
        }
        // Final lr well below max_lr / 1e4.
        assert!(sched.lr_at(1000) <= max_lr / 1e4);
    }

    #[test]
    fn accumulate_one_equals_plain() {
        let params = toy_params();
        let mut acc = GradAccumulator::new(&params);
        let g = vec![vec![0.3, -0.2], vec![0.05]];
        acc.add(&g);
        assert_eq!(acc.take_mean(), g);
    }

    #[test]
    fn accumulate_identical_microbatches_is_identity() {
        let params = toy_params();
        let g = vec![vec![0.4, 0.1], vec![-0.3]];

        // k = 2: one doubling then a halving, bit-exact.
        let mut acc = GradAccumulator::new(&params);
        acc.add(&g);
        acc.add(&g);
        assert_eq!(acc.take_mean(), g);

        // k = 8: sequential summation rounds, so compare within 1e-12.
        let mut acc = GradAccumulator::new(&params);
        for _ in 0..8 {
            acc.add(&g);
        }
        for (m, e) in acc.take_mean().iter().zip(&g) {
            for (x, y) in m.iter().zip(e.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn accumulated_mean_matches_directly_computed_mean() {
        use rand::{Rng, SeedableRng};
        let params = toy_params();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let batches: Vec<Vec<Vec<f64>>> = (0..8)
            .map(|_| {
                vec![
                    (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    (0..1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                ]
            })
            .collect();
        let mut acc = GradAccumulator::new(&params);
        for b in &batches {
            acc.add(b);
        }
        let mean = acc.take_mean();
        for p in 0..2 {
            for i in 0..mean[p].len() {
                let direct: f64 = batches.iter().map(|b| b[p][i]).sum::<f64>() / 8.0;
                assert!((mean[p][i] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adam_update_with_mean_gradient_matches_accumulated_path() {
        let g_mean = vec![vec![0.25, -0.75], vec![0.5]];
        let micro: Vec<Vec<Vec<f64>>> = (0..8)
            .map(|i| {
                // Micro-batches averaging to g_mean.
                let delta = (i as f64 - 3.5) * 0.01;
                vec![vec![0.25 + delta, -0.75 - delta], vec![0.5 + 2.0 * delta]]
            })
            .collect();

        let mut p1 = toy_params();
        let mut adam1 = Adam::new(OneCycle::new(1e-3, 4), &p1);
        adam1.step(&mut p1, &g_mean);

        let mut p2 = toy_params();
        let mut adam2 = Adam::new(OneCycle::new(1e-3, 4), &p2);
        let mut acc = GradAccumulator::new(&p2);
        for m in &micro {
            acc.add(m);
        }
        adam2.step(&mut p2, &acc.take_mean());

        for (a, b) in p1.iter().zip(p2.iter()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
