//! Function templates the problem generator samples from, and the
//! coefficient distributions for the train/test splits.

use super::Split;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// PDE families with a full dataset pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeFamily {
    Poisson2d,
    Biharmonic2d,
}

impl PdeFamily {
    /// Rings of prescribed boundary vertices: one for the second-order
    /// operator, two for the fourth-order one.
    pub fn boundary_ring_width(self) -> usize {
        match self {
            PdeFamily::Poisson2d => 1,
            PdeFamily::Biharmonic2d => 2,
        }
    }
}

/// A sampled template: family plus its coefficient tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TemplateSpec {
    Poisson2d { a: f64, b: f64 },
    Biharmonic2d { a: f64, b: f64, c: f64 },
    Thermal3dSource { a: f64, b: f64, c: f64, d: f64 },
    Thermal3dBoundary { e: f64, f: f64 },
}

impl TemplateSpec {
    /// Boundary value at a 2D point for the dataset families.
    pub fn boundary_value(&self, p: &[f64]) -> f64 {
        match *self {
            TemplateSpec::Poisson2d { a, b } => eval_poisson_template(a, b, p[0], p[1]),
            TemplateSpec::Biharmonic2d { a, b, c } => {
                eval_biharmonic_template(a, b, c, p[0], p[1])
            }
            _ => panic!("boundary_value is defined for the 2D dataset families"),
        }
    }

    pub fn coefficients(&self) -> Vec<(&'static str, f64)> {
        match *self {
            TemplateSpec::Poisson2d { a, b } => vec![("A", a), ("B", b)],
            TemplateSpec::Biharmonic2d { a, b, c } => vec![("A", a), ("B", b), ("C", c)],
            TemplateSpec::Thermal3dSource { a, b, c, d } => {
                vec![("A", a), ("B", b), ("C", c), ("D", d)]
            }
            TemplateSpec::Thermal3dBoundary { e, f } => vec![("E", e), ("F", f)],
        }
    }
}

/// Harmonic template `u(x,y) = A(x^3 - 3xy^2) + B(y^3 - 3x^2 y) + x^2`.
pub fn eval_poisson_template(a: f64, b: f64, x: f64, y: f64) -> f64 {
    a * (x.powi(3) - 3.0 * x * y * y) + b * (y.powi(3) - 3.0 * x * x * y) + x * x
}

/// Quartic template `u(x,y) = A(x^4 - 6x^2 y^2 + y^4) + B x^4 + C y^4`.
pub fn eval_biharmonic_template(a: f64, b: f64, c: f64, x: f64, y: f64) -> f64 {
    a * (x.powi(4) - 6.0 * x * x * y * y + y.powi(4)) + b * x.powi(4) + c * y.powi(4)
}

/// The potential whose Laplacian defines the 3D thermal source:
/// `sin(A pi x) cos(AC pi y) + (1 - cos(A pi x))(1 - sin(AB pi y)) + sin^2(AD pi z)`.
pub fn thermal_source_potential(a: f64, b: f64, c: f64, d: f64, x: f64, y: f64, z: f64) -> f64 {
    let wx = a * PI;
    (wx * x).sin() * (a * c * PI * y).cos()
        + (1.0 - (wx * x).cos()) * (1.0 - (a * b * PI * y).sin())
        + (a * d * PI * z).sin().powi(2)
}

/// Analytic Laplacian of [`thermal_source_potential`], expanded term by
/// term rather than differentiated numerically.
pub fn thermal_source_laplacian(a: f64, b: f64, c: f64, d: f64, x: f64, y: f64, z: f64) -> f64 {
    let wx = a * PI;
    let wy1 = a * c * PI;
    let wy2 = a * b * PI;
    let wz = a * d * PI;

    // sin(wx x) cos(wy1 y): both second derivatives are negative multiples.
    let t1 = -(wx * wx + wy1 * wy1) * (wx * x).sin() * (wy1 * y).cos();
    // (1 - cos(wx x)) (1 - sin(wy2 y)).
    let t2 = wx * wx * (wx * x).cos() * (1.0 - (wy2 * y).sin())
        + wy2 * wy2 * (wy2 * y).sin() * (1.0 - (wx * x).cos());
    // sin^2(wz z): d2/dz2 = 2 wz^2 cos(2 wz z).
    let t3 = 2.0 * wz * wz * (2.0 * wz * z).cos();
    t1 + t2 + t3
}

/// 3D boundary template `E(x^3 - 3xy^2) + F(y^3 - 3x^2 y) + (x^2 - z^2)`.
pub fn thermal_boundary_value(e: f64, f: f64, x: f64, y: f64, z: f64) -> f64 {
    e * (x.powi(3) - 3.0 * x * y * y) + f * (y.powi(3) - 3.0 * x * x * y) + (x * x - z * z)
}

/// Source and boundary values of the 3D thermal templates at one point.
pub fn eval_thermal_templates(
    source: &TemplateSpec,
    boundary: &TemplateSpec,
    x: f64,
    y: f64,
    z: f64,
) -> (f64, f64) {
    let f_value = match *source {
        TemplateSpec::Thermal3dSource { a, b, c, d } => thermal_source_laplacian(a, b, c, d, x, y, z),
        _ => panic!("source template must be Thermal3dSource"),
    };
    let h_value = match *boundary {
        TemplateSpec::Thermal3dBoundary { e, f } => thermal_boundary_value(e, f, x, y, z),
        _ => panic!("boundary template must be Thermal3dBoundary"),
    };
    (f_value, h_value)
}

/// Coefficient grids for the 3D thermal templates.
pub const THERMAL_A: [f64; 2] = [1.25, 2.5];
pub const THERMAL_BCD: [f64; 2] = [1.5, 3.5];
pub const THERMAL_E: [f64; 2] = [-1.0, 1.0];
pub const THERMAL_F: [f64; 2] = [0.0, 1.0];

/// Samples a coefficient tuple for a 2D family. Training coefficients are
/// i.i.d. uniform on `[-1, 1]`, test coefficients on `[1, 2]`, so the two
/// supports only touch at the boundary point.
pub fn sample_coefficients<R: Rng>(family: PdeFamily, split: Split, rng: &mut R) -> TemplateSpec {
    let (lo, hi) = match split {
        Split::Train => (-1.0, 1.0),
        Split::Test => (1.0, 2.0),
    };
    let mut draw = || rng.gen_range(lo..=hi);
    match family {
        PdeFamily::Poisson2d => TemplateSpec::Poisson2d { a: draw(), b: draw() },
        PdeFamily::Biharmonic2d => {
            TemplateSpec::Biharmonic2d { a: draw(), b: draw(), c: draw() }
        }
    }
}

/// Samples a 3D thermal source template from the discrete coefficient
/// grids. The 16 combinations are split by their lexicographic parity:
/// even ranks train, odd ranks test.
pub fn sample_thermal_source<R: Rng>(split: Split, rng: &mut R) -> TemplateSpec {
    let mut combos = Vec::with_capacity(8);
    let mut rank = 0usize;
    for &a in &THERMAL_A {
        for &b in &THERMAL_BCD {
            for &c in &THERMAL_BCD {
                for &d in &THERMAL_BCD {
                    let is_train = rank % 2 == 0;
                    if (split == Split::Train) == is_train {
                        combos.push(TemplateSpec::Thermal3dSource { a, b, c, d });
                    }
                    rank += 1;
                }
            }
        }
    }
    combos[rng.gen_range(0..combos.len())].clone()
}

/// Samples a 3D thermal boundary template: `E = -1` combinations train,
/// `E = 1` combinations test.
pub fn sample_thermal_boundary<R: Rng>(split: Split, rng: &mut R) -> TemplateSpec {
    let e = match split {
        Split::Train => THERMAL_E[0],
        Split::Test => THERMAL_E[1],
    };
    let f = THERMAL_F[rng.gen_range(0..2)];
    TemplateSpec::Thermal3dBoundary { e, f }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn poisson_template_values() {
        assert_eq!(eval_poisson_template(1.0, 0.0, 1.0, 1.0), -1.0);
        assert_eq!(eval_poisson_template(0.0, 0.0, 0.5, 0.3), 0.25);
        assert_eq!(eval_poisson_template(1.0, 1.0, 0.5, 0.5), -0.25);
    }

    #[test]
    fn biharmonic_template_values() {
        assert_eq!(eval_biharmonic_template(1.0, 0.0, 0.0, 1.0, 1.0), -4.0);
        let x: f64 = 0.8;
        assert!(
            (eval_biharmonic_template(0.0, 1.0, 1.0, x, x) - 2.0 * x.powi(4)).abs() < 1e-15
        );
        assert_eq!(eval_biharmonic_template(0.0, 0.0, 0.0, 0.3, 0.9), 0.0);
    }

    #[test]
    fn thermal_boundary_spot_values() {
        assert_eq!(thermal_boundary_value(1.0, 0.0, 1.0, 0.0, 0.0), 2.0);
        for z in [0.0, 0.3, 1.0] {
            assert_eq!(thermal_boundary_value(1.0, 1.0, 0.0, 0.0, z), -z * z);
        }
    }

    #[test]
    fn thermal_source_matches_finite_differences() {
        // Central second differences of the potential, Richardson
        // extrapolated once to kill the leading h^2 term.
        let fd_laplacian = |a: f64, b: f64, c: f64, d: f64, p: [f64; 3], h: f64| -> f64 {
            let g = |x: f64, y: f64, z: f64| thermal_source_potential(a, b, c, d, x, y, z);
            let mut acc = 0.0;
            for axis in 0..3 {
                let mut hi = p;
                let mut lo = p;
                hi[axis] += h;
                lo[axis] -= h;
                acc += (g(hi[0], hi[1], hi[2]) - 2.0 * g(p[0], p[1], p[2])
                    + g(lo[0], lo[1], lo[2]))
                    / (h * h);
            }
            acc
        };

        for &a in &THERMAL_A {
            for &b in &THERMAL_BCD {
                for &c in &THERMAL_BCD {
                    for &d in &THERMAL_BCD {
                        let mut worst = 0.0f64;
                        for p in [[0.21, 0.43, 0.67], [0.05, 0.91, 0.5], [0.77, 0.13, 0.33]] {
                            let h = 1e-3;
                            let coarse = fd_laplacian(a, b, c, d, p, h);
                            let fine = fd_laplacian(a, b, c, d, p, h / 2.0);
                            let extrapolated = (4.0 * fine - coarse) / 3.0;
                            let exact = thermal_source_laplacian(a, b, c, d, p[0], p[1], p[2]);
                            worst = worst.max((extrapolated - exact).abs());
                        }
                        assert!(worst < 1e-5, "A={a} B={b} C={c} D={d}: {worst:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn coefficient_supports() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            match sample_coefficients(PdeFamily::Poisson2d, Split::Train, &mut rng) {
                TemplateSpec::Poisson2d { a, b } => {
                    assert!((-1.0..=1.0).contains(&a) && (-1.0..=1.0).contains(&b))
                }
                _ => unreachable!(),
            }
            match sample_coefficients(PdeFamily::Biharmonic2d, Split::Test, &mut rng) {
                TemplateSpec::Biharmonic2d { a, b, c } => {
                    assert!([a, b, c].iter().all(|x| (1.0..=2.0).contains(x)))
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let draw = |seed: u64| -> Vec<TemplateSpec> {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..10)
                .map(|_| sample_coefficients(PdeFamily::Poisson2d, Split::Train, &mut rng))
                .collect()
        };
        assert_eq!(draw(99), draw(99));
    }

    #[test]
    fn thermal_sampling_respects_grids() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for split in [Split::Train, Split::Test] {
            for _ in 0..20 {
                match sample_thermal_source(split, &mut rng) {
                    TemplateSpec::Thermal3dSource { a, b, c, d } => {
                        assert!(THERMAL_A.contains(&a));
                        for v in [b, c, d] {
                            assert!(THERMAL_BCD.contains(&v));
                        }
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
}
