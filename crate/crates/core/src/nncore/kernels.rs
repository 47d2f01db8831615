//! Scalar compute kernels behind the tape ops. Row-parallel where the
//! work justifies it; per-row arithmetic stays sequential so results are
//! identical regardless of thread count.

use rayon::prelude::*;

/// Work threshold (multiply-adds) above which gemms parallelize over rows.
const PAR_THRESHOLD: usize = 1 << 17;

/// `out = [accumulate ? out : 0] + a(m x k) * b(k x n)`.
pub fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |i: usize, orow: &mut [f64]| {
        if !accumulate {
            orow.fill(0.0);
        }
        for l in 0..k {
            let av = a[i * k + l];
            let brow = &b[l * n..(l + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| row(i, orow));
    } else {
        for (i, orow) in out.chunks_mut(n).enumerate() {
            row(i, orow);
        }
    }
}

/// `out = [accumulate ? out : 0] + a(m x k) * b(n x k)^T`.
pub fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    let row = |i: usize, orow: &mut [f64]| {
        let arow = &a[i * k..(i + 1) * k];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let dot: f64 = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
            if accumulate {
                *o += dot;
            } else {
                *o = dot;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| row(i, orow));
    } else {
        for (i, orow) in out.chunks_mut(n).enumerate() {
            row(i, orow);
        }
    }
}

/// `out = [accumulate ? out : 0] + a(k x m)^T * b(k x n)`.
pub fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], out: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |i: usize, orow: &mut [f64]| {
        if !accumulate {
            orow.fill(0.0);
        }
        for l in 0..k {
            let av = a[l * m + i];
            let brow = &b[l * n..(l + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    };
    if m * k * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, orow)| row(i, orow));
    } else {
        for (i, orow) in out.chunks_mut(n).enumerate() {
            row(i, orow);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-form GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_prime(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, the derivative of softplus.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_nn_small() {
        // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut out = [0.0; 4];
        gemm_nn(2, 2, 2, &a, &b, &mut out, false);
        assert_eq!(out, [19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transposed_variants_agree_with_explicit_transpose() {
        let m = 3;
        let k = 4;
        let n = 2;
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 1.3).cos()).collect();
        let mut nn = vec![0.0; m * n];
        gemm_nn(m, k, n, &a, &b, &mut nn, false);

        // a^T stored as (k x m), then gemm_tn should reproduce nn.
        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for l in 0..k {
                at[l * m + i] = a[i * k + l];
            }
        }
        let mut tn = vec![0.0; m * n];
        gemm_tn(m, k, n, &at, &b, &mut tn, false);
        for (x, y) in nn.iter().zip(&tn) {
            assert!((x - y).abs() < 1e-14);
        }

        // b^T stored as (n x k), then gemm_nt should reproduce nn.
        let mut bt = vec![0.0; n * k];
        for l in 0..k {
            for j in 0..n {
                bt[j * k + l] = b[l * n + j];
            }
        }
        let mut nt = vec![0.0; m * n];
        gemm_nt(m, k, n, &a, &bt, &mut nt, false);
        for (x, y) in nn.iter().zip(&nt) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn activation_values() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(softplus(-100.0) > 0.0);
        assert!((softplus(100.0) - 100.0).abs() < 1e-12);
        assert!(gelu(0.0) == 0.0);
        assert!((gelu(3.0) - 3.0).abs() < 0.02);
    }
}
