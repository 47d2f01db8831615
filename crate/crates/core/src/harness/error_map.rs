//! Per-vertex error-map emission for 2D grids: a CSV of absolute errors
//! and a max-normalized 8-bit PGM for quick visual inspection.

use crate::error::{Error, Result};
use crate::geometry::Domain;
use std::io::Write;
use std::path::Path;

/// Writes `<base>.csv` and `<base>.pgm` holding `|u_pred - u_true|` laid
/// out as the grid. Returns the maximum absolute error.
pub fn emit_error_map(
    domain: &Domain,
    u_true: &[f64],
    u_pred: &[f64],
    base: &Path,
) -> Result<f64> {
    if domain.dim() != 2 {
        return Err(Error::InvalidDomain("error maps require a 2D domain".into()));
    }
    assert_eq!(u_true.len(), domain.n_vertices());
    assert_eq!(u_pred.len(), domain.n_vertices());
    let n = domain.n_per_axis();
    let abs_err: Vec<f64> = u_true.iter().zip(u_pred).map(|(a, b)| (a - b).abs()).collect();
    let max_err = abs_err.iter().fold(0.0f64, |m, &x| m.max(x));

    let mut csv = String::new();
    for row in 0..n {
        for col in 0..n {
            if col > 0 {
                csv.push(',');
            }
            csv.push_str(&format!("{}", abs_err[row * n + col]));
        }
        csv.push('\n');
    }
    std::fs::write(base.with_extension("csv"), csv)?;

    let mut pgm = Vec::with_capacity(32 + n * n);
    write!(&mut pgm, "P5\n{n} {n}\n255\n")?;
    for &e in &abs_err {
        let v = if max_err > 0.0 { (e / max_err * 255.0).round() as u8 } else { 0 };
        pgm.push(v);
    }
    std::fs::write(base.with_extension("pgm"), pgm)?;
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_prediction_gives_black_map() {
        let dir = tempfile::tempdir().unwrap();
        let domain = Domain::grid(4, 2, 1).unwrap();
        let u: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let max =
            emit_error_map(&domain, &u, &u, &dir.path().join("map")).unwrap();
        assert_eq!(max, 0.0);
        let pgm = std::fs::read(dir.path().join("map.pgm")).unwrap();
        let body = &pgm[pgm.len() - 16..];
        assert!(body.iter().all(|&b| b == 0));
        let csv = std::fs::read_to_string(dir.path().join("map.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 4);
    }

    #[test]
    fn max_cell_matches_reported_max() {
        let dir = tempfile::tempdir().unwrap();
        let domain = Domain::grid(3, 2, 1).unwrap();
        let u = vec![0.0; 9];
        let mut p = vec![0.0; 9];
        p[5] = -0.75;
        let max = emit_error_map(&domain, &u, &p, &dir.path().join("m")).unwrap();
        assert_eq!(max, 0.75);
        let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
        let cells: Vec<f64> = csv
            .lines()
            .flat_map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()))
            .collect();
        let csv_max = cells.iter().fold(0.0f64, |m, &x| m.max(x));
        assert!((csv_max - max).abs() < 1e-12);
    }
}
