//! Problem generation: function templates, coefficient sampling with
//! train/test splits, oracle-solved instances, and dataset serialization.

mod dataset;
mod templates;

pub use dataset::{
    read_dataset, write_dataset, Dataset, InstanceRecord, Manifest, ProblemInstance, Split,
};
pub use templates::{
    eval_biharmonic_template, eval_poisson_template, eval_thermal_templates, sample_coefficients,
    sample_thermal_boundary, sample_thermal_source, thermal_boundary_value,
    thermal_source_laplacian, thermal_source_potential, PdeFamily, TemplateSpec, THERMAL_A,
    THERMAL_BCD, THERMAL_E, THERMAL_F,
};

use crate::assembly::{
    assemble_biharmonic, assemble_laplacian, assemble_lumped_mass, LumpedMass, SparseOperator,
};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::oracle::ConstrainedSolver;

/// Relative residual bound every stored instance must satisfy.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Grid domain matching a family's boundary handling: one prescribed ring
/// for the Laplacian, two for the biharmonic operator.
pub fn domain_for(family: PdeFamily, n_per_axis: usize) -> Result<Domain> {
    Domain::grid(n_per_axis, 2, family.boundary_ring_width())
}

/// Discrete operator and lumped mass for a family on its domain.
pub fn operator_for(family: PdeFamily, domain: &Domain) -> Result<(SparseOperator, LumpedMass)> {
    let mass = assemble_lumped_mass(domain);
    let op = match family {
        PdeFamily::Poisson2d => assemble_laplacian(domain),
        PdeFamily::Biharmonic2d => assemble_biharmonic(domain)?,
    };
    Ok((op, mass))
}

/// Generates a seeded dataset for a 2D family: boundary data sampled from
/// the family template, zero interior source, ground truth from the exact
/// constrained solve. Regeneration with the same seed is byte-identical.
pub fn generate_dataset(
    domain: &Domain,
    family: PdeFamily,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<Dataset> {
    use rand::SeedableRng;

    if domain.boundary_ring_width() != family.boundary_ring_width() {
        return Err(Error::InvalidDomain(format!(
            "family {family:?} needs boundary_ring_width {}, domain has {}",
            family.boundary_ring_width(),
            domain.boundary_ring_width()
        )));
    }
    let (operator, mass) = operator_for(family, domain)?;
    let solver = ConstrainedSolver::new(&operator, domain)?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(n_train + n_test);
    for (split, count) in [(Split::Train, n_train), (Split::Test, n_test)] {
        for _ in 0..count {
            let template = sample_coefficients(family, split, &mut rng);
            let f = vec![0.0; domain.n_vertices()];
            let h: Vec<f64> = domain
                .boundary_idx()
                .iter()
                .map(|&v| {
                    let p = domain.point(v);
                    template.boundary_value(p)
                })
                .collect();
            let u = solver.solve(&mass, &f, &h);
            let inst = ProblemInstance {
                domain_id: domain_id(domain),
                f,
                h,
                u,
                mass_diag: mass.diag().to_vec(),
                template,
                split,
            };
            validate_instance(&inst, &operator, &mass, domain)?;
            instances.push(inst);
        }
    }

    Ok(Dataset {
        manifest: Manifest {
            format: "NGF1".into(),
            family,
            grid: domain.n_per_axis(),
            dim: domain.dim(),
            boundary_ring_width: domain.boundary_ring_width(),
            seed,
            n_train,
            n_test,
            instances: instances
                .iter()
                .enumerate()
                .map(|(i, inst)| InstanceRecord {
                    file: dataset::instance_file_name(inst.split, i),
                    split: inst.split,
                    template: inst.template.clone(),
                })
                .collect(),
        },
        instances,
    })
}

pub fn domain_id(domain: &Domain) -> String {
    format!(
        "grid{}d{}_ring{}",
        domain.n_per_axis(),
        domain.dim(),
        domain.boundary_ring_width()
    )
}

/// Checks the stored-instance invariants: exact boundary pass-through and
/// a reduced-system residual below [`RESIDUAL_TOL`].
pub fn validate_instance(
    inst: &ProblemInstance,
    operator: &SparseOperator,
    mass: &LumpedMass,
    domain: &Domain,
) -> Result<()> {
    if inst.f.len() != domain.n_vertices()
        || inst.u.len() != domain.n_vertices()
        || inst.h.len() != domain.n_boundary()
        || inst.mass_diag.len() != domain.n_vertices()
    {
        return Err(Error::InvalidData("instance length mismatch".into()));
    }
    for (&b, &hb) in domain.boundary_idx().iter().zip(&inst.h) {
        if inst.u[b] != hb {
            return Err(Error::InvalidData(format!(
                "boundary pass-through violated at vertex {b}"
            )));
        }
    }
    let kmf = domain.select_interior(&mass.apply(&inst.f));
    let klsh = domain.select_interior(&operator.matvec(&domain.scatter_boundary(&inst.h)));
    let rhs: Vec<f64> = kmf.iter().zip(&klsh).map(|(a, b)| a - b).collect();
    // (K L K^T) u_int computed as K (L u_with_zero_boundary).
    let u_int_full = domain.scatter_interior(&domain.select_interior(&inst.u));
    let lu = domain.select_interior(&operator.matvec(&u_int_full));
    let res: f64 = lu.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    if res > RESIDUAL_TOL * scale.max(f64::MIN_POSITIVE) && res > 1e-14 {
        return Err(Error::InvalidData(format!(
            "residual {res:e} exceeds tolerance against rhs norm {scale:e}"
        )));
    }
    Ok(())
}

/// Source/boundary/reference triple for a manufactured continuum problem
/// `-Delta u* = g` driven through the mass-weighted system: the source
/// vector is `g(x_i) / m_i`, so `K M f` reproduces the collocated `g`
/// pointwise.
pub fn manufactured_poisson(
    domain: &Domain,
    u_star: impl Fn(f64, f64) -> f64,
    neg_laplacian: impl Fn(f64, f64) -> f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mass = assemble_lumped_mass(domain);
    let mut f = Vec::with_capacity(domain.n_vertices());
    let mut u_ref = Vec::with_capacity(domain.n_vertices());
    for v in 0..domain.n_vertices() {
        let p = domain.point(v);
        f.push(neg_laplacian(p[0], p[1]) / mass.diag()[v]);
        u_ref.push(u_star(p[0], p[1]));
    }
    let h: Vec<f64> = domain
        .boundary_idx()
        .iter()
        .map(|&v| {
            let p = domain.point(v);
            u_star(p[0], p[1])
        })
        .collect();
    (f, h, u_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::solve_constrained;

    #[test]
    fn dataset_counts_and_splits() {
        let domain = domain_for(PdeFamily::Poisson2d, 8).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 5, 3, 9).unwrap();
        assert_eq!(ds.instances.len(), 8);
        assert_eq!(ds.instances.iter().filter(|i| i.split == Split::Train).count(), 5);
        assert_eq!(ds.manifest.instances.len(), 8);
    }

    #[test]
    fn dataset_instances_validate() {
        for family in [PdeFamily::Poisson2d, PdeFamily::Biharmonic2d] {
            let domain = domain_for(family, 9).unwrap();
            let (op, mass) = operator_for(family, &domain).unwrap();
            let ds = generate_dataset(&domain, family, 4, 4, 123).unwrap();
            for inst in &ds.instances {
                validate_instance(inst, &op, &mass, &domain).unwrap();
            }
        }
    }

    #[test]
    fn deterministic_generation() {
        let domain = domain_for(PdeFamily::Poisson2d, 6).unwrap();
        let a = generate_dataset(&domain, PdeFamily::Poisson2d, 3, 3, 7).unwrap();
        let b = generate_dataset(&domain, PdeFamily::Poisson2d, 3, 3, 7).unwrap();
        for (x, y) in a.instances.iter().zip(&b.instances) {
            assert_eq!(x.u, y.u);
            assert_eq!(x.template, y.template);
        }
    }

    #[test]
    fn zero_coefficient_poisson_gives_x_squared_boundary() {
        let domain = domain_for(PdeFamily::Poisson2d, 6).unwrap();
        let template = TemplateSpec::Poisson2d { a: 0.0, b: 0.0 };
        for &v in domain.boundary_idx() {
            let p = domain.point(v);
            assert_eq!(template.boundary_value(p), p[0] * p[0]);
        }
    }

    #[test]
    fn manufactured_solution_second_order_convergence() {
        use std::f64::consts::PI;
        let u_star = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let neg_lap = move |x: f64, y: f64| 2.0 * PI * PI * u_star(x, y);

        let mut errors = Vec::new();
        for n in [17usize, 33] {
            let domain = Domain::grid(n, 2, 1).unwrap();
            let lap = assemble_laplacian(&domain);
            let mass = assemble_lumped_mass(&domain);
            let (f, h, u_ref) = manufactured_poisson(&domain, u_star, neg_lap);
            let u = solve_constrained(&lap, &mass, &f, &h, &domain).unwrap();
            let err = u
                .iter()
                .zip(&u_ref)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            errors.push(err);
        }
        let ratio = errors[0] / errors[1];
        assert!((3.0..=5.0).contains(&ratio), "convergence ratio {ratio}");
    }
}
