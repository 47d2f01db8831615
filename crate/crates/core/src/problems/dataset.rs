//! Dataset serialization: a `manifest.json` plus one binary file per
//! instance.
//!
//! Instance file layout (everything little-endian):
//!
//! ```text
//! "NGF1"  4 magic bytes
//! u64     length of f         (N_v)
//! u64     length of h         (N_b)
//! u64     length of u         (N_v)
//! u64     length of mass_diag (N_v)
//! f64[..] f, h, u, mass_diag  in row-major vertex order
//! ```

use super::templates::{PdeFamily, TemplateSpec};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"NGF1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One solved problem: source, boundary data, ground-truth solution, and
/// ground-truth lumped masses.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub domain_id: String,
    pub f: Vec<f64>,
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub mass_diag: Vec<f64>,
    pub template: TemplateSpec,
    pub split: Split,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub file: String,
    pub split: Split,
    pub template: TemplateSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub family: PdeFamily,
    pub grid: usize,
    pub dim: usize,
    pub boundary_ring_width: usize,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: Manifest,
    pub instances: Vec<ProblemInstance>,
}

impl Dataset {
    pub fn split_instances(&self, split: Split) -> Vec<&ProblemInstance> {
        self.instances.iter().filter(|i| i.split == split).collect()
    }
}

pub(super) fn instance_file_name(split: Split, index: usize) -> String {
    let tag = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    format!("{tag}_{index:04}.ngfd")
}

fn write_instance_file(path: &Path, inst: &ProblemInstance) -> Result<()> {
    let mut buf = Vec::with_capacity(
        4 + 32 + 8 * (inst.f.len() + inst.h.len() + inst.u.len() + inst.mass_diag.len()),
    );
    buf.extend_from_slice(MAGIC);
    for arr in [&inst.f, &inst.h, &inst.u, &inst.mass_diag] {
        buf.extend_from_slice(&(arr.len() as u64).to_le_bytes());
    }
    for arr in [&inst.f, &inst.h, &inst.u, &inst.mass_diag] {
        for &v in arr.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

fn read_instance_file(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 36 || &bytes[0..4] != MAGIC {
        return Err(Error::InvalidData(format!("{}: bad magic or truncated", path.display())));
    }
    let mut lens = [0usize; 4];
    for (k, len) in lens.iter_mut().enumerate() {
        let off = 4 + 8 * k;
        *len = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
    }
    let expected = 36 + 8 * lens.iter().sum::<usize>();
    if bytes.len() != expected {
        return Err(Error::InvalidData(format!(
            "{}: size {} does not match header ({expected})",
            path.display(),
            bytes.len()
        )));
    }
    let mut off = 36;
    let mut arrays = Vec::with_capacity(4);
    for &len in &lens {
        let mut arr = Vec::with_capacity(len);
        for _ in 0..len {
            arr.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        arrays.push(arr);
    }
    let mass = arrays.pop().unwrap();
    let u = arrays.pop().unwrap();
    let h = arrays.pop().unwrap();
    let f = arrays.pop().unwrap();
    Ok((f, h, u, mass))
}

/// Writes `manifest.json` and one `.ngfd` file per instance into `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest_json = serde_json::to_string_pretty(&dataset.manifest)?;
    fs::write(dir.join("manifest.json"), manifest_json.as_bytes())?;
    for (record, inst) in dataset.manifest.instances.iter().zip(&dataset.instances) {
        write_instance_file(&dir.join(&record.file), inst)?;
    }
    Ok(())
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format != "NGF1" {
        return Err(Error::InvalidData(format!("unknown dataset format {}", manifest.format)));
    }
    let domain_id = format!(
        "grid{}d{}_ring{}",
        manifest.grid, manifest.dim, manifest.boundary_ring_width
    );
    let mut instances = Vec::with_capacity(manifest.instances.len());
    for record in &manifest.instances {
        let (f, h, u, mass_diag) = read_instance_file(&dir.join(&record.file))?;
        instances.push(ProblemInstance {
            domain_id: domain_id.clone(),
            f,
            h,
            u,
            mass_diag,
            template: record.template.clone(),
            split: record.split,
        });
    }
    Ok(Dataset { manifest, instances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{domain_for, generate_dataset};

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let domain = domain_for(PdeFamily::Poisson2d, 6).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 3, 2, 11).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.instances.len(), ds.instances.len());
        for (a, b) in ds.instances.iter().zip(&back.instances) {
            assert_eq!(a.f, b.f);
            assert_eq!(a.h, b.h);
            assert_eq!(a.u, b.u);
            assert_eq!(a.mass_diag, b.mass_diag);
            assert_eq!(a.template, b.template);
            assert_eq!(a.split, b.split);
        }
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let domain = domain_for(PdeFamily::Biharmonic2d, 8).unwrap();
        for dir in [&dir_a, &dir_b] {
            let ds = generate_dataset(&domain, PdeFamily::Biharmonic2d, 2, 2, 5).unwrap();
            write_dataset(&ds, dir.path()).unwrap();
        }
        let mut names: Vec<String> = std::fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert!(names.len() > 1);
        for name in names {
            let a = std::fs::read(dir_a.path().join(&name)).unwrap();
            let b = std::fs::read(dir_b.path().join(&name)).unwrap();
            assert_eq!(a, b, "file {name} differs between regenerations");
        }
    }

    #[test]
    fn rejects_corrupted_file() {
        let dir = tempfile::tempdir().unwrap();
        let domain = domain_for(PdeFamily::Poisson2d, 5).unwrap();
        let ds = generate_dataset(&domain, PdeFamily::Poisson2d, 1, 1, 3).unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let victim = dir.path().join(&ds.manifest.instances[0].file);
        let mut bytes = std::fs::read(&victim).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&victim, bytes).unwrap();
        assert!(read_dataset(dir.path()).is_err());
    }
}
