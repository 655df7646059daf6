use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_background, insert_lesion, read_stack, write_stack};
use super::{Dims, ImageStack, Label, LesionSpec, StackError};
use crate::seed::{derive_seed, stream};

/// Lesion shape shared by every signal-present case; always centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LesionShape {
    pub amplitude: f64,
    pub sigma_xy: f64,
    pub sigma_t: f64,
}

impl Default for LesionShape {
    fn default() -> Self {
        Self {
            amplitude: crate::CALIBRATED_LESION_AMPLITUDE,
            sigma_xy: 6.0,
            sigma_t: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub n_pairs: usize,
    pub dims: Dims,
    pub beta: f64,
    pub lesion: LesionShape,
    pub master_seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_pairs: 200,
            dims: Dims::standard(),
            beta: 3.0,
            lesion: LesionShape::default(),
            master_seed: 1,
        }
    }
}

impl CorpusSpec {
    pub fn lesion_spec(&self) -> LesionSpec {
        LesionSpec::centered(
            self.dims,
            self.lesion.amplitude,
            self.lesion.sigma_xy,
            self.lesion.sigma_t,
        )
    }

    /// Seed of case `i` (absent cases first, then present).
    pub fn case_seed(&self, i: usize) -> u64 {
        if i < self.n_pairs {
            derive_seed(self.master_seed, stream::ABSENT_BACKGROUND, i as u64)
        } else {
            derive_seed(
                self.master_seed,
                stream::PRESENT_BACKGROUND,
                (i - self.n_pairs) as u64,
            )
        }
    }

    pub fn generate_case(&self, i: usize) -> Result<ImageStack, StackError> {
        let bg = generate_background(self.dims, self.beta, self.case_seed(i))?;
        if i < self.n_pairs {
            Ok(bg)
        } else {
            insert_lesion(&bg, &self.lesion_spec())
        }
    }
}

/// `n_pairs` signal-absent stacks followed by `n_pairs` signal-present
/// stacks, each with an independent background.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub cases: Vec<ImageStack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub version: u32,
    pub master_seed: u64,
    pub spec: CorpusSpec,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn generate(spec: CorpusSpec) -> Result<Self, StackError> {
        if spec.n_pairs == 0 {
            return Err(StackError::Parameter {
                name: "n_pairs",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        let cases = (0..2 * spec.n_pairs)
            .into_par_iter()
            .map(|i| spec.generate_case(i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { spec, cases })
    }

    pub fn labels(&self) -> Vec<Label> {
        self.cases.iter().map(|c| c.label).collect()
    }

    /// Writes one stack file per case plus `manifest.json`; entry paths are
    /// relative to `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf, StackError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.cases.len());
        for (i, case) in self.cases.iter().enumerate() {
            let name = PathBuf::from(format!("case_{i:05}.stk"));
            write_stack(case, dir.join(&name))?;
            entries.push(ManifestEntry {
                path: name,
                label: case.label,
                seed: case.seed,
            });
        }
        let manifest = CorpusManifest {
            version: 1,
            master_seed: self.spec.master_seed,
            spec: self.spec,
            entries,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }

    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self, StackError> {
        let manifest_path = manifest_path.as_ref();
        let manifest: CorpusManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let mut cases = Vec::with_capacity(manifest.entries.len());
        for entry in &manifest.entries {
            let stack = read_stack(base.join(&entry.path))?;
            if stack.label != entry.label || stack.dims() != manifest.spec.dims {
                return Err(StackError::DimensionMismatch(format!(
                    "{} disagrees with the manifest",
                    entry.path.display()
                )));
            }
            cases.push(stack);
        }
        Ok(Self {
            spec: manifest.spec,
            cases,
        })
    }
}
