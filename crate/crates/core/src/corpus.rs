// SPDX-License-Identifier: Apache-2.0

//! The standard test maps, in code and as a directory of spec files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{IntegerMatrix2, MapSpec, PerturbationTerm};

pub const MANIFEST_FORMAT: &str = "anosov-corpus";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub spec: MapSpec,
}

fn cat_plus(eps: f64, label: &str) -> MapSpec {
    MapSpec::new(IntegerMatrix2::cat(), vec![PerturbationTerm::new(0, [1, 0], eps, 0.0)], label).expect("hyperbolic")
}

/// Linear cat map, its two sine perturbations, and a `det = -1` matrix.
pub fn builtin() -> Vec<CorpusEntry> {
    let m = |a, b, c, d| IntegerMatrix2::new(a, b, c, d).expect("unimodular");
    vec![
        CorpusEntry { name: "cat".into(), spec: MapSpec::linear(IntegerMatrix2::cat(), "cat").expect("hyperbolic") },
        CorpusEntry { name: "cat_eps002".into(), spec: cat_plus(0.02, "cat+0.02sin") },
        CorpusEntry { name: "cat_eps005".into(), spec: cat_plus(0.05, "cat+0.05sin") },
        CorpusEntry { name: "sigma_minus".into(), spec: MapSpec::linear(m(0, 1, 1, -1), "sigma-minus").expect("hyperbolic") },
    ]
}

pub fn builtin_spec(name: &str) -> Option<MapSpec> {
    builtin().into_iter().find(|e| e.name == name).map(|e| e.spec)
}

/// Reads `manifest.json` in `dir` and every spec it lists.
pub fn load_dir(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Parse(format!("not a corpus manifest: {}", manifest.format)));
    }
    manifest
        .entries
        .iter()
        .map(|e| {
            let path: PathBuf = dir.join(&e.file);
            let spec = MapSpec::from_json(&std::fs::read_to_string(&path)?)?;
            Ok(CorpusEntry { name: e.name.clone(), spec })
        })
        .collect()
}
