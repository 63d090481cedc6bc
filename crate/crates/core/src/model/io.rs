use super::{PhasePoint, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA: &str = "spt-mbqc/1";

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema: String,
    label: String,
    d: usize,
    #[serde(rename = "D")]
    logical_dim: usize,
    #[serde(rename = "Dj")]
    junk_dim: usize,
    #[serde(rename = "C")]
    byproducts: Vec<RawMatrix>,
    #[serde(rename = "B")]
    junk: Vec<RawMatrix>,
    kappa_norm: f64,
}

fn to_raw(m: &CMat) -> RawMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|k| [m[(r, k)].re, m[(r, k)].im]).collect())
        .collect()
}

fn from_raw(raw: &RawMatrix, dim: usize, name: &str) -> Result<CMat> {
    if raw.len() != dim || raw.iter().any(|row| row.len() != dim) {
        return Err(Error::Parse(format!("{name} is not {dim}x{dim}")));
    }
    Ok(CMat::from_fn(dim, dim, |r, k| c(raw[r][k][0], raw[r][k][1])))
}

pub fn to_json(point: &PhasePoint) -> String {
    let file = ModelFile {
        schema: SCHEMA.to_string(),
        label: point.label().to_string(),
        d: point.d(),
        logical_dim: point.logical_dim(),
        junk_dim: point.junk_dim(),
        byproducts: point.byproducts().iter().map(to_raw).collect(),
        junk: point.junk().iter().map(to_raw).collect(),
        kappa_norm: point.kappa_norm(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
    s.push('\n');
    s
}

/// Parses and validates a model document.
pub fn from_json(text: &str) -> Result<PhasePoint> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(SCHEMA) => {}
        Some(other) => {
            return Err(Error::SchemaVersion {
                found: other.to_string(),
                expected: SCHEMA.to_string(),
            })
        }
        None => return Err(Error::Parse("missing \"schema\" field".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    if file.byproducts.len() != file.d || file.junk.len() != file.d {
        return Err(Error::Parse(format!(
            "d = {} but {} C and {} B matrices",
            file.d,
            file.byproducts.len(),
            file.junk.len()
        )));
    }
    let byproducts = file
        .byproducts
        .iter()
        .enumerate()
        .map(|(i, m)| from_raw(m, file.logical_dim, &format!("C_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let junk = file
        .junk
        .iter()
        .enumerate()
        .map(|(i, m)| from_raw(m, file.junk_dim, &format!("B_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let point = PhasePoint::from_parts(file.label, byproducts, junk, file.kappa_norm)?;
    point.validate(DEFAULT_K_MAX)?;
    Ok(point)
}

pub fn save_model(point: &PhasePoint, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_json(point))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PhasePoint> {
    from_json(&std::fs::read_to_string(path)?)
}
