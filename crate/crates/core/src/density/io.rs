//! JSON model documents and gridded-density CSV files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gridded::{GridMeta, GriddedValues};
use super::params::{ModelFamily, NegativeModelParams, ParametricModel, PositiveModelParams};
use super::truncated::{DensityModel, NormalizationCheck, TruncatedDensity};
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;

/// On-disk form of a density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub family: ModelFamily,
    pub params: serde_json::Value,
    pub domain: DomainSpec,
    pub norm_const: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationCheck>,
}

impl ModelDocument {
    /// Document for a parametric density. Gridded densities go through
    /// [`save_gridded`] because their values live in a separate CSV.
    pub fn from_density(d: &TruncatedDensity) -> Result<Self> {
        let params = match d.model() {
            DensityModel::Parametric(ParametricModel::Negative(p)) => serde_json::to_value(p)?,
            DensityModel::Parametric(ParametricModel::Positive(p)) => serde_json::to_value(p)?,
            DensityModel::Gridded(_) => {
                return Err(Error::Config("gridded densities are saved with save_gridded".into()))
            }
        };
        Ok(Self {
            family: d.family(),
            params,
            domain: d.domain(),
            norm_const: d.norm_const(),
            normalization: Some(*d.normalization()),
        })
    }

    fn check(&self) -> NormalizationCheck {
        self.normalization.unwrap_or(NormalizationCheck {
            nodes_per_axis: 0,
            mass: 1.0 / self.norm_const,
            coarse_nodes_per_axis: 0,
            coarse_mass: 1.0 / self.norm_const,
            relative_delta: 0.0,
            converged: true,
        })
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_model(d: &TruncatedDensity, path: &Path) -> Result<()> {
    write_text(path, &to_json_string(&ModelDocument::from_density(d)?)?)
}

/// Loads any model document; gridded values are read from the CSV named in
/// the sidecar, relative to the sidecar's directory.
pub fn load_model(path: &Path) -> Result<TruncatedDensity> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ModelDocument = serde_json::from_str(&text)?;
    let model = match doc.family {
        ModelFamily::Negative => {
            let p: NegativeModelParams = serde_json::from_value(doc.params.clone())?;
            DensityModel::Parametric(ParametricModel::Negative(p))
        }
        ModelFamily::Positive => {
            let p: PositiveModelParams = serde_json::from_value(doc.params.clone())?;
            DensityModel::Parametric(ParametricModel::Positive(p))
        }
        ModelFamily::Gridded => {
            let meta: GridMeta = serde_json::from_value(doc.params.clone())?;
            let dir = path.parent().unwrap_or(Path::new("."));
            DensityModel::Gridded(read_grid_csv(&dir.join(&meta.values_csv), &meta)?)
        }
    };
    TruncatedDensity::from_parts(model, doc.domain, doc.norm_const, doc.check())
}

/// Writes `(node_x, node_y, value)` triples plus a JSON sidecar. Values are
/// the raw grid values; the sidecar's `norm_const` scales them to unit mass.
pub fn save_gridded(d: &TruncatedDensity, csv_path: &Path, sidecar_path: &Path) -> Result<()> {
    let DensityModel::Gridded(grid) = d.model() else {
        return Err(Error::Config("save_gridded needs a gridded density".into()));
    };
    let mut out = String::from("node_x,node_y,value\n");
    for i in 0..grid.n {
        for j in 0..grid.n {
            out.push_str(&format!("{},{},{}\n", grid.node(i), grid.node(j), grid.at(i, j)));
        }
    }
    write_text(csv_path, &out)?;
    let name = csv_path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config(format!("bad CSV path {}", csv_path.display())))?;
    let doc = ModelDocument {
        family: ModelFamily::Gridded,
        params: serde_json::to_value(grid.meta(name))?,
        domain: d.domain(),
        norm_const: d.norm_const(),
        normalization: Some(*d.normalization()),
    };
    write_text(sidecar_path, &to_json_string(&doc)?)
}

fn read_grid_csv(path: &Path, meta: &GridMeta) -> Result<GriddedValues> {
    let mut rdr = csv::Reader::from_path(path)?;
    let n = meta.nodes_per_axis;
    let mut values = Vec::with_capacity(n * n);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let v: f64 = rec
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Row { line: row as u64 + 2, message: "bad grid value".into() })?;
        values.push(v);
    }
    GriddedValues::new(meta.lo, meta.hi, n, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::geometry::LogPoint;
    use crate::quadrature::QuadratureSpec;

    #[test]
    fn parametric_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (pos, _) = fixtures::densities(&QuadratureSpec::gauss_legendre(128)).unwrap();
        let path = dir.path().join("pos.json");
        save_model(&pos, &path).unwrap();
        let back = load_model(&path).unwrap();
        let p = LogPoint::new(4.0, 4.2);
        assert_eq!(back.density(p), pos.density(p));
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for key in ["family", "params", "domain", "norm_const"] {
            assert!(doc.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn gridded_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GriddedValues::sample_function(DomainSpec::default(), 9, |p| 1.0 + p.lx * p.ly).unwrap();
        let d = TruncatedDensity::gridded(g).unwrap();
        save_gridded(&d, &dir.path().join("g.csv"), &dir.path().join("g.json")).unwrap();
        let back = load_model(&dir.path().join("g.json")).unwrap();
        let p = LogPoint::new(2.2, 5.1);
        assert!((back.density(p) - d.density(p)).abs() < 1e-15);
    }
}
