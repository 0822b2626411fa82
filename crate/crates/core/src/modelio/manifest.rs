//! JSON model and model-set manifests.
//!
//! Matrices are row-major arrays. Numbers are written as shortest
//! round-trip decimal strings so that a save/load cycle is bit-exact on
//! every platform; plain JSON numbers are accepted on input.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cache::write_atomic;
use super::consensus::{build_consensus_q, grouped_from_reordered, permute_symmetric};
use super::ModelIoError;
use crate::lincontrol::{NodeBlock, StateSpaceModel, ValidationOptions};
use crate::robust::ModelSet;

/// A real number stored as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:?}", self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;

        impl Visitor<'_> for NumVisitor {
            type Value = Num;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a decimal string")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                v.trim().parse().map(Num).map_err(|_| E::custom(format!("not a number: {v:?}")))
            }
        }

        d.deserialize_any(NumVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// States.
    pub m: usize,
    /// Inputs.
    pub r: usize,
    /// Disturbances.
    pub q: usize,
    /// Nodes.
    pub n: usize,
}

/// State ordering of the stored matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Node by node; each node's states are angle, frequency, rest.
    #[default]
    Grouped,
    /// All angles, then all frequencies, then remaining states node by node.
    Reordered,
}

/// Explicit entries or a named constructor (`"consensus"` for Q, `"identity"` for R).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Values(Vec<Num>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub name: String,
    pub dims: Dims,
    #[serde(default)]
    pub ordering: Ordering,
    /// `[states, inputs]` per node.
    pub partition: Vec<[usize; 2]>,
    #[serde(rename = "A")]
    pub a: Vec<Num>,
    #[serde(rename = "B")]
    pub b: Vec<Num>,
    #[serde(rename = "D")]
    pub d: Vec<Num>,
    #[serde(rename = "Q")]
    pub q: MatrixSpec,
    #[serde(rename = "R")]
    pub r: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    /// Generator seed, for synthetic fixtures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn to_values(m: &DMatrix<f64>) -> Vec<Num> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| Num(m[(i, j)]))).collect()
}

fn matrix(name: &str, values: &[Num], rows: usize, cols: usize) -> Result<DMatrix<f64>, ModelIoError> {
    if values.len() != rows * cols {
        return Err(ModelIoError::validation(format!(
            "{name} has {} entries, dims require {rows}x{cols}",
            values.len()
        )));
    }
    let flat: Vec<f64> = values.iter().map(|n| n.0).collect();
    Ok(DMatrix::from_row_slice(rows, cols, &flat))
}

fn permute_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &pi) in perm.iter().enumerate() {
        out.set_row(pi, &m.row(i));
    }
    out
}

impl ModelManifest {
    /// Grouped-order manifest with every matrix written out.
    pub fn from_model(name: impl Into<String>, model: &StateSpaceModel) -> Self {
        Self {
            name: name.into(),
            dims: Dims { m: model.states(), r: model.inputs(), q: model.d.ncols(), n: model.nodes() },
            ordering: Ordering::Grouped,
            partition: model.partition.iter().map(|b| [b.states, b.inputs]).collect(),
            a: to_values(&model.a),
            b: to_values(&model.b),
            d: to_values(&model.d),
            q: MatrixSpec::Values(to_values(&model.q)),
            r: MatrixSpec::Values(to_values(&model.r)),
            notes: None,
            seed: None,
        }
    }

    pub fn partition(&self) -> Vec<NodeBlock> {
        self.partition.iter().map(|&[s, i]| NodeBlock::new(s, i)).collect()
    }

    /// Builds the node-grouped model and validates it.
    pub fn to_model(&self, opts: ValidationOptions) -> Result<StateSpaceModel, ModelIoError> {
        let Dims { m, r, q: w, n } = self.dims;
        let partition = self.partition();
        if partition.len() != n {
            return Err(ModelIoError::validation(format!(
                "partition lists {} nodes, dims declare {n}",
                partition.len()
            )));
        }
        let mut a = matrix("A", &self.a, m, m)?;
        let mut b = matrix("B", &self.b, m, r)?;
        let mut d = matrix("D", &self.d, m, w)?;
        let mut q = match &self.q {
            MatrixSpec::Values(v) => Some(matrix("Q", v, m, m)?),
            MatrixSpec::Named(s) if s == "consensus" => None,
            MatrixSpec::Named(s) => return Err(ModelIoError::validation(format!("unknown Q constructor {s:?}"))),
        };
        let r_mat = match &self.r {
            MatrixSpec::Values(v) => matrix("R", v, r, r)?,
            MatrixSpec::Named(s) if s == "identity" => DMatrix::identity(r, r),
            MatrixSpec::Named(s) => return Err(ModelIoError::validation(format!("unknown R constructor {s:?}"))),
        };

        let states: usize = partition.iter().map(|p| p.states).sum();
        if states != m {
            return Err(ModelIoError::validation(format!("partition covers {states} states, dims declare {m}")));
        }
        if self.ordering == Ordering::Reordered {
            let perm = grouped_from_reordered(&partition)?;
            a = permute_symmetric(&a, &perm);
            b = permute_rows(&b, &perm);
            d = permute_rows(&d, &perm);
            q = q.map(|q| permute_symmetric(&q, &perm));
        }
        let q = match q {
            Some(q) => q,
            None => {
                let (q, perm) = build_consensus_q(&partition)?;
                permute_symmetric(&q, &perm)
            }
        };

        let model = StateSpaceModel { a, b, d, q, r: r_mat, partition };
        let problems = model.violations(opts);
        if !problems.is_empty() {
            let detail = problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(ModelIoError::validation(format!("{}: {detail}", self.name)));
        }
        Ok(model)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ModelIoError> {
    let text = std::fs::read_to_string(path).map_err(|e| ModelIoError::parse(path, e))?;
    serde_json::from_str(&text).map_err(|e| ModelIoError::parse(path, e))
}

pub fn load_model(path: &Path, opts: ValidationOptions) -> Result<StateSpaceModel, ModelIoError> {
    read_json::<ModelManifest>(path)?.to_model(opts)
}

/// Writes any manifest as pretty JSON, atomically.
pub fn save_manifest<T: Serialize>(value: &T, path: &Path) -> Result<(), ModelIoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ModelIoError::parse(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    Weights(Vec<Num>),
    Named(String),
}

impl Default for PhiSpec {
    fn default() -> Self {
        Self::Named("uniform".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSetManifest {
    /// Model manifest paths, relative to this file.
    pub models: Vec<String>,
    #[serde(default)]
    pub phi: PhiSpec,
    /// 0-based index of the nominal model.
    #[serde(default)]
    pub nominal_index: usize,
}

pub fn load_model_set(path: &Path, opts: ValidationOptions) -> Result<ModelSet, ModelIoError> {
    let manifest: ModelSetManifest = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let models = manifest
        .models
        .iter()
        .map(|p| load_model(&base.join(p), opts))
        .collect::<Result<Vec<_>, _>>()?;
    let phi = match manifest.phi {
        PhiSpec::Named(s) if s == "uniform" => None,
        PhiSpec::Named(s) => return Err(ModelIoError::validation(format!("unknown phi spec {s:?}"))),
        PhiSpec::Weights(w) => Some(w.into_iter().map(|n| n.0).collect()),
    };
    ModelSet::new(models, phi, manifest.nominal_index).map_err(ModelIoError::validation)
}
