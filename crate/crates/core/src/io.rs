//! JSON model files and serialization helpers.
//!
//! A quadratic-affine model file looks like
//!
//! ```json
//! { "n": 2, "m": 1,
//!   "F0": [[-1, 0], [0, -1]],
//!   "F":  [[[0, 1], [-1, 0]], [[0, 0], [0, 0]]],
//!   "Q":  [[1, 0], [0, 1]],
//!   "R0": [[1, 0], [0, 1]],
//!   "G":  [[1], [0]] }
//! ```
//!
//! Matrices are row-major arrays of rows. An optional `u_bar` array records
//! the constant input the model is meant to be analysed at.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::PhError;
use crate::linalg;
use crate::model::QuadraticAffinePH;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "F0")]
    pub f0: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R0")]
    pub r0: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bar: Option<Vec<f64>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    // The inner errors are rendered into the message rather than exposed as
    // sources, so error chains do not repeat them.
    #[error("cannot read model file {path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("malformed model file: {0}")]
    Parse(serde_json::Error),
    #[error("field `{field}`: {message}")]
    Shape { field: String, message: String },
    #[error(transparent)]
    Model(#[from] PhError),
}

impl From<serde_json::Error> for ModelFileError {
    fn from(e: serde_json::Error) -> Self {
        ModelFileError::Parse(e)
    }
}

fn matrix_field(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>, ModelFileError> {
    if rows.len() != nrows {
        return Err(ModelFileError::Shape {
            field: field.to_string(),
            message: format!("expected {nrows} rows, found {}", rows.len()),
        });
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(ModelFileError::Shape {
            field: field.to_string(),
            message: format!("row {i} has {} entries, expected {ncols}", row.len()),
        });
    }
    Ok(linalg::from_rows(rows))
}

impl ModelFile {
    pub fn from_system(sys: &QuadraticAffinePH, u_bar: Option<&DVector<f64>>) -> Self {
        Self {
            n: sys.n(),
            m: sys.m(),
            f0: linalg::to_rows(sys.f0()),
            f: sys.f_list().iter().map(linalg::to_rows).collect(),
            q: linalg::to_rows(sys.q()),
            r0: linalg::to_rows(sys.r0()),
            g: linalg::to_rows(sys.g()),
            u_bar: u_bar.map(|u| u.iter().copied().collect()),
        }
    }

    pub fn to_system(&self) -> Result<QuadraticAffinePH, ModelFileError> {
        let (n, m) = (self.n, self.m);
        let f0 = matrix_field("F0", &self.f0, n, n)?;
        if self.f.len() != n {
            return Err(ModelFileError::Shape {
                field: "F".into(),
                message: format!("expected {n} matrices, found {}", self.f.len()),
            });
        }
        let f = self
            .f
            .iter()
            .enumerate()
            .map(|(i, fi)| matrix_field(&format!("F[{}]", i + 1), fi, n, n))
            .collect::<Result<Vec<_>, _>>()?;
        let q = matrix_field("Q", &self.q, n, n)?;
        let r0 = matrix_field("R0", &self.r0, n, n)?;
        let g = matrix_field("G", &self.g, n, m)?;
        if let Some(u) = &self.u_bar {
            if u.len() != m {
                return Err(ModelFileError::Shape {
                    field: "u_bar".into(),
                    message: format!("expected {m} entries, found {}", u.len()),
                });
            }
        }
        Ok(QuadraticAffinePH::new(f0, f, q, r0, g)?)
    }

    pub fn u_bar(&self) -> Option<DVector<f64>> {
        self.u_bar.as_ref().map(|u| DVector::from_row_slice(u))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }

    pub fn read(path: &Path) -> Result<Self, ModelFileError> {
        let text = std::fs::read_to_string(path).map_err(|error| ModelFileError::Io {
            path: path.display().to_string(),
            error,
        })?;
        Self::from_json(&text)
    }
}

pub mod serde_helpers {
    //! `serialize_with` adapters for nalgebra values and non-finite floats.

    pub mod matrix {
        use nalgebra::DMatrix;
        use serde::Serializer;

        pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(crate::linalg::to_rows(m))
        }
    }

    /// Vectors as plain arrays.
    pub mod vector {
        use nalgebra::DVector;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter())
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
            Vec::<f64>::deserialize(d).map(DVector::from_vec)
        }
    }

    /// `Some(+∞)` is written as the string `"inf"`; `None` as `null`.
    pub mod opt_extended_f64 {
        use serde::Serializer;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                None => s.serialize_none(),
                Some(x) if x.is_finite() => s.serialize_f64(*x),
                Some(x) if x.is_nan() => s.serialize_str("nan"),
                Some(x) if *x > 0.0 => s.serialize_str("inf"),
                Some(_) => s.serialize_str("-inf"),
            }
        }
    }
}
