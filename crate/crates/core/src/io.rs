//! JSON envelopes for realizations, frames and estimate bundles.
//!
//! Complex numbers are written as `[re, im]` pairs and matrices as lists of
//! rows, so the documents load directly into numpy with
//! `a[..., 0] + 1j * a[..., 1]`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use faer::Mat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

pub const ENVELOPE_VERSION: u32 = 1;

/// Versioned wrapper around any serializable payload.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub version: u32,
    pub kind: String,
    pub payload: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, payload: T) -> Self {
        Self { version: ENVELOPE_VERSION, kind: kind.to_string(), payload }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

/// Reads an envelope and checks its kind tag.
pub fn read_envelope<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let env: Envelope<T> = read_json(path)?;
    if env.kind != kind {
        return Err(Error::InvalidArgument(format!(
            "expected a `{kind}` document, found `{}`",
            env.kind
        )));
    }
    Ok(env.payload)
}

pub fn mat_to_rows(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rows_to_mat(rows: &[Vec<C64>]) -> Result<CMat> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `#[serde(with = "crate::io::cmat")]` for `CMat` fields.
pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        mat_to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = Vec::<Vec<C64>>::deserialize(d)?;
        rows_to_mat(&rows).map_err(serde::de::Error::custom)
    }
}
