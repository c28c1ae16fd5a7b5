//! JSON file formats for states, observables and density matrices.
//!
//! State: `{"dim": n, "components": [[re, im], ...]}`.
//! Observable: `{"dim": n, "matrix": [[[re, im], ...], ...]}`, validated Hermitian.
//! Symmetric spinor: a state object with an extra `"rank"` field.
//! Density matrix: an observable object with an optional `"stderr"` matrix of reals.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, CMatrix, CVector, C64};
use crate::projective::{Observable, PureState, HERMITIAN_TOL};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StateJson {
    pub dim: usize,
    pub components: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SymSpinorJson {
    pub rank: usize,
    pub dim: usize,
    pub components: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ObservableJson {
    pub dim: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<Vec<Vec<f64>>>,
}

pub fn state_to_json(state: &PureState) -> StateJson {
    StateJson { dim: state.dim(), components: state.components().iter().map(|z| [z.re, z.im]).collect() }
}

pub fn vector_to_json(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn observable_to_json(obs: &Observable) -> ObservableJson {
    ObservableJson { dim: obs.dim(), matrix: matrix_to_json(obs.matrix()), stderr: None }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::validation("json", e.to_string()))
}

fn field<'a>(obj: &'a Value, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::validation(name, "missing field"))
}

fn parse_dim(obj: &Value) -> Result<usize> {
    let d = field(obj, "dim")?;
    let d = d.as_u64().ok_or_else(|| Error::validation("dim", format!("expected a positive integer, got {d}")))?;
    if d == 0 || d > 64 {
        return Err(Error::validation("dim", format!("must be in 1..=64, got {d}")));
    }
    Ok(d as usize)
}

fn parse_complex(v: &Value, path: &str) -> Result<C64> {
    let arr = v.as_array().ok_or_else(|| Error::validation(path, "expected [re, im]"))?;
    if arr.len() != 2 {
        return Err(Error::validation(path, format!("expected [re, im], got {} entries", arr.len())));
    }
    let re = arr[0].as_f64().ok_or_else(|| Error::validation(path, "real part is not a number"))?;
    let im = arr[1].as_f64().ok_or_else(|| Error::validation(path, "imaginary part is not a number"))?;
    if !re.is_finite() || !im.is_finite() {
        return Err(Error::validation(path, "non-finite entry"));
    }
    Ok(C64::new(re, im))
}

fn parse_components(obj: &Value, dim: usize) -> Result<CVector> {
    let comps = field(obj, "components")?
        .as_array()
        .ok_or_else(|| Error::validation("components", "expected an array of [re, im] pairs"))?;
    if comps.len() != dim {
        return Err(Error::validation("components", format!("expected {dim} entries (dim), found {}", comps.len())));
    }
    let mut v = CVector::zeros(dim);
    for (k, c) in comps.iter().enumerate() {
        v[k] = parse_complex(c, &format!("components[{k}]"))?;
    }
    Ok(v)
}

pub fn state_from_value(obj: &Value) -> Result<PureState> {
    let dim = parse_dim(obj)?;
    let v = parse_components(obj, dim)?;
    PureState::new(v).map_err(|_| Error::validation("components", "all components are zero"))
}

pub fn state_from_str(text: &str) -> Result<PureState> {
    state_from_value(&parse_value(text)?)
}

pub fn read_state(path: impl AsRef<Path>) -> Result<PureState> {
    state_from_str(&read_to_string(path.as_ref())?)
}

/// Raw symmetric-spinor components and rank.
pub fn sym_spinor_from_str(text: &str) -> Result<(usize, CVector)> {
    let obj = parse_value(text)?;
    let rank = field(&obj, "rank")?
        .as_u64()
        .ok_or_else(|| Error::validation("rank", "expected a positive integer"))? as usize;
    let dim = parse_dim(&obj)?;
    if dim != rank + 1 {
        return Err(Error::validation("dim", format!("rank {rank} spinor needs dim {}, got {dim}", rank + 1)));
    }
    Ok((rank, parse_components(&obj, dim)?))
}

pub fn matrix_from_value(obj: &Value) -> Result<CMatrix> {
    let dim = parse_dim(obj)?;
    let rows = field(obj, "matrix")?
        .as_array()
        .ok_or_else(|| Error::validation("matrix", "expected an array of rows"))?;
    if rows.len() != dim {
        return Err(Error::validation("matrix", format!("expected {dim} rows (dim), found {}", rows.len())));
    }
    let mut m = CMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| Error::validation(format!("matrix[{i}]"), "expected an array"))?;
        if row.len() != dim {
            return Err(Error::validation(format!("matrix[{i}]"), format!("expected {dim} entries, found {}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = parse_complex(z, &format!("matrix[{i}][{j}]"))?;
        }
    }
    Ok(m)
}

pub fn observable_from_value(obj: &Value, hbar: f64) -> Result<Observable> {
    let m = matrix_from_value(obj)?;
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(&m);
    if dev > HERMITIAN_TOL * scale {
        let (i, j) = worst_hermitian_entry(&m);
        return Err(Error::validation(
            format!("matrix[{i}][{j}]"),
            format!("not Hermitian: differs from conj(matrix[{j}][{i}]) by {dev:.3e}"),
        ));
    }
    Observable::with_hbar(m, hbar)
}

fn worst_hermitian_entry(m: &CMatrix) -> (usize, usize) {
    let mut best = (0, 0);
    let mut worst = -1.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
                best = (i, j);
            }
        }
    }
    best
}

pub fn observable_from_str(text: &str, hbar: f64) -> Result<Observable> {
    observable_from_value(&parse_value(text)?, hbar)
}

pub fn read_observable(path: impl AsRef<Path>, hbar: f64) -> Result<Observable> {
    observable_from_str(&read_to_string(path.as_ref())?, hbar)
}

/// A loop file: a JSON array of state objects.
pub fn states_from_str(text: &str) -> Result<Vec<PureState>> {
    let v = parse_value(text)?;
    let arr = v.as_array().ok_or_else(|| Error::validation("loop", "expected a JSON array of states"))?;
    arr.iter()
        .enumerate()
        .map(|(k, s)| {
            state_from_value(s).map_err(|e| match e {
                Error::Validation { field, message } => Error::validation(format!("loop[{k}].{field}"), message),
                other => other,
            })
        })
        .collect()
}

pub fn read_states(path: impl AsRef<Path>) -> Result<Vec<PureState>> {
    states_from_str(&read_to_string(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn state_round_trip() {
        let s = PureState::from_slice(&[c(0.2, 0.1), c(-0.4, 0.9)]).unwrap();
        let text = serde_json::to_string(&state_to_json(&s)).unwrap();
        let back = state_from_str(&text).unwrap();
        assert!((back.components() - s.components()).norm() < 1e-15);
    }

    #[test]
    fn malformed_state_names_field() {
        let err = state_from_str(r#"{"dim": 2, "components": [[1, 0]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "components"));
        let err = state_from_str(r#"{"dim": 2, "components": [[1, 0], [0, "x"]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "components[1]"));
        let err = state_from_str(r#"{"components": []}"#).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "dim"));
    }

    #[test]
    fn non_hermitian_observable_rejected_on_load() {
        let err = observable_from_str(r#"{"dim": 2, "matrix": [[[1,0],[1,0]],[[0,0],[1,0]]]}"#, 1.0).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field.starts_with("matrix[")));
        let ok = observable_from_str(r#"{"dim": 2, "matrix": [[[1,0],[0,1]],[[0,-1],[2,0]]]}"#, 1.0).unwrap();
        assert_eq!(ok.dim(), 2);
    }
}
