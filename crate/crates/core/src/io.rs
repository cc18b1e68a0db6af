//! JSON formats for states, witnesses and results.
//!
//! Floats are written with 17 significant digits so values round-trip exactly.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cutting_plane::{RunTrace, Verdict, VerdictKind};
use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, Dims, HermitianOp, C64};
use crate::states::SeparableDecomposition;

/// `serde_json` formatter printing every `f64` as `{:.16e}`.
pub struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidParameter(format!("serialization: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

fn complex_rows(m: &DMatrix<C64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn parse_rows(dims: Dims, rows: &[Vec<[f64; 2]>]) -> Result<DMatrix<C64>> {
    let d = dims.total();
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: format!("{d}x{d} matrix"),
            got: format!("{} rows", rows.len()),
        });
    }
    Ok(DMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

/// `{"M": …, "N": …, "matrix": [[[re, im], …], …]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl DensityMatrixJson {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        let dims = rho.dims();
        Self { m: dims.m, n: dims.n, matrix: complex_rows(rho.matrix()) }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        let dims = Dims::new(self.m, self.n)?;
        DensityMatrix::from_matrix(dims, parse_rows(dims, &self.matrix)?)
    }
}

pub fn read_density(text: &str) -> Result<DensityMatrix> {
    let parsed: DensityMatrixJson =
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("density matrix: {e}")))?;
    parsed.to_state()
}

/// `{"M", "N", "coefficients", "margin", "certified"}` with coefficients over
/// the canonical basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessJson {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub certified: Option<bool>,
}

impl WitnessJson {
    pub fn from_operator(op: &HermitianOp, margin: Option<f64>, certified: Option<bool>) -> Self {
        let dims = op.dims();
        Self { m: dims.m, n: dims.n, coefficients: op.coeffs().to_vec(), margin, certified }
    }

    pub fn to_operator(&self) -> Result<HermitianOp> {
        HermitianOp::from_coeffs(Dims::new(self.m, self.n)?, &self.coefficients)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermJson {
    pub weight: f64,
    pub alpha: Vec<[f64; 2]>,
    pub beta: Vec<[f64; 2]>,
}

pub fn decomposition_json(d: &SeparableDecomposition) -> Vec<TermJson> {
    let pairs = |v: &nalgebra::DVector<C64>| v.iter().map(|z| [z.re, z.im]).collect();
    d.terms
        .iter()
        .map(|(w, s)| TermJson { weight: *w, alpha: pairs(s.alpha()), beta: pairs(s.beta()) })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct VerdictJson {
    pub verdict: VerdictKind,
    pub witness: Option<WitnessJson>,
    pub decomposition: Option<Vec<TermJson>>,
    pub oracle_calls: usize,
    pub certificate_oracle_calls: usize,
    pub trace: RunTrace,
}

impl VerdictJson {
    pub fn from_verdict(v: &Verdict) -> Self {
        Self {
            verdict: v.kind,
            witness: v
                .witness
                .as_ref()
                .map(|w| WitnessJson::from_operator(&w.operator, Some(w.margin), Some(w.certified))),
            decomposition: v.decomposition.as_ref().map(decomposition_json),
            oracle_calls: v.oracle_calls,
            certificate_oracle_calls: v.certificate_oracle_calls,
            trace: v.trace.clone(),
        }
    }
}
