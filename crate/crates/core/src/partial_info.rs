//! Witness search when only some expectation values of `ρ` are known.
//!
//! The measured observables span a subspace `V` of the traceless operators
//! (the identity is always known through `tr ρ = 1`). A witness drawn from `V`
//! can be evaluated on `ρ` from the data alone, so the cutting-plane search is
//! run inside `V` with `ρ` replaced by its known projection. Finding no witness
//! in `V` says nothing about separability, hence the inconclusive outcome.

use std::io::BufRead;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::cutting_plane::{run_engine, Outcome, RunTrace, SearchSpace, SolverConfig, Witness};
use crate::error::{Error, Result};
use crate::hermitian::{Dims, HermitianOp, C64};

/// Residual below which an observable is treated as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-8;
/// Relative size of the second operator-Schmidt coefficient below which an
/// observable counts as a tensor product.
const PRODUCT_TOL: f64 = 1e-8;
/// Allowed mismatch for a dependent observable's value.
const CONSISTENCY_TOL: f64 = 1e-8;
const SPECTRAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Measurement {
    pub observable: HermitianOp,
    pub value: f64,
}

/// Measured observables with an orthonormal frame for their traceless span.
#[derive(Clone, Debug)]
pub struct MeasurementSet {
    dims: Dims,
    entries: Vec<Measurement>,
    frame: Vec<HermitianOp>,
    frame_values: Vec<f64>,
    /// `frame[i] = Σ_j transform[i][j] · traceless(entries[j].observable)`.
    transform: Vec<Vec<f64>>,
    /// Accept only tensor-product observables `X_A ⊗ X_B`.
    local_only: bool,
}

impl MeasurementSet {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            entries: Vec::new(),
            frame: Vec::new(),
            frame_values: Vec::new(),
            transform: Vec::new(),
            local_only: false,
        }
    }

    /// A set that rejects observables which are not tensor products, so every
    /// entry can be measured with local settings on each side.
    pub fn local(dims: Dims) -> Self {
        Self { local_only: true, ..Self::new(dims) }
    }

    pub fn is_local(&self) -> bool {
        self.local_only
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &[Measurement] {
        &self.entries
    }

    /// Orthonormal traceless frame of the measured span.
    pub fn frame(&self) -> &[HermitianOp] {
        &self.frame
    }

    /// `tr(E_i ρ)` for each frame element.
    pub fn frame_values(&self) -> &[f64] {
        &self.frame_values
    }

    /// Dimension of the known subspace, counting the identity.
    pub fn j(&self) -> usize {
        1 + self.frame.len()
    }

    /// Records `tr(Xρ) = value`, extending the frame when `X` is new.
    pub fn add(&mut self, x: HermitianOp, value: f64) -> Result<()> {
        self.dims.ensure_eq(&x.dims())?;
        if !value.is_finite() {
            return Err(Error::InvalidParameter(format!("measured value {value}")));
        }
        if self.local_only && !is_product(&x) {
            return Err(Error::InvalidParameter("observable is not a tensor product".into()));
        }
        let (lo, hi) = (x.lambda_min(), x.lambda_max());
        if value < lo - SPECTRAL_TOL || value > hi + SPECTRAL_TOL {
            return Err(Error::SpectralBound { value, min: lo, max: hi });
        }
        let total = self.dims.total() as f64;
        let tl = x.traceless_part();
        let v_tl = value - x.trace() / total;
        let scale = x.norm().max(1.0);

        // Two Gram–Schmidt passes against the frame.
        let mut resid = tl.clone();
        let mut coefs = vec![0.0; self.frame.len()];
        for _ in 0..2 {
            for (i, e) in self.frame.iter().enumerate() {
                let c = e.inner(&resid)?;
                coefs[i] += c;
                resid = resid.axpy(-c, e)?;
            }
        }
        let rn = resid.norm();
        if rn < DEPENDENCE_TOL * scale {
            let implied: f64 = coefs.iter().zip(&self.frame_values).map(|(c, v)| c * v).sum();
            if (implied - v_tl).abs() > CONSISTENCY_TOL * scale {
                let shift = x.trace() / total;
                return Err(Error::InconsistentMeasurement { implied: implied + shift, supplied: value });
            }
            self.entries.push(Measurement { observable: x, value });
            for row in &mut self.transform {
                row.push(0.0);
            }
            return Ok(());
        }
        let e_val = (v_tl - coefs.iter().zip(&self.frame_values).map(|(c, v)| c * v).sum::<f64>()) / rn;
        // New element: (tl − Σ c_i E_i)/rn, expanded over the entries.
        let k = self.entries.len();
        let mut row = vec![0.0; k + 1];
        row[k] = 1.0 / rn;
        for (i, c) in coefs.iter().enumerate() {
            for (j, t) in self.transform[i].iter().enumerate() {
                row[j] -= c * t / rn;
            }
        }
        for r in &mut self.transform {
            r.push(0.0);
        }
        self.transform.push(row);
        self.frame.push(resid.scale(1.0 / rn));
        self.frame_values.push(e_val);
        self.entries.push(Measurement { observable: x, value });
        Ok(())
    }

    /// Weights `w` with `traceless(Σ w_j X_j) = Σ c_i E_i`.
    pub fn observable_weights(&self, frame_coords: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.entries.len()];
        for (c, row) in frame_coords.iter().zip(&self.transform) {
            for (wj, t) in w.iter_mut().zip(row) {
                *wj += c * t;
            }
        }
        w
    }
}

/// Whether `x = X_A ⊗ X_B`: its coefficient matrix over the product basis,
/// indexed `(a, b)` for element `a·N² + b`, has rank one.
pub fn is_product(x: &HermitianOp) -> bool {
    let dims = x.dims();
    let (ra, rb) = (dims.m * dims.m, dims.n * dims.n);
    let c = DMatrix::from_row_slice(ra, rb, x.coeffs());
    let sv = c.singular_values();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv.get(1).is_none_or(|&s2| s2 <= PRODUCT_TOL * sv[0])
}

/// Returns a copy of `ms` with `tr(Xρ) = value` added.
pub fn add_measurement(ms: &MeasurementSet, x: HermitianOp, value: f64) -> Result<MeasurementSet> {
    let mut next = ms.clone();
    next.add(x, value)?;
    Ok(next)
}

#[derive(Clone, Debug)]
pub enum SubspaceVerdict {
    /// A witness inside the measured span detects `ρ`.
    Entangled {
        witness: Witness,
        /// Weights over the measured observables reproducing the witness up to
        /// a multiple of the identity.
        observable_weights: Vec<f64>,
        oracle_calls: usize,
        trace: RunTrace,
    },
    /// No witness in the measured span detects `ρ`.
    Inconclusive { oracle_calls: usize, trace: Option<RunTrace> },
}

impl SubspaceVerdict {
    pub fn is_entangled(&self) -> bool {
        matches!(self, SubspaceVerdict::Entangled { .. })
    }
}

/// Cutting-plane search restricted to the measured span.
pub fn subspace_solve(ms: &MeasurementSet, delta: f64, cfg: &SolverConfig) -> Result<SubspaceVerdict> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    cfg.validate()?;
    let r = DVector::from_column_slice(ms.frame_values());
    if ms.frame.is_empty() || r.norm() <= cfg.eps_center.max(delta) {
        return Ok(SubspaceVerdict::Inconclusive { oracle_calls: 0, trace: None });
    }
    let space = SearchSpace::from_frame(ms.dims, ms.frame.clone(), ms.frame_values.clone())?;
    let run = run_engine(&space, ms.j(), delta, cfg, None)?;
    Ok(match run.outcome {
        Outcome::Witness(w) => {
            let coords = space.project(&w.operator)?;
            let nrm = coords.norm();
            let coords: Vec<f64> = coords.iter().map(|c| c / nrm).collect();
            let operator = w.operator.normalized().expect("test witnesses are nonzero");
            SubspaceVerdict::Entangled {
                witness: Witness { operator, ..w },
                observable_weights: ms.observable_weights(&coords),
                oracle_calls: run.oracle_calls,
                trace: run.trace,
            }
        }
        _ => SubspaceVerdict::Inconclusive { oracle_calls: run.oracle_calls, trace: Some(run.trace) },
    })
}

/// Two-qubit-style Pauli string such as `"XZ"`; requires `2×2` dimensions.
pub fn pauli_operator(s: &str) -> Result<HermitianOp> {
    let c = |re: f64, im: f64| C64::new(re, im);
    let single = |p: char| -> Result<DMatrix<C64>> {
        Ok(match p.to_ascii_uppercase() {
            'I' => DMatrix::identity(2, 2),
            'X' => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
            'Y' => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
            'Z' => DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
            other => return Err(Error::InvalidParameter(format!("unknown Pauli symbol '{other}'"))),
        })
    };
    let chars: Vec<char> = s.trim().chars().collect();
    if chars.len() != 2 {
        return Err(Error::InvalidParameter(format!("Pauli string '{s}' must have two symbols")));
    }
    HermitianOp::kron(&single(chars[0])?, &single(chars[1])?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ObservableSpec {
    Pauli(String),
    Coefficients(Vec<f64>),
    Matrix(Vec<Vec<[f64; 2]>>),
}

#[derive(Deserialize)]
struct MeasurementLine {
    observable: ObservableSpec,
    value: f64,
}

/// Parses one JSON object `{"observable": …, "value": v}`. The observable is a
/// Pauli string, canonical basis coefficients, or a matrix of `[re, im]`
/// pairs.
pub fn parse_measurement(dims: Dims, line: &str) -> Result<Measurement> {
    let parsed: MeasurementLine = serde_json::from_str(line)
        .map_err(|e| Error::InvalidParameter(format!("measurement line: {e}")))?;
    let observable = match parsed.observable {
        ObservableSpec::Pauli(s) => {
            if dims != Dims::new(2, 2)? {
                return Err(Error::InvalidParameter("Pauli strings need 2x2 dimensions".into()));
            }
            pauli_operator(&s)?
        }
        ObservableSpec::Coefficients(c) => HermitianOp::from_coeffs(dims, &c)?,
        ObservableSpec::Matrix(rows) => {
            let d = dims.total();
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    expected: format!("{d}x{d} matrix"),
                    got: format!("{} rows", rows.len()),
                });
            }
            HermitianOp::new(dims, DMatrix::from_fn(d, d, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))?
        }
    };
    Ok(Measurement { observable, value: parsed.value })
}

/// Reads measurements line by line, skipping blank lines.
pub fn read_measurements<R: BufRead>(dims: Dims, reader: R) -> Result<MeasurementSet> {
    let mut ms = MeasurementSet::new(dims);
    read_measurements_into(&mut ms, reader)?;
    Ok(ms)
}

/// Appends measurements read line by line to `ms`.
pub fn read_measurements_into<R: BufRead>(ms: &mut MeasurementSet, reader: R) -> Result<()> {
    let dims = ms.dims();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidParameter(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let m = parse_measurement(dims, &line)?;
        ms.add(m.observable, m.value)?;
    }
    Ok(())
}
