//! Analytic-center cutting-plane search for an entanglement witness.
//!
//! Candidate witnesses live in the unit ball of traceless operators. The
//! candidate set is kept as the ball intersected with half-spaces
//! `{X : ⟨K_i, X⟩ ≥ 0}`; the first normal is `ρ − I/(MN)` normalized. Each
//! iteration takes the analytic center `C` of the current set, i.e. the
//! minimizer of
//!
//! ```text
//! F(X) = −Σ log⟨K_i, X⟩ − log(1 − ‖X‖²),
//! ```
//!
//! queries the oracle with `A = C/‖C‖`, and either returns `A` or adds the cut
//! `K ∝ (ρ − σ_A) − (⟨A, ρ − σ_A⟩ / tr(A²)) A`, which passes through `A` and the
//! origin. Stationarity `∇F(C) = 0` reads
//! `C = (1 − ‖C‖²)/2 · Σ K_i / ⟨K_i, C⟩`, so `C` is a positive combination of
//! the normals and every witness detecting `ρ` has nonnegative overlap with it.
//!
//! All arithmetic happens in coordinates over an orthonormal frame of traceless
//! operators ([`SearchSpace`]); the full problem uses the canonical basis and
//! the partial-information mode uses the span of measured observables.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{Dims, DensityMatrix, HermitianOp, OperatorBasis, C64};
use crate::oracle::{maximize_unchecked, OracleConfig, OracleReport, OracleStatus};
use crate::states::{ProductState, SeparableDecomposition};
use crate::verifiers::FrankWolfe;

enum Frame {
    /// Canonical basis elements `1..n`.
    Canonical(Arc<OperatorBasis>),
    Dense(Vec<HermitianOp>),
}

/// An orthonormal frame of traceless operators and the coordinates of `ρ`
/// (or of its known projection) in it.
pub struct SearchSpace {
    dims: Dims,
    frame: Frame,
    rho: DVector<f64>,
}

impl SearchSpace {
    /// The full traceless operator space.
    pub fn full(rho: &DensityMatrix) -> Result<Self> {
        let basis = OperatorBasis::canonical(rho.dims())?;
        let coeffs = rho.op().coeffs();
        Ok(Self {
            dims: rho.dims(),
            frame: Frame::Canonical(basis),
            rho: DVector::from_column_slice(&coeffs[1..]),
        })
    }

    /// A subspace spanned by orthonormal traceless `frame` elements, with
    /// `rho_coords[i] = tr(frame[i] ρ)`.
    pub fn from_frame(dims: Dims, frame: Vec<HermitianOp>, rho_coords: Vec<f64>) -> Result<Self> {
        if frame.len() != rho_coords.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coordinates", frame.len()),
                got: format!("{}", rho_coords.len()),
            });
        }
        for f in &frame {
            dims.ensure_eq(&f.dims())?;
        }
        Ok(Self { dims, frame: Frame::Dense(frame), rho: DVector::from_vec(rho_coords) })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Real dimension of the frame.
    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn rho_coords(&self) -> &DVector<f64> {
        &self.rho
    }

    /// `Σ c_i E_i`.
    pub fn operator(&self, coords: &DVector<f64>) -> HermitianOp {
        match &self.frame {
            Frame::Canonical(basis) => {
                let mut full = Vec::with_capacity(coords.len() + 1);
                full.push(0.0);
                full.extend(coords.iter());
                basis.reconstruct(&full).expect("frame and coordinates agree in length")
            }
            Frame::Dense(els) => {
                let d = self.dims.total();
                let mut m = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
                for (e, &c) in els.iter().zip(coords.iter()) {
                    m += e.matrix() * C64::new(c, 0.0);
                }
                HermitianOp::from_parts(self.dims, m)
            }
        }
    }

    /// `(⟨ψ|E_i|ψ⟩)_i` for a product state.
    pub fn project_state(&self, s: &ProductState) -> DVector<f64> {
        let psi = s.vector();
        match &self.frame {
            Frame::Canonical(basis) => DVector::from_column_slice(&basis.pure_coefficients(&psi)[1..]),
            Frame::Dense(els) => DVector::from_iterator(els.len(), els.iter().map(|e| e.expectation(&psi))),
        }
    }

    /// `(tr(E_i X))_i`.
    pub fn project(&self, x: &HermitianOp) -> Result<DVector<f64>> {
        self.dims.ensure_eq(&x.dims())?;
        Ok(match &self.frame {
            Frame::Canonical(_) => DVector::from_column_slice(&x.coeffs()[1..]),
            Frame::Dense(els) => DVector::from_iterator(
                els.len(),
                els.iter().map(|e| crate::hermitian::inner(e, x).expect("dims checked")),
            ),
        })
    }
}

/// Accumulated half-space normals with the cached analytic center.
#[derive(Clone, Debug)]
pub struct CutSet {
    cuts: Vec<DVector<f64>>,
    center: DVector<f64>,
}

impl CutSet {
    pub fn new(dim: usize) -> Self {
        Self { cuts: Vec::new(), center: DVector::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Appends a normal, normalizing it.
    pub fn push(&mut self, k: DVector<f64>) -> Result<()> {
        if k.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("cut of length {}", self.dim()),
                got: format!("{}", k.len()),
            });
        }
        let nrm = k.norm();
        if !(nrm > 1e-300) {
            return Err(Error::DegenerateCut);
        }
        self.cuts.push(k / nrm);
        Ok(())
    }

    pub fn cuts(&self) -> &[DVector<f64>] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn set_center(&mut self, c: DVector<f64>) {
        self.center = c;
    }

    pub fn is_strictly_feasible(&self, x: &DVector<f64>) -> bool {
        x.norm_squared() < 1.0 && self.cuts.iter().all(|k| k.dot(x) > 0.0)
    }

    /// The barrier `F(x)`, or `None` outside the open feasible set.
    pub fn barrier(&self, x: &DVector<f64>) -> Option<f64> {
        let q = 1.0 - x.norm_squared();
        if !(q > 0.0) {
            return None;
        }
        let mut f = -q.ln();
        for k in &self.cuts {
            let s = k.dot(x);
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        Some(f)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let q = 1.0 - x.norm_squared();
        let mut g = x * (2.0 / q);
        for k in &self.cuts {
            g -= k / k.dot(x);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim();
        let q = 1.0 - x.norm_squared();
        let mut h = DMatrix::identity(d, d) * (2.0 / q);
        h.ger(4.0 / (q * q), x, x, 1.0);
        if !self.cuts.is_empty() {
            let scaled = DMatrix::from_fn(self.cuts.len(), d, |i, j| self.cuts[i][j] / self.cuts[i].dot(x));
            h.gemm_tr(1.0, &scaled, &scaled, 1.0);
        }
        h
    }

    /// `(1 − ‖C‖²) / (2⟨K_i, C⟩)`, the weights expressing a stationary `C` as a
    /// combination of the normals.
    pub fn combination_coefficients(&self, c: &DVector<f64>) -> Vec<f64> {
        let q = 1.0 - c.norm_squared();
        self.cuts.iter().map(|k| q / (2.0 * k.dot(c))).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_steps: usize,
    pub armijo: f64,
    pub backtrack: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_steps: 100, armijo: 0.25, backtrack: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct Center {
    pub point: DVector<f64>,
    pub gradient_norm: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Damped Newton minimization of the barrier from a strictly feasible start.
pub fn analytic_center(cs: &CutSet, warm_start: &DVector<f64>, cfg: &NewtonConfig) -> Result<Center> {
    if warm_start.len() != cs.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("point of length {}", cs.dim()),
            got: format!("{}", warm_start.len()),
        });
    }
    let mut x = warm_start.clone();
    let mut f = cs.barrier(&x).ok_or(Error::RegionEmpty)?;
    let mut steps = 0;
    loop {
        let g = cs.gradient(&x);
        let gnorm = g.norm();
        if gnorm <= cfg.tol || steps >= cfg.max_steps {
            return Ok(Center { point: x, gradient_norm: gnorm, steps, converged: gnorm <= cfg.tol });
        }
        let h = cs.hessian(&x);
        let dir = match h.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => {
                let ridge = 1e-12 * h.diagonal().max();
                let hr = h + DMatrix::identity(cs.dim(), cs.dim()) * ridge;
                match hr.cholesky() {
                    Some(ch) => -ch.solve(&g),
                    None => -g.clone(),
                }
            }
        };
        let slope = g.dot(&dir);
        // Inside the quadratic region of a self-concordant barrier the full
        // step is feasible and the function test is below rounding.
        let decrement_sq = -slope;
        let mut t = 1.0;
        let next = loop {
            let cand = &x + &dir * t;
            match cs.barrier(&cand) {
                Some(fc) if decrement_sq < 0.1 || fc <= f + cfg.armijo * t * slope => break Some((cand, fc)),
                _ => {}
            }
            t *= cfg.backtrack;
            if t < 1e-20 {
                break None;
            }
        };
        steps += 1;
        match next {
            Some((cand, fc)) => {
                x = cand;
                f = fc;
            }
            None => {
                let gnorm = cs.gradient(&x).norm();
                return Ok(Center { point: x, gradient_norm: gnorm, steps, converged: gnorm <= cfg.tol });
            }
        }
    }
}

/// Analytic center of the ball cut by operator normals, returned as an
/// operator. Normals and the warm start are expressed over the canonical
/// traceless basis.
pub fn analytic_center_of(cuts: &[HermitianOp], warm_start: &HermitianOp) -> Result<HermitianOp> {
    let dims = warm_start.dims();
    let d = dims.operator_dim() - 1;
    let mut cs = CutSet::new(d);
    for k in cuts {
        dims.ensure_eq(&k.dims())?;
        cs.push(DVector::from_column_slice(&k.coeffs()[1..]))?;
    }
    let warm = DVector::from_column_slice(&warm_start.coeffs()[1..]);
    let c = analytic_center(&cs, &warm, &NewtonConfig::default())?;
    let mut full = vec![0.0];
    full.extend(c.point.iter());
    HermitianOp::from_coeffs(dims, &full)
}

/// `K₁ = (ρ − I/(MN)) / ‖ρ − I/(MN)‖`.
pub fn initial_cut(rho: &DensityMatrix, eps_center: f64) -> Result<HermitianOp> {
    let shifted = rho.op().traceless_part();
    if shifted.norm() <= eps_center {
        return Err(Error::InvalidParameter(
            "state coincides with the maximally mixed state".into(),
        ));
    }
    Ok(shifted.normalized().expect("norm checked"))
}

/// Unnormalized cut in coordinates: the `a`-orthogonal part of `r − s`.
fn cut_coords(a: &DVector<f64>, r: &DVector<f64>, s: &DVector<f64>) -> Result<DVector<f64>> {
    let diff = r - s;
    let aa = a.norm_squared();
    if !(aa > 0.0) {
        return Err(Error::InvalidParameter("zero test witness".into()));
    }
    let k = &diff - a * (a.dot(&diff) / aa);
    if k.norm() <= 1e-12 * diff.norm().max(1e-300) || k.norm() < 1e-14 {
        return Err(Error::DegenerateCut);
    }
    Ok(k.normalize())
}

/// Normalized `(ρ − σ_A) − (⟨A, ρ − σ_A⟩ / tr(A²)) A`.
pub fn make_cut(a: &HermitianOp, rho: &DensityMatrix, sigma: &ProductState) -> Result<HermitianOp> {
    a.dims().ensure_eq(&rho.dims())?;
    a.dims().ensure_eq(&sigma.dims())?;
    let diff = rho.op().sub(&sigma.operator())?;
    let aa = a.inner(a)?;
    if !(aa > 0.0) {
        return Err(Error::InvalidParameter("zero test witness".into()));
    }
    let k = diff.axpy(-a.inner(&diff)? / aa, a)?;
    if k.norm() <= 1e-12 * diff.norm().max(1e-300) || k.norm() < 1e-14 {
        return Err(Error::DegenerateCut);
    }
    Ok(k.normalized().expect("norm checked"))
}

/// Half the largest step along `k` from `c` that keeps every constraint
/// strictly satisfied. The previous center lies on the new hyperplane, so the
/// pull toward the feasible side is taken along the new normal.
fn warm_start(cs: &CutSet, c: &DVector<f64>, k: &DVector<f64>, fraction: f64) -> Option<DVector<f64>> {
    // ‖c + τk‖² < 1
    let ck = c.dot(k);
    let disc = ck * ck + (1.0 - c.norm_squared());
    if !(disc > 0.0) {
        return None;
    }
    let mut tau_max = -ck + disc.sqrt();
    for ki in cs.cuts() {
        let slope = ki.dot(k);
        let s = ki.dot(c);
        if slope < 0.0 {
            tau_max = tau_max.min(s / -slope);
        } else if s <= 0.0 && slope <= 0.0 {
            return None;
        }
    }
    if !(tau_max > 0.0) {
        return None;
    }
    let x = c + k * (fraction * tau_max);
    cs.is_strictly_feasible(&x).then_some(x)
}

/// Handling of witness candidates that no certified bound confirms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationPolicy {
    /// Accept the candidate as an uncertified witness.
    Accept,
    /// Re-run the oracle with four times the starts and a fresh seed first.
    Confirm,
    /// Refuse uncertified witnesses.
    Strict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Iteration cap is `⌈cap_factor · n · ln(1/δ)⌉`.
    pub cap_factor: f64,
    /// Cap on cutting-plane oracle calls; `None` means `50·n`.
    pub max_oracle_calls: Option<usize>,
    pub oracle: OracleConfig,
    pub validation: ValidationPolicy,
    /// Run Frank–Wolfe alongside the cutting planes as a separability
    /// certificate.
    pub frank_wolfe: bool,
    pub fw_steps_per_iteration: usize,
    pub newton: NewtonConfig,
    pub warm_start_fraction: f64,
    /// States this close to `I/(MN)` are declared separable outright.
    pub eps_center: f64,
    /// Keep every cut normal in the trace.
    pub record_cuts: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cap_factor: 4.0,
            max_oracle_calls: None,
            oracle: OracleConfig::default(),
            validation: ValidationPolicy::Confirm,
            frank_wolfe: true,
            fw_steps_per_iteration: 1,
            newton: NewtonConfig::default(),
            warm_start_fraction: 0.5,
            eps_center: 1e-10,
            record_cuts: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.cap_factor > 0.0) {
            return bad("cap_factor must be positive");
        }
        if !(self.warm_start_fraction > 0.0 && self.warm_start_fraction < 1.0) {
            return bad("warm_start_fraction must lie in (0, 1)");
        }
        if !(self.newton.tol > 0.0) || self.newton.max_steps == 0 {
            return bad("newton tolerance and step cap must be positive");
        }
        if !(self.newton.armijo > 0.0 && self.newton.armijo < 0.5) {
            return bad("armijo slope must lie in (0, 0.5)");
        }
        if !(self.newton.backtrack > 0.0 && self.newton.backtrack < 1.0) {
            return bad("backtracking factor must lie in (0, 1)");
        }
        if !(self.oracle.grid_h > 0.0) || !(self.oracle.grid_h_min > 0.0) {
            return bad("grid steps must be positive");
        }
        if self.oracle.starts == Some(0) {
            return bad("oracle needs at least one start");
        }
        if self.max_oracle_calls == Some(0) {
            return bad("max_oracle_calls must be positive");
        }
        Ok(())
    }

    fn oracle_for(&self, call: usize) -> OracleConfig {
        let mut o = self.oracle.clone();
        o.seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(call as u64);
        o
    }
}

/// `⌈c · n · ln(1/δ)⌉`, at least one.
pub fn iteration_cap(cap_factor: f64, n: usize, delta: f64) -> usize {
    let v = (cap_factor * n as f64 * (1.0 / delta).ln()).ceil();
    if v.is_finite() && v >= 1.0 {
        v as usize
    } else {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictKind {
    Separable,
    Entangled,
}

#[derive(Clone, Debug)]
pub struct Witness {
    /// Traceless, unit-norm operator.
    pub operator: HermitianOp,
    /// `tr(Aρ) − f_upper(A)`; uses the best heuristic value when uncertified.
    pub margin: f64,
    pub certified: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The oracle certified a witness.
    WitnessFound,
    /// The state is within δ (or `eps_center`) of `I/(MN)`.
    NearMaximallyMixed,
    /// Frank–Wolfe found a separable state within δ.
    FrankWolfeCertificate,
    /// The iteration cap was reached.
    IterationCap,
    /// The candidate set lost its interior.
    RegionEmpty,
    /// Decided by the grid-based brute-force algorithm.
    GridSearch,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `tr(Aρ)` for the queried test witness.
    pub threshold: f64,
    pub f_lower: f64,
    pub f_upper: f64,
    pub status: OracleStatus,
    /// Norm of the center the test witness was taken from.
    pub center_norm: f64,
    pub gradient_norm: f64,
    pub newton_steps: usize,
    /// Smallest stationarity coefficient `(1 − ‖C‖²)/(2⟨K_i, C⟩)`.
    pub min_combination_coefficient: f64,
    pub fw_distance: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunTrace {
    pub iterations: Vec<IterationRecord>,
    pub termination: Option<Termination>,
    pub iteration_cap: usize,
    /// Cut normals in frame coordinates, when recording is enabled.
    pub cuts: Vec<Vec<f64>>,
    pub fw_distance: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub witness: Option<Witness>,
    pub decomposition: Option<SeparableDecomposition>,
    /// Oracle calls made by the cutting-plane loop.
    pub oracle_calls: usize,
    /// Oracle calls spent on the Frank–Wolfe certificate.
    pub certificate_oracle_calls: usize,
    pub trace: RunTrace,
}

pub(crate) enum Outcome {
    Witness(Witness),
    Certificate(SeparableDecomposition),
    Exhausted(Termination),
}

pub(crate) struct EngineRun {
    pub outcome: Outcome,
    pub oracle_calls: usize,
    pub trace: RunTrace,
}

fn candidate_or_confirm(
    a: &HermitianOp,
    t: f64,
    report: OracleReport,
    cfg: &SolverConfig,
    call: usize,
    calls: &mut usize,
) -> Result<std::result::Result<Witness, OracleReport>> {
    match cfg.validation {
        ValidationPolicy::Accept => {}
        ValidationPolicy::Strict => {
            return Err(Error::InvalidWitness(format!(
                "uncertified candidate (t = {t}, best product value {})",
                report.f_lower
            )))
        }
        ValidationPolicy::Confirm => {
            let mut o = cfg.oracle_for(call + 1_000_003);
            let starts = o.starts.unwrap_or(8 * a.dims().chart_dim());
            o.starts = Some(4 * starts);
            let again = maximize_unchecked(a, t, &o)?;
            *calls += 1;
            match again.status {
                OracleStatus::CutReady => return Ok(Err(again)),
                OracleStatus::WitnessCertified => {
                    return Ok(Ok(Witness {
                        operator: a.clone(),
                        margin: t - again.f_upper,
                        certified: true,
                    }))
                }
                _ => {}
            }
        }
    }
    Ok(Ok(Witness { operator: a.clone(), margin: t - report.f_lower, certified: false }))
}

/// The cutting-plane loop over `space`. `fw`, when present, is advanced each
/// iteration and ends the run once it comes within `delta` of `ρ`.
pub(crate) fn run_engine(
    space: &SearchSpace,
    n_effective: usize,
    delta: f64,
    cfg: &SolverConfig,
    mut fw: Option<&mut FrankWolfe>,
) -> Result<EngineRun> {
    let r = space.rho_coords().clone();
    let cap = iteration_cap(cfg.cap_factor, n_effective, delta);
    let max_calls = cfg.max_oracle_calls.unwrap_or(50 * n_effective);
    let mut trace = RunTrace {
        iterations: Vec::new(),
        termination: None,
        iteration_cap: cap,
        cuts: Vec::new(),
        fw_distance: fw.as_ref().map(|f| f.distance()),
    };
    let mut calls = 0usize;
    let finish = |outcome: Outcome, calls: usize, mut trace: RunTrace| {
        trace.termination = Some(match &outcome {
            Outcome::Witness(_) => Termination::WitnessFound,
            Outcome::Certificate(_) => Termination::FrankWolfeCertificate,
            Outcome::Exhausted(t) => *t,
        });
        Ok(EngineRun { outcome, oracle_calls: calls, trace })
    };

    let rn = r.norm();
    if !(rn > 0.0) {
        return finish(Outcome::Exhausted(Termination::RegionEmpty), calls, trace);
    }
    let mut cs = CutSet::new(space.dim());
    let k1 = &r / rn;
    cs.push(k1.clone())?;
    if cfg.record_cuts {
        trace.cuts.push(k1.iter().copied().collect());
    }
    let mut center = analytic_center(&cs, &(&k1 * 0.5), &cfg.newton)?;
    cs.set_center(center.point.clone());

    for iteration in 1..=cap {
        if let Some(f) = fw.as_deref_mut() {
            for _ in 0..cfg.fw_steps_per_iteration {
                if f.distance() <= delta || f.stalled() {
                    break;
                }
                f.step()?;
            }
            trace.fw_distance = Some(f.distance());
            if f.distance() <= delta {
                let decomp = f.decomposition()?;
                return finish(Outcome::Certificate(decomp), calls, trace);
            }
        }
        if calls >= max_calls {
            trace.termination = None;
            return Err(Error::OracleBudget { calls, trace: Box::new(trace) });
        }

        let c = cs.center().clone();
        let a_coords = c.normalize();
        let a = space.operator(&a_coords);
        let t = a_coords.dot(&r);
        let mut report = maximize_unchecked(&a, t, &cfg.oracle_for(iteration))?;
        calls += 1;
        let mut record = IterationRecord {
            iteration,
            threshold: t,
            f_lower: report.f_lower,
            f_upper: report.f_upper,
            status: report.status,
            center_norm: c.norm(),
            gradient_norm: center.gradient_norm,
            newton_steps: center.steps,
            min_combination_coefficient: cs
                .combination_coefficients(&c)
                .into_iter()
                .fold(f64::INFINITY, f64::min),
            fw_distance: trace.fw_distance,
        };

        match report.status {
            OracleStatus::CutReady => {}
            OracleStatus::WitnessCertified => {
                trace.iterations.push(record);
                let w = Witness { operator: a, margin: t - report.f_upper, certified: true };
                return finish(Outcome::Witness(w), calls, trace);
            }
            OracleStatus::Exhausted if report.f_upper < t + delta => {
                // Meets the δ-relaxed witness condition; not certified below t.
                trace.iterations.push(record);
                let w = Witness { operator: a, margin: t - report.f_upper, certified: false };
                return finish(Outcome::Witness(w), calls, trace);
            }
            OracleStatus::Exhausted | OracleStatus::WitnessCandidate => {
                match candidate_or_confirm(&a, t, report, cfg, iteration, &mut calls)? {
                    Ok(w) => {
                        trace.iterations.push(record);
                        return finish(Outcome::Witness(w), calls, trace);
                    }
                    Err(again) => {
                        record.f_lower = again.f_lower;
                        record.status = again.status;
                        report = again;
                    }
                }
            }
        }
        trace.iterations.push(record);

        let s = space.project_state(&report.incumbent);
        let k = match cut_coords(&a_coords, &r, &s) {
            Ok(k) => k,
            Err(Error::DegenerateCut) => {
                let diff = &r - &s;
                // A product state reproduces ρ here, so no witness exists.
                if diff.norm() <= 1e-12 {
                    return finish(Outcome::Exhausted(Termination::RegionEmpty), calls, trace);
                }
                let nudged = (&a_coords - diff.normalize() * 1e-6).normalize();
                match cut_coords(&nudged, &r, &s) {
                    Ok(k) => k,
                    Err(Error::DegenerateCut) => {
                        match candidate_or_confirm(&a, t, report, cfg, iteration, &mut calls)? {
                            Ok(w) => return finish(Outcome::Witness(w), calls, trace),
                            Err(_) => return finish(Outcome::Exhausted(Termination::RegionEmpty), calls, trace),
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        let Some(warm) = warm_start(&cs, &c, &k, cfg.warm_start_fraction) else {
            return finish(Outcome::Exhausted(Termination::RegionEmpty), calls, trace);
        };
        cs.push(k.clone())?;
        if cfg.record_cuts {
            trace.cuts.push(k.iter().copied().collect());
        }
        center = match analytic_center(&cs, &warm, &cfg.newton) {
            Ok(c) => c,
            Err(Error::RegionEmpty) => {
                return finish(Outcome::Exhausted(Termination::RegionEmpty), calls, trace)
            }
            Err(e) => return Err(e),
        };
        cs.set_center(center.point.clone());
    }
    finish(Outcome::Exhausted(Termination::IterationCap), calls, trace)
}

/// Decides the witness problem for `ρ` at precision `δ`.
///
/// Returns `ENTANGLED` with a unit-norm traceless witness when the oracle
/// bounds `max tr(Aσ)` below `tr(Aρ)` (or below `tr(Aρ) + δ` when the grid
/// cannot resolve further), and `SEPARABLE` when Frank–Wolfe reaches a
/// separable state within `δ`, the state is within `δ` of `I/(MN)`, the
/// candidate set empties, or the iteration cap is hit.
pub fn solve(rho: &DensityMatrix, delta: f64, cfg: &SolverConfig) -> Result<Verdict> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be positive")));
    }
    cfg.validate()?;
    let dims = rho.dims();
    let n = dims.operator_dim();
    let offset = rho.op().traceless_part().norm();
    if offset <= cfg.eps_center.max(delta) {
        let w = 1.0 / dims.total() as f64;
        let terms = (0..dims.m)
            .flat_map(|i| (0..dims.n).map(move |j| (w, ProductState::basis(dims, i, j))))
            .collect();
        return Ok(Verdict {
            kind: VerdictKind::Separable,
            witness: None,
            decomposition: Some(SeparableDecomposition::new(terms)?),
            oracle_calls: 0,
            certificate_oracle_calls: 0,
            trace: RunTrace {
                iterations: Vec::new(),
                termination: Some(Termination::NearMaximallyMixed),
                iteration_cap: iteration_cap(cfg.cap_factor, n, delta),
                cuts: Vec::new(),
                fw_distance: Some(offset),
            },
        });
    }

    let space = SearchSpace::full(rho)?;
    let mut fw = if cfg.frank_wolfe { Some(FrankWolfe::new(rho, &cfg.oracle, cfg.seed)?) } else { None };
    let run = run_engine(&space, n, delta, cfg, fw.as_mut())?;
    let certificate_oracle_calls = fw.as_ref().map_or(0, |f| f.oracle_calls());
    let (kind, witness, decomposition) = match run.outcome {
        Outcome::Witness(w) => {
            let unit = w.operator.normalized().expect("test witnesses are nonzero");
            (VerdictKind::Entangled, Some(Witness { operator: unit, ..w }), None)
        }
        Outcome::Certificate(d) => (VerdictKind::Separable, None, Some(d)),
        Outcome::Exhausted(_) => (VerdictKind::Separable, None, None),
    };
    Ok(Verdict {
        kind,
        witness,
        decomposition,
        oracle_calls: run.oracle_calls,
        certificate_oracle_calls,
        trace: run.trace,
    })
}
