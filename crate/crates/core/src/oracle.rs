//! The support oracle: maximize `f(σ) = tr(Aσ)` over pure product states.
//!
//! Lower bounds come from multistart see-saw ascent. Each half-step fixes one
//! factor and replaces the other by the top eigenvector of the contracted
//! operator, so the value never decreases.
//!
//! Upper bounds are either the spectral bound `λ_max(A)` or a grid
//! certificate. The grid enumerates the chart of the smaller factor only and
//! maximizes the other factor exactly, since `max_α ⟨αβ|A|αβ⟩ = λ_max(C(β))`
//! with `C(β) = (I⊗⟨β|)A(I⊗|β⟩)`. For unit `β, β'`,
//!
//! ```text
//! |λ_max(C(β)) − λ_max(C(β'))| ≤ (λ_max(A) − λ_min(A)) · ‖β − β'‖
//! ```
//!
//! because `|⟨ψ|A|ψ⟩ − ⟨ψ'|A|ψ'⟩| ≤ ‖A − cI‖_op ‖ψψ† − ψ'ψ'†‖_1` with the
//! optimal shift `c`. The chart map has orthogonal Jacobian columns of norm at
//! most one, so `‖β(p) − β(q)‖ ≤ ‖p − q‖₂`. Every point of the box lies within
//! `(h/2)·√k_g` of a grid node, where `k_g` is the gridded chart dimension, so
//!
//! ```text
//! f* ≤ grid_best + L·h,   L = (λ_max(A) − λ_min(A)) · √k_g / 2.
//! ```
//!
//! The adaptive refinement tightens `L`. Taking `α` optimal at `β`, the
//! difference is at most `(λ_max(C_α) − λ_min(C_α))·‖β − β'‖` with
//! `C_α = (⟨α|⊗I)A(|α⟩⊗I)`, and that spread is at most `f* − λ_min(A)`. Any
//! certified bound `U ≥ f*` therefore gives the valid constant
//! `(U − λ_min(A))·√k_g/2`, which shrinks as `U` does.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{
    contract_a, contract_b, gauge_fix, quadratic_form, top_eigenpair_unchecked, top_eigenvalue,
    Dims, HermitianOp, C64,
};
use crate::states::{random_unit, sphere_point, ProductState};

/// Upper-bound backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Spectral bound only; witness claims beyond it are heuristic.
    Seesaw,
    /// Grid certificate when the gridded chart is small enough.
    Grid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Number of see-saw starts; `None` means `8·k`.
    pub starts: Option<usize>,
    pub tol: f64,
    pub max_sweeps: usize,
    pub backend: Backend,
    /// Initial grid step; cells are halved while the bound is inconclusive.
    pub grid_h: f64,
    pub grid_h_min: f64,
    /// Maximum grid nodes per certification pass.
    pub grid_budget: u64,
    /// Largest gridded chart dimension (4 covers 2×2, 2×3 and 3×3).
    pub max_grid_chart_dim: usize,
    /// Maximum eigen-solves per `maximize` call.
    pub budget: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            starts: None,
            tol: 1e-10,
            max_sweeps: 200,
            backend: Backend::Grid,
            grid_h: 0.2,
            grid_h_min: 1e-9,
            grid_budget: 4_000_000,
            max_grid_chart_dim: 4,
            budget: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleStatus {
    /// A product state with `f ≥ t` was found.
    CutReady,
    /// A certified upper bound below `t` was established.
    WitnessCertified,
    /// No violating state was found and no certified bound resolves `t`.
    WitnessCandidate,
    /// The certified gap `f_lower < t ≤ f_upper` stayed open at the finest grid.
    Exhausted,
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub incumbent: ProductState,
    /// Best evaluated value, `tr(A · incumbent)`.
    pub f_lower: f64,
    /// Upper bound on `f*`.
    pub f_upper: f64,
    /// Whether `f_upper` came from the grid rather than the spectral bound.
    pub grid_certified: bool,
    /// Finest grid step used, if the grid ran.
    pub grid_h: Option<f64>,
    pub status: OracleStatus,
    pub evaluations: usize,
    /// `(f_lower, f_upper)` after every start and grid pass.
    pub history: Vec<(f64, f64)>,
}

/// `⟨αβ|A|αβ⟩`.
pub fn evaluate(a: &HermitianOp, s: &ProductState) -> Result<f64> {
    a.dims().ensure_eq(&s.dims())?;
    Ok(quadratic_form(a.matrix(), &s.vector()))
}

/// Local ascent result.
#[derive(Clone, Debug)]
pub struct Ascent {
    pub state: ProductState,
    pub value: f64,
    pub evaluations: usize,
    pub sweeps: usize,
}

fn ascend(a: &HermitianOp, start: &ProductState, tol: f64, max_sweeps: usize) -> Ascent {
    let dims = a.dims();
    let mat = a.matrix();
    let mut alpha = start.alpha().clone();
    let mut beta = start.beta().clone();
    let mut value = quadratic_form(mat, &alpha.kronecker(&beta));
    let mut evaluations = 1;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        let (_, new_alpha) = top_eigenpair_unchecked(&contract_b(mat, dims, &beta));
        let (lam, new_beta) = top_eigenpair_unchecked(&contract_a(mat, dims, &new_alpha));
        evaluations += 2;
        if lam < value {
            // Rounding at a fixed point; keep the incumbent.
            break;
        }
        alpha = new_alpha;
        beta = new_beta;
        let gain = lam - value;
        value = lam;
        if gain < tol {
            break;
        }
    }
    let state = ProductState::new(alpha, beta).expect("eigenvectors are unit vectors");
    Ascent { state, value, evaluations, sweeps }
}

/// Alternating eigenvector ascent from `start`.
pub fn seesaw_ascent(
    a: &HermitianOp,
    start: &ProductState,
    tol: f64,
    max_sweeps: usize,
) -> Result<ProductState> {
    a.dims().ensure_eq(&start.dims())?;
    Ok(ascend(a, start, tol, max_sweeps).state)
}

/// Best product approximation of the top eigenvector of `A`, plus those of the
/// next eigenvectors when the spectrum is degenerate at the top.
fn seeded_starts(a: &HermitianOp, count: usize) -> Vec<ProductState> {
    let Dims { m, n } = a.dims();
    let eig = a.matrix().clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .take(count)
        .filter_map(|k| {
            let psi = eig.eigenvectors.column(k);
            let reshaped = DMatrix::from_fn(m, n, |i, b| psi[i * n + b]);
            let svd = reshaped.svd(true, true);
            let top = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &s)| if s > best.1 + 1e-12 { (i, s) } else { best })
                .0;
            let u = svd.u.as_ref()?.column(top).into_owned();
            let v = svd.v_t.as_ref()?.row(top).transpose();
            ProductState::new(u, v).ok()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct GridCertificate {
    /// Certified upper bound on `f*`.
    pub f_upper: f64,
    /// Largest value attained on the grid (a valid lower bound).
    pub grid_best: f64,
    /// Product state attaining `grid_best`.
    pub argmax: ProductState,
    /// Lipschitz constant per unit step `h`.
    pub lipschitz: f64,
    pub points: u64,
    pub h: f64,
}

/// Chart nodes of one factor: angles `0, h, 2h, …` plus `π/2`, phases
/// `0, h, 2h, …` below `2π`. Halving `h` refines the grid.
pub(crate) fn axis_nodes(h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut angles: Vec<f64> = (0..).map(|j| j as f64 * h).take_while(|&t| t < FRAC_PI_2).collect();
    angles.push(FRAC_PI_2);
    let phases: Vec<f64> = (0..).map(|j| j as f64 * h).take_while(|&t| t < TAU).collect();
    (angles, phases)
}

/// Which factor is gridded and its dimension.
fn grid_factor(dims: Dims) -> (bool, usize) {
    if dims.m <= dims.n {
        (true, dims.m)
    } else {
        (false, dims.n)
    }
}

/// Gridded chart dimension for `dims`.
pub fn grid_chart_dim(dims: Dims) -> usize {
    2 * grid_factor(dims).1 - 2
}

/// Number of grid nodes at step `h`.
pub fn grid_size(dims: Dims, h: f64) -> u64 {
    let (_, d) = grid_factor(dims);
    let (angles, phases) = axis_nodes(h);
    (angles.len() as u64).pow(d as u32 - 1) * (phases.len() as u64).pow(d as u32 - 1)
}

/// Decodes node `idx` into chart coordinates (angles first, then phases).
pub(crate) fn node_params(mut idx: u64, d: usize, angles: &[f64], phases: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; 2 * d - 2];
    for slot in p.iter_mut().take(d - 1) {
        *slot = angles[(idx % angles.len() as u64) as usize];
        idx /= angles.len() as u64;
    }
    for slot in p.iter_mut().skip(d - 1) {
        *slot = phases[(idx % phases.len() as u64) as usize];
        idx /= phases.len() as u64;
    }
    p
}

/// Certified upper bound on `max tr(Aσ)` from a grid at step `h`.
pub fn grid_certify(a: &HermitianOp, h: f64, budget: u64) -> Result<GridCertificate> {
    grid_certify_with_limit(a, h, budget, OracleConfig::default().max_grid_chart_dim)
}

pub fn grid_certify_with_limit(
    a: &HermitianOp,
    h: f64,
    budget: u64,
    max_chart_dim: usize,
) -> Result<GridCertificate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid step {h}")));
    }
    let dims = a.dims();
    let (grid_alpha, d) = grid_factor(dims);
    let kg = 2 * d - 2;
    if kg > max_chart_dim {
        return Err(Error::InvalidParameter(format!(
            "gridded chart dimension {kg} exceeds maximum {max_chart_dim}"
        )));
    }
    let (angles, phases) = axis_nodes(h);
    let points = grid_size(dims, h);
    if points > budget {
        return Err(Error::GridTooFine { estimated: points, budget });
    }
    let mat = a.matrix();
    let eval = |idx: u64| -> f64 {
        let v = sphere_point(&node_params(idx, d, &angles, &phases), d);
        let c = if grid_alpha { contract_a(mat, dims, &v) } else { contract_b(mat, dims, &v) };
        top_eigenvalue(&c)
    };
    const CHUNK: u64 = 4096;
    let chunks = points.div_ceil(CHUNK);
    let (best_idx, grid_best) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(points);
            (lo..hi).fold((lo, f64::NEG_INFINITY), |best, i| {
                let v = eval(i);
                if v > best.1 { (i, v) } else { best }
            })
        })
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |x, y| match x.1.total_cmp(&y.1) {
                std::cmp::Ordering::Greater => x,
                std::cmp::Ordering::Less => y,
                std::cmp::Ordering::Equal => if x.0 <= y.0 { x } else { y },
            },
        );
    let mut v = sphere_point(&node_params(best_idx, d, &angles, &phases), d);
    gauge_fix(&mut v);
    let argmax = if grid_alpha {
        let (_, beta) = top_eigenpair_unchecked(&contract_a(mat, dims, &v));
        ProductState::new(v, beta)?
    } else {
        let (_, alpha) = top_eigenpair_unchecked(&contract_b(mat, dims, &v));
        ProductState::new(alpha, v)?
    };
    let spread = a.lambda_max() - a.lambda_min();
    let lipschitz = spread * (kg as f64).sqrt() / 2.0;
    // Slack covers rounding in the closed-form eigenvalues.
    let f_upper = grid_best + lipschitz * h + 1e-12 * (1.0 + spread);
    Ok(GridCertificate { f_upper, grid_best, argmax, lipschitz, points, h })
}

/// Maximizes `tr(Aσ)` with early halting against the threshold `t = tr(Aρ)`.
///
/// Halts with `CutReady` as soon as an ascent reaches `f ≥ t` and with
/// `WitnessCertified` once a certified upper bound drops below `t`. Grid
/// refinement stops at `grid_h_min` or at the grid budget.
pub fn maximize(a: &HermitianOp, threshold: f64, cfg: &OracleConfig) -> Result<OracleReport> {
    let norm = a.norm();
    if norm > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter(format!("‖A‖ = {norm} exceeds 1")));
    }
    maximize_unchecked(a, threshold, cfg)
}

pub(crate) fn maximize_unchecked(
    a: &HermitianOp,
    threshold: f64,
    cfg: &OracleConfig,
) -> Result<OracleReport> {
    if cfg.budget == 0 {
        return Err(Error::BudgetExhausted { evaluations: 0 });
    }
    let dims = a.dims();
    let starts = cfg.starts.unwrap_or(8 * dims.chart_dim()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut f_upper = a.lambda_max();
    let mut grid_certified = false;
    let mut evaluations = 0usize;
    let mut history = Vec::new();
    let mut best: Option<Ascent> = None;

    let seeded = seeded_starts(a, 2.min(starts));
    let report = |best: &Ascent, f_upper, grid_certified, grid_h, status, evaluations, history| OracleReport {
        incumbent: best.state.clone(),
        f_lower: best.value,
        f_upper,
        grid_certified,
        grid_h,
        status,
        evaluations,
        history,
    };

    for s in 0..starts {
        let start = match seeded.get(s) {
            Some(st) => st.clone(),
            None => ProductState::new(random_unit(dims.m, &mut rng), random_unit(dims.n, &mut rng))?,
        };
        let run = ascend(a, &start, cfg.tol, cfg.max_sweeps);
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
        let b = best.as_ref().unwrap();
        history.push((b.value, f_upper));
        if b.value >= threshold {
            return Ok(report(b, f_upper, false, None, OracleStatus::CutReady, evaluations, history));
        }
        if f_upper < threshold {
            return Ok(report(b, f_upper, false, None, OracleStatus::WitnessCertified, evaluations, history));
        }
        if evaluations >= cfg.budget {
            break;
        }
    }
    let mut best = best.expect("at least one start ran");

    let use_grid = cfg.backend == Backend::Grid && grid_chart_dim(dims) <= cfg.max_grid_chart_dim;
    if !use_grid {
        return Ok(report(&best, f_upper, false, None, OracleStatus::WitnessCandidate, evaluations, history));
    }

    let refined = refine(a, threshold, f_upper, cfg, &mut best, &mut evaluations, &mut history)?;
    let Some((bound, finest, status)) = refined else {
        return Ok(report(&best, f_upper, false, None, OracleStatus::WitnessCandidate, evaluations, history));
    };
    if bound < f_upper {
        f_upper = bound;
        grid_certified = true;
    }
    Ok(report(&best, f_upper, grid_certified, Some(finest), status, evaluations, history))
}

/// Grid cell of the gridded chart: a box of side `h` around `center`.
struct Cell {
    ub: f64,
    value: f64,
    lipschitz: f64,
    center: Vec<f64>,
    h: f64,
    seq: u64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Cell {}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ub.total_cmp(&other.ub).then(other.seq.cmp(&self.seq))
    }
}

/// Best-first refinement of the grid. Starts from the uniform grid at
/// `cfg.grid_h` and splits the cell with the largest bound into `2^k_g`
/// half-size cells until that bound drops below `threshold` (certified), a
/// cell value reaches it (cut), or the point budget or `grid_h_min` is hit.
/// Each cell bound is `value + L·h` with the Lipschitz constant of the module
/// docs, since every chart point of the cell lies within `(h/2)·√k_g` of its
/// center. Returns `None` when the chart is too large to grid.
fn refine(
    a: &HermitianOp,
    threshold: f64,
    spectral: f64,
    cfg: &OracleConfig,
    best: &mut Ascent,
    evaluations: &mut usize,
    history: &mut Vec<(f64, f64)>,
) -> Result<Option<(f64, f64, OracleStatus)>> {
    let dims = a.dims();
    let (grid_alpha, d) = grid_factor(dims);
    let kg = 2 * d - 2;
    if kg > cfg.max_grid_chart_dim {
        return Ok(None);
    }
    let points = grid_size(dims, cfg.grid_h);
    if points > cfg.grid_budget {
        return Ok(None);
    }
    let mat = a.matrix();
    let spread = a.lambda_max() - a.lambda_min();
    let lambda_min = a.lambda_min();
    let root = (kg as f64).sqrt() / 2.0;
    let mut lipschitz = spread * root;
    // Slack covers rounding in the closed-form eigenvalues.
    let slack = 1e-12 * (1.0 + spread);
    let eval = |p: &[f64]| -> f64 {
        let v = sphere_point(p, d);
        let c = if grid_alpha { contract_a(mat, dims, &v) } else { contract_b(mat, dims, &v) };
        top_eigenvalue(&c)
    };
    let complete = |p: &[f64]| -> ProductState {
        let mut v = sphere_point(p, d);
        gauge_fix(&mut v);
        if grid_alpha {
            let (_, beta) = top_eigenpair_unchecked(&contract_a(mat, dims, &v));
            ProductState::new(v, beta).expect("unit factors")
        } else {
            let (_, alpha) = top_eigenpair_unchecked(&contract_b(mat, dims, &v));
            ProductState::new(alpha, v).expect("unit factors")
        }
    };

    let (angles, phases) = axis_nodes(cfg.grid_h);
    let initial: Vec<(Vec<f64>, f64)> = (0..points)
        .into_par_iter()
        .map(|i| {
            let p = node_params(i, d, &angles, &phases);
            let v = eval(&p);
            (p, v)
        })
        .collect();
    let mut used = points;
    *evaluations += points as usize;
    let mut seq = 0u64;
    let mut heap = std::collections::BinaryHeap::with_capacity(initial.len());
    let mut grid_best = (f64::NEG_INFINITY, Vec::new());
    for (p, v) in initial {
        if v > grid_best.0 {
            grid_best = (v, p.clone());
        }
        let ub = v + lipschitz * cfg.grid_h + slack;
        heap.push(Cell { ub, value: v, lipschitz, center: p, h: cfg.grid_h, seq });
        seq += 1;
    }
    let mut polished_at = f64::NEG_INFINITY;
    let mut finest = cfg.grid_h;
    loop {
        if grid_best.0 > best.value && grid_best.0 > polished_at {
            polished_at = grid_best.0;
            let run = ascend(a, &complete(&grid_best.1), cfg.tol, cfg.max_sweeps);
            *evaluations += run.evaluations;
            if run.value > best.value {
                *best = run;
            }
        }
        let top = heap.peek().expect("cells are never exhausted");
        let bound = top.ub;
        // The top bound is certified, so it yields a smaller constant. Cells
        // bounded with an older constant are rebounded when they surface.
        lipschitz = lipschitz.min((bound - lambda_min).max(0.0) * root);
        if top.lipschitz > lipschitz * (1.0 + 1e-9) {
            let mut cell = heap.pop().expect("peeked");
            cell.ub = cell.value + lipschitz * cell.h + slack;
            cell.lipschitz = lipschitz;
            heap.push(cell);
            continue;
        }
        history.push((best.value, bound.min(spectral)));
        if best.value >= threshold {
            return Ok(Some((bound, finest, OracleStatus::CutReady)));
        }
        if bound < threshold {
            return Ok(Some((bound, finest, OracleStatus::WitnessCertified)));
        }
        let half = top.h / 2.0;
        let children = 1u64 << kg;
        if half < cfg.grid_h_min || used + children > cfg.grid_budget {
            return Ok(Some((bound, finest, OracleStatus::Exhausted)));
        }
        let cell = heap.pop().expect("peeked");
        finest = finest.min(half);
        for mask in 0..children {
            let center: Vec<f64> = cell
                .center
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let c = if mask >> j & 1 == 1 { c + half / 2.0 } else { c - half / 2.0 };
                    // Angles are clamped into the chart; phases wrap.
                    if j < d - 1 { c.clamp(0.0, FRAC_PI_2) } else { c }
                })
                .collect();
            let clamped = center;
            let v = eval(&clamped);
            if v > grid_best.0 {
                grid_best = (v, clamped.clone());
            }
            let ub = v + lipschitz * half + slack;
            heap.push(Cell { ub, value: v, lipschitz, center: clamped, h: half, seq });
            seq += 1;
        }
        used += children;
        *evaluations += children as usize;
    }
}

/// Runs every see-saw start without halting and returns the best state, its
/// value and the evaluation count.
pub fn best_product(a: &HermitianOp, cfg: &OracleConfig) -> (ProductState, f64, usize) {
    let dims = a.dims();
    let starts = cfg.starts.unwrap_or(8 * dims.chart_dim()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeded = seeded_starts(a, 2.min(starts));
    let mut best: Option<Ascent> = None;
    let mut evaluations = 0;
    for s in 0..starts {
        let start = match seeded.get(s) {
            Some(st) => st.clone(),
            None => ProductState::new(random_unit(dims.m, &mut rng), random_unit(dims.n, &mut rng))
                .expect("random units are normalized"),
        };
        let run = ascend(a, &start, cfg.tol, cfg.max_sweeps);
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|b| run.value > b.value) {
            best = Some(run);
        }
        if evaluations >= cfg.budget {
            break;
        }
    }
    let best = best.expect("at least one start ran");
    (best.state, best.value, evaluations)
}

/// Convenience for callers holding a raw vector pair.
pub fn product_value(a: &HermitianOp, alpha: &DVector<C64>, beta: &DVector<C64>) -> f64 {
    quadratic_form(a.matrix(), &alpha.kronecker(beta))
}
