//! Hermitian operators on `C^M ⊗ C^N` viewed as a real inner-product space.
//!
//! The space of Hermitian `MN×MN` matrices is isomorphic to `R^n` with
//! `n = M²N²` under the Hilbert–Schmidt inner product `⟨X, Y⟩ = tr(XY)`. The
//! canonical orthonormal basis is the tensor product of normalized generalized
//! Gell-Mann matrices on each factor, so element 0 is `I/√(MN)` and every other
//! element is traceless.
//!
//! Composite indices are row-major: basis state `|i⟩⊗|a⟩` sits at `i·N + a`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Maximum entry deviation from Hermiticity accepted on input.
pub const EPS_HERM: f64 = 1e-10;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const EPS_PSD: f64 = 1e-8;
/// Allowed deviation of a density matrix trace from one.
pub const EPS_TRACE: f64 = 1e-8;
/// Largest operator-space dimension `n` for which a basis is built.
pub const MAX_OPERATOR_DIM: usize = 36 * 36;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Factor dimensions of a bipartite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub m: usize,
    pub n: usize,
}

impl Dims {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidDims { m, n });
        }
        Ok(Self { m, n })
    }

    /// Total Hilbert space dimension `MN`.
    pub fn total(&self) -> usize {
        self.m * self.n
    }

    /// Real dimension `n = M²N²` of the Hermitian operator space.
    pub fn operator_dim(&self) -> usize {
        self.total() * self.total()
    }

    /// Number `k = 2(M+N) - 4` of real parameters of a pure product state.
    pub fn chart_dim(&self) -> usize {
        2 * (self.m + self.n) - 4
    }

    pub(crate) fn ensure_eq(&self, other: &Dims) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.m, self.n),
                got: format!("{}x{}", other.m, other.n),
            });
        }
        Ok(())
    }
}

/// Which tensor factor an operation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Sparse entries `(row, col, value)` of one basis element.
type SparseEntries = Vec<(usize, usize, C64)>;

/// Orthonormal Hermitian basis of the operator space.
#[derive(Debug)]
pub struct OperatorBasis {
    dims: Dims,
    elements: Vec<SparseEntries>,
}

/// Normalized generalized Gell-Mann matrices on `C^d`, `tr(g_i g_j) = δ_ij`.
///
/// Order: identity, symmetric pairs `(j,k)` with `j < k` in lexicographic
/// order, antisymmetric pairs in the same order, then diagonal elements
/// `l = 1..d-1`.
fn gell_mann(d: usize) -> Vec<SparseEntries> {
    let mut out = Vec::with_capacity(d * d);
    let s = 1.0 / (d as f64).sqrt();
    out.push((0..d).map(|i| (i, i, C64::new(s, 0.0))).collect());
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in j + 1..d {
            out.push(vec![(j, k, C64::new(h, 0.0)), (k, j, C64::new(h, 0.0))]);
        }
    }
    for j in 0..d {
        for k in j + 1..d {
            out.push(vec![(j, k, C64::new(0.0, -h)), (k, j, C64::new(0.0, h))]);
        }
    }
    for l in 1..d {
        let c = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut e: SparseEntries = (0..l).map(|i| (i, i, C64::new(c, 0.0))).collect();
        e.push((l, l, C64::new(-(l as f64) * c, 0.0)));
        out.push(e);
    }
    out
}

impl OperatorBasis {
    /// Builds the tensor-product Gell-Mann basis. Element `a·N² + b` is
    /// `g^A_a ⊗ g^B_b`.
    pub fn build(dims: Dims) -> Result<Self> {
        Self::build_with_limit(dims, MAX_OPERATOR_DIM)
    }

    pub fn build_with_limit(dims: Dims, max_operator_dim: usize) -> Result<Self> {
        let n = dims.operator_dim();
        if n > max_operator_dim {
            return Err(Error::DimensionTooLarge { n, max: max_operator_dim });
        }
        let ga = gell_mann(dims.m);
        let gb = gell_mann(dims.n);
        let nb = dims.n;
        let mut elements = Vec::with_capacity(n);
        for a in &ga {
            for b in &gb {
                let mut e = Vec::with_capacity(a.len() * b.len());
                for &(i, j, va) in a {
                    for &(p, q, vb) in b {
                        e.push((i * nb + p, j * nb + q, va * vb));
                    }
                }
                elements.push(e);
            }
        }
        Ok(Self { dims, elements })
    }

    /// Shared canonical basis for `dims`, built once per process.
    pub fn canonical(dims: Dims) -> Result<Arc<OperatorBasis>> {
        static CACHE: OnceLock<Mutex<HashMap<Dims, Arc<OperatorBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&dims) {
            return Ok(b.clone());
        }
        let basis = Arc::new(Self::build(dims)?);
        cache.lock().unwrap().insert(dims, basis.clone());
        Ok(basis)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Dense matrix of element `i`.
    pub fn element(&self, i: usize) -> HermitianOp {
        let d = self.dims.total();
        let mut m = DMatrix::from_element(d, d, ZERO);
        for &(r, c, v) in &self.elements[i] {
            m[(r, c)] += v;
        }
        HermitianOp::from_parts(self.dims, m)
    }

    /// `tr(B_i X)` for the raw matrix `x`.
    pub fn coefficient(&self, i: usize, x: &DMatrix<C64>) -> f64 {
        self.elements[i].iter().map(|&(r, c, v)| (v * x[(c, r)]).re).sum()
    }

    /// Real coefficient vector of `x`.
    pub fn coefficients(&self, x: &HermitianOp) -> Result<Vec<f64>> {
        self.dims.ensure_eq(&x.dims)?;
        Ok((0..self.len()).map(|i| self.coefficient(i, &x.matrix)).collect())
    }

    /// Coefficients of the pure state `|ψ⟩⟨ψ|`, i.e. `⟨ψ|B_i|ψ⟩`.
    pub fn pure_coefficients(&self, psi: &DVector<C64>) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| e.iter().map(|&(r, c, v)| (psi[r].conj() * v * psi[c]).re).sum())
            .collect()
    }

    /// Inverse of [`coefficients`](Self::coefficients).
    pub fn reconstruct(&self, coeffs: &[f64]) -> Result<HermitianOp> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} coefficients", self.len()),
                got: format!("{}", coeffs.len()),
            });
        }
        let d = self.dims.total();
        let mut m = DMatrix::from_element(d, d, ZERO);
        for (e, &c) in self.elements.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for &(r, col, v) in e {
                m[(r, col)] += v * c;
            }
        }
        Ok(HermitianOp::from_parts(self.dims, m))
    }
}

/// Free-function form of [`OperatorBasis::build`].
pub fn build_basis(dims: Dims) -> Result<OperatorBasis> {
    OperatorBasis::build(dims)
}

/// A Hermitian operator on `C^M ⊗ C^N`.
///
/// Holds the dense matrix; the coefficient vector over the canonical basis is
/// derived on first use and cached.
#[derive(Clone, Debug)]
pub struct HermitianOp {
    dims: Dims,
    matrix: DMatrix<C64>,
    coeffs: OnceLock<Vec<f64>>,
}

fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl HermitianOp {
    /// Validates Hermiticity within [`EPS_HERM`] and symmetrizes.
    pub fn new(dims: Dims, matrix: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerance(dims, matrix, EPS_HERM)
    }

    pub fn with_tolerance(dims: Dims, matrix: DMatrix<C64>, eps_herm: f64) -> Result<Self> {
        let d = dims.total();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d} matrix"),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > eps_herm {
            return Err(Error::NotHermitian(defect));
        }
        let sym = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        Ok(Self::from_parts(dims, sym))
    }

    pub(crate) fn from_parts(dims: Dims, matrix: DMatrix<C64>) -> Self {
        Self { dims, matrix, coeffs: OnceLock::new() }
    }

    pub fn zero(dims: Dims) -> Self {
        let d = dims.total();
        Self::from_parts(dims, DMatrix::from_element(d, d, ZERO))
    }

    pub fn identity(dims: Dims) -> Self {
        let d = dims.total();
        Self::from_parts(dims, DMatrix::identity(d, d))
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn projector(dims: Dims, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: format!("vector of length {}", dims.total()),
                got: format!("{}", psi.len()),
            });
        }
        Ok(Self::from_parts(dims, psi * psi.adjoint()))
    }

    /// `X ⊗ Y` for Hermitian factor matrices.
    pub fn kron(x: &DMatrix<C64>, y: &DMatrix<C64>) -> Result<Self> {
        let dims = Dims::new(x.nrows(), y.nrows())?;
        Self::new(dims, x.kronecker(y))
    }

    pub fn from_coeffs(dims: Dims, coeffs: &[f64]) -> Result<Self> {
        OperatorBasis::canonical(dims)?.reconstruct(coeffs)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Coefficients over the canonical basis.
    pub fn coeffs(&self) -> &[f64] {
        self.coeffs.get_or_init(|| {
            let basis = OperatorBasis::canonical(self.dims)
                .expect("dims of a constructed operator are within the basis limit");
            (0..basis.len()).map(|i| basis.coefficient(i, &self.matrix)).collect()
        })
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// Hilbert–Schmidt norm `√tr(X²)`.
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &HermitianOp) -> Result<f64> {
        inner(self, other)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_parts(self.dims, &self.matrix * C64::new(c, 0.0))
    }

    pub fn add(&self, other: &HermitianOp) -> Result<Self> {
        self.dims.ensure_eq(&other.dims)?;
        Ok(Self::from_parts(self.dims, &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &HermitianOp) -> Result<Self> {
        self.dims.ensure_eq(&other.dims)?;
        Ok(Self::from_parts(self.dims, &self.matrix - &other.matrix))
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &HermitianOp) -> Result<Self> {
        self.dims.ensure_eq(&other.dims)?;
        Ok(Self::from_parts(self.dims, &self.matrix + &other.matrix * C64::new(c, 0.0)))
    }

    /// Removes the identity component: `X - tr(X)/(MN)·I`.
    pub fn traceless_part(&self) -> Self {
        let d = self.dims.total();
        let shift = self.trace() / d as f64;
        let mut m = self.matrix.clone();
        for i in 0..d {
            m[(i, i)] -= C64::new(shift, 0.0);
        }
        Self::from_parts(self.dims, m)
    }

    /// Unit-norm copy; `None` for (numerically) zero operators.
    pub fn normalized(&self) -> Option<Self> {
        let nrm = self.norm();
        (nrm > 1e-300).then(|| self.scale(1.0 / nrm))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn lambda_max(&self) -> f64 {
        top_eigenvalue(&self.matrix)
    }

    pub fn lambda_min(&self) -> f64 {
        -top_eigenvalue(&(-&self.matrix))
    }

    /// `⟨ψ|X|ψ⟩`.
    pub fn expectation(&self, psi: &DVector<C64>) -> f64 {
        quadratic_form(&self.matrix, psi)
    }

    pub fn partial_transpose(&self, subsystem: Subsystem) -> Self {
        let Dims { m, n } = self.dims;
        let d = m * n;
        let mut out = DMatrix::from_element(d, d, ZERO);
        for i in 0..m {
            for a in 0..n {
                for j in 0..m {
                    for b in 0..n {
                        let (r, c) = match subsystem {
                            Subsystem::B => (i * n + b, j * n + a),
                            Subsystem::A => (j * n + a, i * n + b),
                        };
                        out[(r, c)] = self.matrix[(i * n + a, j * n + b)];
                    }
                }
            }
        }
        Self::from_parts(self.dims, out)
    }

    /// `(I ⊗ ⟨β|) X (I ⊗ |β⟩)`, an `M×M` Hermitian matrix.
    pub fn conditional_on_b(&self, beta: &DVector<C64>) -> Result<DMatrix<C64>> {
        check_unit(beta, self.dims.n)?;
        Ok(contract_b(&self.matrix, self.dims, beta))
    }

    /// `(⟨α| ⊗ I) X (|α⟩ ⊗ I)`, an `N×N` Hermitian matrix.
    pub fn conditional_on_a(&self, alpha: &DVector<C64>) -> Result<DMatrix<C64>> {
        check_unit(alpha, self.dims.m)?;
        Ok(contract_a(&self.matrix, self.dims, alpha))
    }
}

fn check_unit(v: &DVector<C64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimensionMismatch {
            expected: format!("vector of length {len}"),
            got: format!("{}", v.len()),
        });
    }
    let nrm = v.norm();
    if (nrm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitVector(nrm));
    }
    Ok(())
}

pub(crate) fn contract_b(x: &DMatrix<C64>, dims: Dims, beta: &DVector<C64>) -> DMatrix<C64> {
    let Dims { m, n } = dims;
    let mut out = DMatrix::from_element(m, m, ZERO);
    for i in 0..m {
        for j in i..m {
            let mut acc = ZERO;
            for a in 0..n {
                let ba = beta[a].conj();
                let row = i * n + a;
                let mut inner_acc = ZERO;
                for b in 0..n {
                    inner_acc += x[(row, j * n + b)] * beta[b];
                }
                acc += ba * inner_acc;
            }
            out[(i, j)] = acc;
            out[(j, i)] = acc.conj();
        }
        out[(i, i)] = C64::new(out[(i, i)].re, 0.0);
    }
    out
}

pub(crate) fn contract_a(x: &DMatrix<C64>, dims: Dims, alpha: &DVector<C64>) -> DMatrix<C64> {
    let Dims { m, n } = dims;
    let mut out = DMatrix::from_element(n, n, ZERO);
    for a in 0..n {
        for b in a..n {
            let mut acc = ZERO;
            for i in 0..m {
                let ai = alpha[i].conj();
                let mut inner_acc = ZERO;
                for j in 0..m {
                    inner_acc += x[(i * n + a, j * n + b)] * alpha[j];
                }
                acc += ai * inner_acc;
            }
            out[(a, b)] = acc;
            out[(b, a)] = acc.conj();
        }
        out[(a, a)] = C64::new(out[(a, a)].re, 0.0);
    }
    out
}

/// `⟨ψ|H|ψ⟩` without validation.
pub(crate) fn quadratic_form(h: &DMatrix<C64>, psi: &DVector<C64>) -> f64 {
    let d = psi.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = ZERO;
        for j in 0..d {
            row += h[(i, j)] * psi[j];
        }
        acc += (psi[i].conj() * row).re;
    }
    acc
}

/// `tr(XY)` for Hermitian operators.
pub fn inner(x: &HermitianOp, y: &HermitianOp) -> Result<f64> {
    x.dims.ensure_eq(&y.dims)?;
    Ok(x.matrix.iter().zip(y.matrix.iter()).map(|(a, b)| (a * b.conj()).re).sum())
}

/// `‖X - Y‖ = √tr((X-Y)²)`.
pub fn norm_distance(x: &HermitianOp, y: &HermitianOp) -> Result<f64> {
    Ok(x.sub(y)?.norm())
}

pub fn partial_transpose(x: &HermitianOp, subsystem: Subsystem) -> HermitianOp {
    x.partial_transpose(subsystem)
}

/// `(I ⊗ ⟨β|) A (I ⊗ |β⟩)` for unit `β ∈ C^N`.
pub fn conditional_operator(a: &HermitianOp, beta: &DVector<C64>) -> Result<DMatrix<C64>> {
    a.conditional_on_b(beta)
}

/// Makes the first component with non-negligible modulus real and nonnegative.
pub fn gauge_fix(v: &mut DVector<C64>) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return;
    }
    if let Some(k) = v.iter().position(|z| z.norm() > 1e-12 * scale) {
        let z = v[k];
        let phase = z.conj() / z.norm();
        for c in v.iter_mut() {
            *c *= phase;
        }
        // Exactly real, so a second pass is the identity.
        v[k] = C64::new(z.norm(), 0.0);
    }
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
///
/// Degenerate top eigenspaces resolve to the normalized projection of the
/// standard basis vector best aligned with the eigenspace (lowest index
/// among ties). The returned vector is gauge fixed.
pub fn top_eigenpair(h: &DMatrix<C64>) -> Result<(f64, DVector<C64>)> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: "non-empty square matrix".into(),
            got: format!("{}x{}", h.nrows(), h.ncols()),
        });
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = hermiticity_defect(h);
    if defect > EPS_HERM * scale {
        return Err(Error::NotHermitian(defect));
    }
    Ok(top_eigenpair_unchecked(h))
}

fn degeneracy_tol(h: &DMatrix<C64>) -> f64 {
    1e-10 * h.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

pub(crate) fn top_eigenpair_unchecked(h: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let d = h.nrows();
    if d == 1 {
        return (h[(0, 0)].re, DVector::from_element(1, C64::new(1.0, 0.0)));
    }
    if d == 2 {
        let a = h[(0, 0)].re;
        let dd = h[(1, 1)].re;
        let b = h[(0, 1)];
        let half = 0.5 * (a - dd);
        let r = (half * half + b.norm_sqr()).sqrt();
        let lam = 0.5 * (a + dd) + r;
        if r <= degeneracy_tol(h) {
            return (lam, DVector::from_vec(vec![C64::new(1.0, 0.0), ZERO]));
        }
        let mut v = if a >= dd {
            DVector::from_vec(vec![C64::new(lam - dd, 0.0), b.conj()])
        } else {
            DVector::from_vec(vec![b, C64::new(lam - a, 0.0)])
        };
        let nrm = v.norm();
        v /= C64::new(nrm, 0.0);
        gauge_fix(&mut v);
        return (lam, v);
    }
    let eig = SymmetricEigen::new(h.clone());
    let lam = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = degeneracy_tol(h);
    let top: Vec<usize> = (0..d).filter(|&k| eig.eigenvalues[k] >= lam - tol).collect();
    let mut v = if top.len() == 1 {
        eig.eigenvectors.column(top[0]).into_owned()
    } else {
        // ‖P e_j‖² for the projector P onto the top eigenspace.
        let weights: Vec<f64> = (0..d)
            .map(|j| top.iter().map(|&k| eig.eigenvectors[(j, k)].norm_sqr()).sum())
            .collect();
        let best = weights.iter().copied().fold(0.0, f64::max);
        let j = weights.iter().position(|&w| w >= best - 1e-9).unwrap_or(0);
        let mut v = DVector::from_element(d, ZERO);
        for &k in &top {
            let col = eig.eigenvectors.column(k);
            let c = col[j].conj();
            for r in 0..d {
                v[r] += col[r] * c;
            }
        }
        v
    };
    let nrm = v.norm();
    v /= C64::new(nrm, 0.0);
    gauge_fix(&mut v);
    (lam, v)
}

/// Largest eigenvalue only; closed forms for dimensions 2 and 3.
pub fn top_eigenvalue(h: &DMatrix<C64>) -> f64 {
    match h.nrows() {
        1 => h[(0, 0)].re,
        2 => {
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            let half = 0.5 * (a - d);
            0.5 * (a + d) + (half * half + h[(0, 1)].norm_sqr()).sqrt()
        }
        3 => top_eigenvalue_3(h),
        _ => h.clone().symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Trigonometric solution of the characteristic cubic of a 3×3 Hermitian
/// matrix.
fn top_eigenvalue_3(h: &DMatrix<C64>) -> f64 {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let f = h[(2, 2)].re;
    let b = h[(0, 1)];
    let c = h[(0, 2)];
    let e = h[(1, 2)];
    let off = b.norm_sqr() + c.norm_sqr() + e.norm_sqr();
    let q = (a + d + f) / 3.0;
    let p2 = (a - q).powi(2) + (d - q).powi(2) + (f - q).powi(2) + 2.0 * off;
    if p2 <= 1e-300 {
        return q;
    }
    let p = (p2 / 6.0).sqrt();
    let (a, d, f) = ((a - q) / p, (d - q) / p, (f - q) / p);
    let (b, c, e) = (b / p, c / p, e / p);
    // det of the shifted, scaled matrix; real for Hermitian input.
    let det = a * d * f + 2.0 * (b * e * c.conj()).re
        - a * e.norm_sqr()
        - d * c.norm_sqr()
        - f * b.norm_sqr();
    let r = (0.5 * det).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * phi.cos()
}

/// A density operator: unit trace, positive semidefinite within tolerance.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOp,
}

impl DensityMatrix {
    pub fn new(op: HermitianOp) -> Result<Self> {
        Self::with_tolerances(op, EPS_TRACE, EPS_PSD)
    }

    pub fn with_tolerances(op: HermitianOp, eps_trace: f64, eps_psd: f64) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > eps_trace {
            return Err(Error::InvalidTrace(tr));
        }
        let min = op.lambda_min();
        if min < -eps_psd {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { op })
    }

    pub fn from_matrix(dims: Dims, matrix: DMatrix<C64>) -> Result<Self> {
        Self::new(HermitianOp::new(dims, matrix)?)
    }

    /// `I/(MN)`.
    pub fn maximally_mixed(dims: Dims) -> Self {
        let op = HermitianOp::identity(dims).scale(1.0 / dims.total() as f64);
        Self { op }
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(dims: Dims, psi: &DVector<C64>) -> Result<Self> {
        let nrm = psi.norm();
        if nrm == 0.0 {
            return Err(Error::NonUnitVector(0.0));
        }
        let unit = psi / C64::new(nrm, 0.0);
        Ok(Self { op: HermitianOp::projector(dims, &unit)? })
    }

    pub(crate) fn from_op_unchecked(op: HermitianOp) -> Self {
        Self { op }
    }

    pub fn op(&self) -> &HermitianOp {
        &self.op
    }

    pub fn dims(&self) -> Dims {
        self.op.dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.op.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn pauli(p: char) -> DMatrix<C64> {
        match p {
            'I' => DMatrix::identity(2, 2),
            'X' => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
            'Y' => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
            'Z' => DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
            _ => unreachable!(),
        }
    }

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = DVector::from_vec(vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)]);
        DensityMatrix::pure(Dims::new(2, 2).unwrap(), &psi).unwrap()
    }

    #[test]
    fn basis_sizes_and_identity_element() {
        let b = build_basis(Dims::new(2, 2).unwrap()).unwrap();
        assert_eq!(b.len(), 16);
        let e0 = b.element(0);
        for i in 0..4 {
            assert_abs_diff_eq!(e0.matrix()[(i, i)].re, 0.5, epsilon = 1e-15);
        }
        assert_eq!(build_basis(Dims::new(2, 3).unwrap()).unwrap().len(), 36);
    }

    #[test]
    fn basis_is_orthonormal() {
        for (m, n) in [(2, 2), (2, 3), (3, 3)] {
            let b = build_basis(Dims::new(m, n).unwrap()).unwrap();
            let els: Vec<_> = (0..b.len()).map(|i| b.element(i)).collect();
            for i in 0..els.len() {
                if i > 0 {
                    assert!(els[i].trace().abs() < 1e-12);
                }
                for j in 0..els.len() {
                    let g = inner(&els[i], &els[j]).unwrap();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-12, "{m}x{n} ({i},{j}) = {g}");
                }
            }
        }
    }

    #[test]
    fn oversize_basis_rejected() {
        let dims = Dims::new(3, 3).unwrap();
        assert!(matches!(
            OperatorBasis::build_with_limit(dims, 64),
            Err(Error::DimensionTooLarge { n: 81, max: 64 })
        ));
        assert!(Dims::new(1, 3).is_err());
    }

    #[test]
    fn inner_products() {
        let dims = Dims::new(2, 2).unwrap();
        let half = HermitianOp::identity(dims).scale(0.5);
        assert_abs_diff_eq!(inner(&half, &half).unwrap(), 1.0, epsilon = 1e-15);
        let rho = bell();
        assert_abs_diff_eq!(inner(rho.op(), rho.op()).unwrap(), 1.0, epsilon = 1e-14);
        let other = HermitianOp::identity(Dims::new(2, 3).unwrap());
        assert!(inner(&half, &other).is_err());
    }

    #[test]
    fn distances() {
        let rho = bell();
        let mixed = DensityMatrix::maximally_mixed(rho.dims());
        assert_abs_diff_eq!(norm_distance(rho.op(), rho.op()).unwrap(), 0.0);
        assert_abs_diff_eq!(
            norm_distance(rho.op(), mixed.op()).unwrap(),
            3f64.sqrt() / 2.0,
            epsilon = 1e-14
        );
        let zero = HermitianOp::zero(rho.dims());
        let d1 = norm_distance(rho.op(), &zero).unwrap();
        let d3 = norm_distance(&rho.op().scale(3.0), &zero).unwrap();
        assert_abs_diff_eq!(d3, 3.0 * d1, epsilon = 1e-14);
    }

    #[test]
    fn partial_transpose_of_bell() {
        let rho = bell();
        let pt = rho.op().partial_transpose(Subsystem::B);
        let ev = pt.eigenvalues();
        let want = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let twice = pt.partial_transpose(Subsystem::B);
        assert!(norm_distance(&twice, rho.op()).unwrap() < 1e-15);
        assert_abs_diff_eq!(pt.trace(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_transpose_a_and_b_are_related_by_full_transpose() {
        let rho = bell();
        let mut x = rho.op().matrix().clone();
        x[(0, 1)] = c(0.1, 0.2);
        x[(1, 0)] = c(0.1, -0.2);
        let op = HermitianOp::new(rho.dims(), x).unwrap();
        let pa = op.partial_transpose(Subsystem::A);
        let pb = op.partial_transpose(Subsystem::B);
        let full = HermitianOp::new(op.dims(), op.matrix().transpose()).unwrap();
        assert!(norm_distance(&pa, &full.partial_transpose(Subsystem::B)).unwrap() < 1e-15);
        assert_abs_diff_eq!(pa.trace(), pb.trace(), epsilon = 1e-15);
    }

    #[test]
    fn conditional_operator_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = DVector::from_vec(vec![c(s, 0.), c(s, 0.)]);
        let zz = HermitianOp::kron(&pauli('Z'), &pauli('Z')).unwrap();
        let r = conditional_operator(&zz, &plus).unwrap();
        assert!(r.iter().all(|z| z.norm() < 1e-15));
        let ii = HermitianOp::kron(&pauli('I'), &pauli('I')).unwrap();
        let r = conditional_operator(&ii, &plus).unwrap();
        assert!((r - DMatrix::<C64>::identity(2, 2)).iter().all(|z| z.norm() < 1e-15));
        let xx = HermitianOp::kron(&pauli('X'), &pauli('X')).unwrap();
        let r = conditional_operator(&xx, &plus).unwrap();
        assert!((r - pauli('X')).iter().all(|z| z.norm() < 1e-15));
        let bad = DVector::from_vec(vec![c(1., 0.), c(1., 0.)]);
        assert!(matches!(conditional_operator(&xx, &bad), Err(Error::NonUnitVector(_))));
    }

    #[test]
    fn top_eigenpair_examples() {
        let (l, v) = top_eigenpair(&pauli('Z')).unwrap();
        assert_abs_diff_eq!(l, 1.0);
        assert_abs_diff_eq!(v[0].re, 1.0);
        let (l, v) = top_eigenpair(&pauli('I')).unwrap();
        assert_abs_diff_eq!(l, 1.0);
        assert_abs_diff_eq!(v[0].re, 1.0);
        assert_abs_diff_eq!(v[1].norm(), 0.0);
        let (l, v) = top_eigenpair(&pauli('X')).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1].re, s, epsilon = 1e-12);
        let mut bad = pauli('X');
        bad[(0, 1)] = c(2.0, 0.0);
        assert!(matches!(top_eigenpair(&bad), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn degenerate_top_eigenspace_uses_best_aligned_basis_vector() {
        // diag(0, 1, 1): eigenspace span{e1, e2}, e1 wins the tie.
        let mut h = DMatrix::from_element(3, 3, ZERO);
        h[(1, 1)] = c(1.0, 0.0);
        h[(2, 2)] = c(1.0, 0.0);
        let (l, v) = top_eigenpair(&h).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1].re, 1.0, epsilon = 1e-12);
        let i4 = DMatrix::<C64>::identity(4, 4);
        let (_, v) = top_eigenpair(&i4).unwrap();
        assert_abs_diff_eq!(v[0].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_eigenvalues_match_general_solver() {
        let h = DMatrix::from_row_slice(
            3,
            3,
            &[c(0.3, 0.), c(0.1, 0.2), c(-0.4, 0.1), c(0.1, -0.2), c(-0.7, 0.), c(0.05, 0.3), c(-0.4, -0.1), c(0.05, -0.3), c(0.2, 0.)],
        );
        let general = h.clone().symmetric_eigenvalues().iter().copied().fold(f64::MIN, f64::max);
        assert_abs_diff_eq!(top_eigenvalue(&h), general, epsilon = 1e-12);
        let (l, _) = top_eigenpair(&h).unwrap();
        assert_abs_diff_eq!(l, general, epsilon = 1e-12);
    }

    #[test]
    fn density_validation() {
        let dims = Dims::new(2, 2).unwrap();
        assert!(matches!(
            DensityMatrix::new(HermitianOp::identity(dims)),
            Err(Error::InvalidTrace(_))
        ));
        let mut m = DMatrix::from_element(4, 4, ZERO);
        m[(0, 0)] = c(1.5, 0.);
        m[(1, 1)] = c(-0.5, 0.);
        assert!(matches!(DensityMatrix::from_matrix(dims, m), Err(Error::NotPsd(_))));
        let mut m = DMatrix::from_element(4, 4, ZERO);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(HermitianOp::new(dims, m), Err(Error::NotHermitian(_))));
    }
}
