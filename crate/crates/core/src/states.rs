//! Density matrices, pure product states, and standard test families.
//!
//! A unit vector `v ∈ C^d` with its first component real and nonnegative is
//! charted by `2d - 2` reals: hyperspherical angles `θ_1..θ_{d-1} ∈ [0, π/2]`
//! for the moduli and relative phases `φ_1..φ_{d-1} ∈ [0, 2π)`:
//!
//! ```text
//! |v_0| = cos θ_1,  |v_m| = sin θ_1 ⋯ sin θ_m cos θ_{m+1},  |v_{d-1}| = sin θ_1 ⋯ sin θ_{d-1}
//! v_m = |v_m| e^{iφ_m}   (m ≥ 1)
//! ```
//!
//! A product state `|α⟩⊗|β⟩` uses the α chart followed by the β chart, for a
//! total of `k = 2(M+N) - 4` parameters. Out-of-range angles are clamped to
//! `[0, π/2]` and phases are wrapped into `[0, 2π)`.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::hermitian::{gauge_fix, Dims, DensityMatrix, HermitianOp, C64};

/// Gauge-fixed pure product state `|α⟩⊗|β⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    alpha: DVector<C64>,
    beta: DVector<C64>,
}

fn normalize(mut v: DVector<C64>) -> Result<DVector<C64>> {
    let nrm = v.norm();
    if !(nrm > 1e-300) || !nrm.is_finite() {
        return Err(Error::NonUnitVector(nrm));
    }
    v /= C64::new(nrm, 0.0);
    gauge_fix(&mut v);
    Ok(v)
}

/// Unit vector in `C^d` from its `2d - 2` chart coordinates.
pub fn sphere_point(params: &[f64], d: usize) -> DVector<C64> {
    debug_assert_eq!(params.len(), 2 * d - 2);
    let (angles, phases) = params.split_at(d - 1);
    let mut v = DVector::from_element(d, C64::new(0.0, 0.0));
    let mut tail = 1.0;
    for m in 0..d {
        let modulus = if m + 1 < d {
            let t = angles[m].clamp(0.0, FRAC_PI_2);
            let r = tail * t.cos();
            tail *= t.sin();
            r
        } else {
            tail
        };
        v[m] = if m == 0 {
            C64::new(modulus, 0.0)
        } else {
            C64::from_polar(modulus, phases[m - 1].rem_euclid(TAU))
        };
    }
    v
}

/// Chart coordinates of a unit vector whose first component is real and
/// nonnegative. Phases of zero-modulus components are reported as 0.
pub fn sphere_params(v: &DVector<C64>) -> Vec<f64> {
    let d = v.len();
    let moduli: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    let mut out = vec![0.0; 2 * d - 2];
    for m in 0..d - 1 {
        let rest: f64 = moduli[m + 1..].iter().map(|r| r * r).sum::<f64>().sqrt();
        out[m] = rest.atan2(moduli[m]);
    }
    for m in 1..d {
        out[d - 1 + m - 1] = if moduli[m] > 1e-300 { v[m].arg().rem_euclid(TAU) } else { 0.0 };
    }
    out
}

impl ProductState {
    /// Normalizes and gauge fixes both factors.
    pub fn new(alpha: DVector<C64>, beta: DVector<C64>) -> Result<Self> {
        if alpha.len() < 2 || beta.len() < 2 {
            return Err(Error::InvalidDims { m: alpha.len(), n: beta.len() });
        }
        Ok(Self { alpha: normalize(alpha)?, beta: normalize(beta)? })
    }

    /// `|i⟩⊗|j⟩`.
    pub fn basis(dims: Dims, i: usize, j: usize) -> Self {
        let mut alpha = DVector::from_element(dims.m, C64::new(0.0, 0.0));
        let mut beta = DVector::from_element(dims.n, C64::new(0.0, 0.0));
        alpha[i] = C64::new(1.0, 0.0);
        beta[j] = C64::new(1.0, 0.0);
        Self { alpha, beta }
    }

    pub fn from_params(dims: Dims, params: &[f64]) -> Result<Self> {
        if params.len() != dims.chart_dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} parameters", dims.chart_dim()),
                got: format!("{}", params.len()),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("non-finite chart coordinate".into()));
        }
        let (pa, pb) = params.split_at(2 * dims.m - 2);
        let mut alpha = sphere_point(pa, dims.m);
        let mut beta = sphere_point(pb, dims.n);
        gauge_fix(&mut alpha);
        gauge_fix(&mut beta);
        Ok(Self { alpha, beta })
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = sphere_params(&self.alpha);
        p.extend(sphere_params(&self.beta));
        p
    }

    /// Haar-random product state.
    pub fn random<R: Rng>(dims: Dims, rng: &mut R) -> Self {
        let alpha = random_unit(dims.m, rng);
        let beta = random_unit(dims.n, rng);
        Self { alpha, beta }
    }

    pub fn dims(&self) -> Dims {
        Dims { m: self.alpha.len(), n: self.beta.len() }
    }

    pub fn alpha(&self) -> &DVector<C64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DVector<C64> {
        &self.beta
    }

    /// `|α⟩⊗|β⟩` as an `MN` vector.
    pub fn vector(&self) -> DVector<C64> {
        self.alpha.kronecker(&self.beta)
    }

    /// `|α⟩⟨α|⊗|β⟩⟨β|`.
    pub fn operator(&self) -> HermitianOp {
        let psi = self.vector();
        HermitianOp::projector(self.dims(), &psi).expect("vector length matches dims")
    }

    /// Re-applies the gauge convention; identity on constructed states.
    pub fn regauged(&self) -> Self {
        let mut alpha = self.alpha.clone();
        let mut beta = self.beta.clone();
        gauge_fix(&mut alpha);
        gauge_fix(&mut beta);
        Self { alpha, beta }
    }

    /// `|⟨α|α'⟩|² |⟨β|β'⟩|²`, the Hilbert–Schmidt inner product of the
    /// two projectors.
    pub fn overlap(&self, other: &ProductState) -> f64 {
        self.alpha.dotc(&other.alpha).norm_sqr() * self.beta.dotc(&other.beta).norm_sqr()
    }
}

pub(crate) fn random_unit<R: Rng>(d: usize, rng: &mut R) -> DVector<C64> {
    loop {
        let v = DVector::from_fn(d, |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        if let Ok(v) = normalize(v) {
            return v;
        }
    }
}

/// A convex combination of pure product states.
#[derive(Clone, Debug, Default)]
pub struct SeparableDecomposition {
    pub terms: Vec<(f64, ProductState)>,
}

impl SeparableDecomposition {
    pub fn new(terms: Vec<(f64, ProductState)>) -> Result<Self> {
        let d = Self { terms };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::WeightNormalization(0.0));
        }
        if let Some((w, _)) = self.terms.iter().find(|(w, _)| !(*w > 0.0 && *w <= 1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!("weight {w} outside (0, 1]")));
        }
        let total: f64 = self.terms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::WeightNormalization(total));
        }
        let dims = self.terms[0].1.dims();
        for (_, s) in &self.terms {
            dims.ensure_eq(&s.dims())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `Σ w_i |α_iβ_i⟩⟨α_iβ_i|`.
pub fn mix(decomp: &SeparableDecomposition) -> Result<DensityMatrix> {
    decomp.validate()?;
    let dims = decomp.terms[0].1.dims();
    let d = dims.total();
    let mut m = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for (w, s) in &decomp.terms {
        let psi = s.vector();
        m += &psi * psi.adjoint() * C64::new(*w, 0.0);
    }
    DensityMatrix::from_matrix(dims, m)
}

/// `|Φ+⟩ = (|00⟩ + |11⟩)/√2` as a density matrix.
pub fn bell_state() -> DensityMatrix {
    isotropic(2, 1.0).expect("fidelity 1 is valid")
}

/// `p|Ψ−⟩⟨Ψ−| + (1 - p) I/4` on two qubits; entangled iff `p > 1/3`.
pub fn werner(p: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("werner p = {p} outside [0, 1]")));
    }
    let dims = Dims::new(2, 2)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = DVector::from_vec(vec![
        C64::new(0.0, 0.0),
        C64::new(s, 0.0),
        C64::new(-s, 0.0),
        C64::new(0.0, 0.0),
    ]);
    let singlet = HermitianOp::projector(dims, &psi)?;
    let noise = HermitianOp::identity(dims).scale(0.25);
    let op = singlet.scale(p).axpy(1.0 - p, &noise)?;
    Ok(DensityMatrix::from_op_unchecked(op))
}

/// `F|Φ⟩⟨Φ| + (1 - F)(I - |Φ⟩⟨Φ|)/(d² - 1)` on `d×d`, with `|Φ⟩` maximally
/// entangled; entangled iff `F > 1/d`.
pub fn isotropic(d: usize, fidelity: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::InvalidParameter(format!("fidelity {fidelity} outside [0, 1]")));
    }
    let dims = Dims::new(d, d)?;
    let mut phi = DVector::from_element(d * d, C64::new(0.0, 0.0));
    for i in 0..d {
        phi[i * d + i] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    }
    let proj = HermitianOp::projector(dims, &phi)?;
    let rest = HermitianOp::identity(dims).sub(&proj)?;
    let op = proj.scale(fidelity).axpy((1.0 - fidelity) / (d * d - 1) as f64, &rest)?;
    Ok(DensityMatrix::from_op_unchecked(op))
}

/// Hilbert–Schmidt random state `GG†/tr(GG†)` with Ginibre `G`.
pub fn random_state(dims: Dims, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dims.total();
    let g = DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let mut m = &g * g.adjoint();
    let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
    m /= C64::new(tr, 0.0);
    let op = HermitianOp::new(dims, m).expect("GG† is Hermitian");
    DensityMatrix::from_op_unchecked(op)
}

/// Mixture of `r` Haar-random product states with flat-Dirichlet weights.
/// Returns the planted decomposition alongside the state.
pub fn random_separable(
    dims: Dims,
    r: usize,
    seed: u64,
) -> Result<(DensityMatrix, SeparableDecomposition)> {
    if r == 0 {
        return Err(Error::InvalidParameter("term count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<ProductState> = (0..r).map(|_| ProductState::random(dims, &mut rng)).collect();
    let raw: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let total: f64 = raw.iter().sum();
    let terms = raw.into_iter().map(|w| w / total).zip(states).collect();
    let decomp = SeparableDecomposition::new(terms)?;
    Ok((mix(&decomp)?, decomp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{norm_distance, OperatorBasis, Subsystem};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d22() -> Dims {
        Dims::new(2, 2).unwrap()
    }

    #[test]
    fn chart_origin_is_00() {
        let s = ProductState::from_params(d22(), &[0.0; 4]).unwrap();
        assert_eq!(s, ProductState::basis(d22(), 0, 0));
        assert_eq!(d22().chart_dim(), 4);
        assert_eq!(Dims::new(3, 3).unwrap().chart_dim(), 8);
    }

    #[test]
    fn out_of_chart_values_are_clamped_and_wrapped() {
        let a = ProductState::from_params(d22(), &[7.0, -1.0, 0.3, 0.2]).unwrap();
        let b = ProductState::from_params(d22(), &[FRAC_PI_2, TAU - 1.0, 0.3, 0.2]).unwrap();
        assert!(a.overlap(&b) > 1.0 - 1e-12);
        assert!(ProductState::from_params(d22(), &[0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn params_roundtrip_on_chart_interior(
            t in proptest::collection::vec(0.01f64..1.56, 3),
            f in proptest::collection::vec(0.01f64..6.27, 3),
        ) {
            let dims = Dims::new(2, 3).unwrap();
            // α: θ, φ; β: θ1, θ2, φ1, φ2
            let p = vec![t[0], f[0], t[1], t[2], f[1], f[2]];
            let s = ProductState::from_params(dims, &p).unwrap();
            let back = s.params();
            for (a, b) in p.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10, "{:?} vs {:?}", p, back);
            }
            prop_assert_eq!(s.regauged(), s.clone());
        }

        #[test]
        fn regauging_is_identity(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = ProductState::random(Dims::new(3, 2).unwrap(), &mut rng);
            prop_assert_eq!(s.regauged(), s.clone());
            prop_assert!((s.alpha().norm() - 1.0).abs() < 1e-12);
            prop_assert!((s.beta().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn werner_is_a_state(p in 0.0f64..=1.0) {
            let rho = werner(p).unwrap();
            prop_assert!((rho.op().trace() - 1.0).abs() < 1e-14);
            prop_assert!(DensityMatrix::new(rho.op().clone()).is_ok());
        }
    }

    #[test]
    fn mix_examples() {
        let dims = d22();
        let one = SeparableDecomposition::new(vec![(1.0, ProductState::basis(dims, 0, 0))]).unwrap();
        let rho = mix(&one).unwrap();
        assert_abs_diff_eq!(rho.matrix()[(0, 0)].re, 1.0);
        assert_abs_diff_eq!(rho.op().norm(), 1.0, epsilon = 1e-15);

        let two = SeparableDecomposition::new(vec![
            (0.5, ProductState::basis(dims, 0, 0)),
            (0.5, ProductState::basis(dims, 1, 1)),
        ])
        .unwrap();
        let rho = mix(&two).unwrap();
        for (i, want) in [0.5, 0.0, 0.0, 0.5].into_iter().enumerate() {
            assert_abs_diff_eq!(rho.matrix()[(i, i)].re, want);
        }

        let bad = SeparableDecomposition { terms: vec![(0.7, ProductState::basis(dims, 0, 0))] };
        assert!(matches!(mix(&bad), Err(Error::WeightNormalization(_))));
    }

    #[test]
    fn mixtures_are_ppt_and_match_their_coefficients() {
        let basis = OperatorBasis::canonical(Dims::new(2, 3).unwrap()).unwrap();
        for seed in 0..20 {
            let (rho, _) = random_separable(Dims::new(2, 3).unwrap(), 1 + seed as usize % 5, seed).unwrap();
            let pt = rho.op().partial_transpose(Subsystem::B);
            assert!(pt.lambda_min() >= -1e-10);
            let back = basis.reconstruct(&basis.coefficients(rho.op()).unwrap()).unwrap();
            assert!(norm_distance(&back, rho.op()).unwrap() < 1e-10);
        }
    }

    #[test]
    fn werner_examples() {
        let w0 = werner(0.0).unwrap();
        let mixed = DensityMatrix::maximally_mixed(d22());
        assert!(norm_distance(w0.op(), mixed.op()).unwrap() < 1e-15);
        let w1 = werner(1.0).unwrap();
        assert_abs_diff_eq!(w1.op().norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w1.matrix()[(1, 2)].re, -0.5, epsilon = 1e-15);
        // (1 - 3p)/4 vanishes at the threshold.
        let w = werner(1.0 / 3.0).unwrap();
        let pt_min = w.op().partial_transpose(Subsystem::B).lambda_min();
        assert_abs_diff_eq!(pt_min, 0.0, epsilon = 1e-14);
        assert!(werner(1.2).is_err());
    }

    #[test]
    fn random_generators_are_reproducible() {
        let dims = Dims::new(2, 3).unwrap();
        let a = random_state(dims, 17);
        let b = random_state(dims, 17);
        assert_eq!(a.matrix(), b.matrix());
        assert!(DensityMatrix::new(a.op().clone()).is_ok());
        let (x, dx) = random_separable(dims, 3, 5).unwrap();
        let (y, _) = random_separable(dims, 3, 5).unwrap();
        assert_eq!(x.matrix(), y.matrix());
        assert_eq!(dx.len(), 3);
        assert!(random_separable(dims, 0, 1).is_err());
    }

    #[test]
    fn hilbert_schmidt_ppt_fraction_regression() {
        // Under the Hilbert–Schmidt measure about 8/33 of two-qubit states are
        // PPT; this pins the sampler, not a physical claim.
        let dims = d22();
        let samples = 4000;
        let positive = (0..samples)
            .filter(|&s| random_state(dims, s).op().partial_transpose(Subsystem::B).lambda_min() >= 0.0)
            .count();
        let frac = positive as f64 / samples as f64;
        assert!((frac - 8.0 / 33.0).abs() < 0.02, "PPT fraction {frac}");
    }
}
