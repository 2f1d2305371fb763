//! Dense complex matrices, state vectors, deviation density matrices and
//! angular-momentum operators.
//!
//! Basis states are ordered by descending magnetic quantum number
//! `m = +j, ..., -j`. For spin 3/2 the four levels are labelled
//! `|00>, |01>, |10>, |11>` in that order.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Relative tolerance used when an operator is asserted to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|tr rho|` for deviation matrices.
pub const TRACE_TOL: f64 = 1e-10;

/// What an [`Operator`] is known to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    General,
    Hermitian,
    Unitary,
}

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
    role: Role,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({:?}) {}", self.role, self.m)
    }
}

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        Ok(Self {
            m,
            role: Role::General,
        })
    }

    /// Wraps `m` after checking it is Hermitian.
    pub fn hermitian(m: DMatrix<C64>) -> Result<Self> {
        let op = Self::new(m)?;
        op.into_hermitian()
    }

    pub(crate) fn with_role(m: DMatrix<C64>, role: Role) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m, role }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::with_role(DMatrix::zeros(dim, dim), Role::Hermitian)
    }

    pub fn identity(dim: usize) -> Self {
        Self::with_role(DMatrix::identity(dim, dim), Role::Unitary)
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self::with_role(DMatrix::from_fn(dim, dim, f), Role::General)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::with_role(
            DMatrix::from_fn(
                n,
                n,
                |i, j| if i == j { C64::from(values[i]) } else { ZERO },
            ),
            Role::Hermitian,
        )
    }

    /// `|a><b|`
    pub fn outer(a: &StateVector, b: &StateVector) -> Self {
        Self::with_role(&a.v * b.v.adjoint(), Role::General)
    }

    /// `|psi><psi|`
    pub fn projector(psi: &StateVector) -> Self {
        Self::with_role(&psi.v * psi.v.adjoint(), Role::Hermitian)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.m
            .iter()
            .zip(other.m.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max |A - A^dagger|`, elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |U U^dagger - 1|`, elementwise.
    pub fn unitarity_error(&self) -> f64 {
        let p = &self.m * self.m.adjoint();
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((p[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Hermitian within [`HERMITIAN_TOL`] relative to the largest entry.
    pub fn is_hermitian(&self) -> bool {
        self.role == Role::Hermitian
            || self.hermiticity_error() <= HERMITIAN_TOL * self.max_abs().max(1.0)
    }

    pub fn into_hermitian(mut self) -> Result<Self> {
        if self.role == Role::Hermitian {
            return Ok(self);
        }
        let deviation = self.hermiticity_error();
        if deviation > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        self.role = Role::Hermitian;
        Ok(self)
    }

    pub fn adjoint(&self) -> Self {
        Self::with_role(self.m.adjoint(), self.role)
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        let role = if self.role == Role::Unitary {
            Role::General
        } else {
            self.role
        };
        Self::with_role(&self.m * C64::from(s), role)
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self::with_role(&self.m * s, Role::General)
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &Operator) -> Self {
        Self::with_role(&self.m * &other.m - &other.m * &self.m, Role::General)
    }

    /// `U A U^dagger`
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        let role = if self.role == Role::Hermitian {
            Role::Hermitian
        } else {
            Role::General
        };
        Self::with_role(&u.m * &self.m * u.m.adjoint(), role)
    }

    /// `Tr(A B)`
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self.m[(i, k)] * other.m[(k, i)];
            }
        }
        acc
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        StateVector {
            v: &self.m * &psi.v,
        }
    }

    /// Real eigenvalues (ascending) and eigenvectors of a Hermitian operator.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        if !self.is_hermitian() {
            return Err(Error::NotHermitian {
                deviation: self.hermiticity_error(),
            });
        }
        let eig = SymmetricEigen::new(self.m.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            eig.eigenvectors[(i, order[j])]
        });
        Ok(HermitianEigen { values, vectors })
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.m[idx]
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        let role = if self.role == Role::Unitary && rhs.role == Role::Unitary {
            Role::Unitary
        } else {
            Role::General
        };
        Operator::with_role(&self.m * &rhs.m, role)
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        let role = if self.role == Role::Hermitian && rhs.role == Role::Hermitian {
            Role::Hermitian
        } else {
            Role::General
        };
        Operator::with_role(&self.m + &rhs.m, role)
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        let role = if self.role == Role::Hermitian && rhs.role == Role::Hermitian {
            Role::Hermitian
        } else {
            Role::General
        };
        Operator::with_role(&self.m - &rhs.m, role)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        let role = if self.role == Role::Unitary {
            Role::General
        } else {
            self.role
        };
        Operator::with_role(-&self.m, role)
    }
}

/// Spectral decomposition `H = V diag(values) V^dagger`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// `V f(diag) V^dagger`
    pub fn map(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// `U = exp(-i H t)` by Hermitian eigendecomposition.
pub fn expm_generator(h: &Operator, t: f64) -> Result<Operator> {
    let eig = h.eigh()?;
    Ok(Operator::with_role(
        eig.map(|lambda| C64::from_polar(1.0, -lambda * t)),
        Role::Unitary,
    ))
}

/// Pure state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    v: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes`.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            v: v / C64::from(norm),
        })
    }

    /// Computational basis state `|w_k>`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = ONE;
        Self { v }
    }

    /// Uniform superposition `|s>`.
    pub fn uniform(dim: usize) -> Self {
        Self {
            v: DVector::from_element(dim, C64::from(1.0 / (dim as f64).sqrt())),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.v.dotc(&other.v)
    }
}

/// Traceless Hermitian part of a density operator.
///
/// The identity part is implicit. Thermal equilibrium is `I_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DeviationRecord", try_from = "DeviationRecord")]
pub struct DeviationState {
    rho: Operator,
}

impl DeviationState {
    pub fn new(rho: Operator) -> Result<Self> {
        let rho = rho.into_hermitian()?;
        let trace = rho.trace().norm();
        if trace > TRACE_TOL * rho.max_abs().max(1.0) {
            return Err(Error::NotTraceless { trace });
        }
        Ok(Self { rho })
    }

    pub(crate) fn from_operator_unchecked(rho: Operator) -> Self {
        Self {
            rho: Operator::with_role(rho.m, Role::Hermitian),
        }
    }

    /// `I_z` for spin `(dim - 1)/2`.
    pub fn equilibrium(dim: usize) -> Self {
        let j = (dim as f64 - 1.0) / 2.0;
        Self {
            rho: Operator::diagonal(&(0..dim).map(|k| j - k as f64).collect::<Vec<_>>()),
        }
    }

    /// `2|psi><psi| - (2/N) 1`; for `N = 4` this is `2|psi><psi| - 1/2`.
    pub fn pseudopure(psi: &StateVector) -> Self {
        let n = psi.dim();
        let p = Operator::projector(psi).scale(2.0);
        let shift = Operator::identity(n).scale(2.0 / n as f64);
        Self {
            rho: Operator::with_role((&p - &shift).m, Role::Hermitian),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.rho
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.rho[(k, k)].re).collect()
    }

    /// `U rho U^dagger`
    pub fn rotated(&self, u: &Operator) -> Self {
        Self::from_operator_unchecked(self.rho.conjugate_by(u))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_operator_unchecked(self.rho.scale(s))
    }

    /// Largest off-diagonal magnitude.
    pub fn max_coherence(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.rho[(i, j)].norm());
                }
            }
        }
        worst
    }

    /// Sum of `states`, each divided by the count.
    pub fn average(states: &[DeviationState]) -> Result<Self> {
        let first = states.first().ok_or(Error::ZeroNorm)?;
        let mut acc = first.rho.m.clone();
        for s in &states[1..] {
            if s.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: s.dim(),
                });
            }
            acc += &s.rho.m;
        }
        acc /= C64::from(states.len() as f64);
        Ok(Self::from_operator_unchecked(Operator::with_role(
            acc,
            Role::Hermitian,
        )))
    }

    pub fn linear_combination(&self, a: f64, other: &DeviationState, b: f64) -> Self {
        Self::from_operator_unchecked(Operator::with_role(
            &self.rho.m * C64::from(a) + &other.rho.m * C64::from(b),
            Role::Hermitian,
        ))
    }
}

/// Serializable form of a deviation matrix: rows of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DeviationRecord {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl From<&DeviationState> for DeviationRecord {
    fn from(s: &DeviationState) -> Self {
        let n = s.dim();
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| [s.rho[(i, j)].re, s.rho[(i, j)].im])
                    .collect()
            })
            .collect();
        Self { dim: n, entries }
    }
}

impl From<DeviationState> for DeviationRecord {
    fn from(s: DeviationState) -> Self {
        Self::from(&s)
    }
}

impl TryFrom<DeviationRecord> for DeviationState {
    type Error = Error;
    fn try_from(r: DeviationRecord) -> Result<Self> {
        Self::try_from(&r)
    }
}

impl TryFrom<&DeviationRecord> for DeviationState {
    type Error = Error;
    fn try_from(r: &DeviationRecord) -> Result<Self> {
        if r.entries.len() != r.dim || r.entries.iter().any(|row| row.len() != r.dim) {
            return Err(Error::DimensionMismatch {
                expected: r.dim,
                found: r.entries.len(),
            });
        }
        let m = DMatrix::from_fn(r.dim, r.dim, |i, j| {
            C64::new(r.entries[i][j][0], r.entries[i][j][1])
        });
        DeviationState::new(Operator::new(m)?)
    }
}

/// States that can be propagated and compared.
pub trait QuantumState: Clone {
    fn dim(&self) -> usize;
    /// Apply the unitary `u`.
    fn evolve(&self, u: &Operator) -> Self;
    /// See [`fidelity`].
    fn fidelity(&self, other: &Self) -> Result<f64>;
}

impl QuantumState for StateVector {
    fn dim(&self) -> usize {
        self.v.len()
    }

    fn evolve(&self, u: &Operator) -> Self {
        u.apply(self)
    }

    fn fidelity(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(self.inner(other).norm_sqr() / (na * na * nb * nb))
    }
}

impl QuantumState for DeviationState {
    fn dim(&self) -> usize {
        self.rho.dim()
    }

    fn evolve(&self, u: &Operator) -> Self {
        self.rotated(u)
    }

    fn fidelity(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        let aa = self.rho.trace_product(&self.rho).re;
        let bb = other.rho.trace_product(&other.rho).re;
        if aa <= 0.0 || bb <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(self.rho.trace_product(&other.rho).re / (aa * bb).sqrt())
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `|<a|b>|^2` for vectors, `Tr(AB)/sqrt(Tr A^2 Tr B^2)` for deviations.
pub fn fidelity<S: QuantumState>(a: &S, b: &S) -> Result<f64> {
    a.fidelity(b)
}

/// Cartesian angular-momentum operators for one spin.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub ix: Operator,
    pub iy: Operator,
    pub iz: Operator,
}

impl SpinMatrices {
    /// `I+ = Ix + i Iy`
    pub fn raising(&self) -> Operator {
        &self.ix + &self.iy.scale_complex(I)
    }
}

/// Angular-momentum matrices for spin `j`, built from the ladder operators.
pub fn spin_matrices(j: f64) -> Result<SpinMatrices> {
    let twice = 2.0 * j;
    if !(j > 0.0) || (twice - twice.round()).abs() > 1e-12 {
        return Err(Error::NonHalfIntegerSpin(j));
    }
    let dim = twice.round() as usize + 1;
    let m = |k: usize| j - k as f64;
    // <m+1| I+ |m> sits at (k-1, k) when rows run m = +j .. -j.
    let raising = DMatrix::from_fn(dim, dim, |r, c| {
        if c == r + 1 {
            C64::from((j * (j + 1.0) - m(c) * (m(c) + 1.0)).sqrt())
        } else {
            ZERO
        }
    });
    let lowering = raising.adjoint();
    let ix = (&raising + &lowering) * C64::from(0.5);
    let iy = (&raising - &lowering) * C64::new(0.0, -0.5);
    let iz = DMatrix::from_fn(dim, dim, |r, c| if r == c { C64::from(m(r)) } else { ZERO });
    Ok(SpinMatrices {
        ix: Operator::with_role(ix, Role::Hermitian),
        iy: Operator::with_role(iy, Role::Hermitian),
        iz: Operator::with_role(iz, Role::Hermitian),
    })
}

/// Spin-3/2 operators, the only ones the NMR model uses.
pub fn spin_three_halves() -> SpinMatrices {
    spin_matrices(1.5).expect("3/2 is a half-integer")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn iy_matches_published_spin_three_halves_matrix() {
        let s = spin_three_halves();
        let h = 3f64.sqrt() / 2.0;
        assert!((s.iy[(0, 1)] - c(0.0, -h)).norm() < 1e-15);
        assert!((s.iy[(1, 0)] - c(0.0, h)).norm() < 1e-15);
        assert!((s.iy[(1, 2)] - c(0.0, -1.0)).norm() < 1e-15);
        assert!((s.iy[(2, 3)] - c(0.0, -h)).norm() < 1e-15);
        assert!(s.iy[(0, 2)].norm() == 0.0 && s.iy[(0, 3)].norm() == 0.0);
        let diag: Vec<f64> = (0..4).map(|k| s.iz[(k, k)].re).collect();
        assert_eq!(diag, vec![1.5, 0.5, -0.5, -1.5]);
    }

    #[test]
    fn algebra_holds_for_several_spins() {
        for j in [0.5, 1.0, 1.5, 2.0, 3.5] {
            let s = spin_matrices(j).unwrap();
            let lhs = s.ix.commutator(&s.iy);
            let rhs = s.iz.scale_complex(I);
            assert!(lhs.max_abs_diff(&rhs) < 1e-12, "j = {j}");
            let casimir = &(&(&s.ix * &s.ix) + &(&s.iy * &s.iy)) + &(&s.iz * &s.iz);
            let expected = Operator::identity(s.iz.dim()).scale(j * (j + 1.0));
            assert!(casimir.max_abs_diff(&expected) < 1e-12, "j = {j}");
        }
    }

    #[test]
    fn rejects_non_half_integer_spin() {
        assert!(matches!(
            spin_matrices(0.7),
            Err(Error::NonHalfIntegerSpin(_))
        ));
        assert!(matches!(
            spin_matrices(0.0),
            Err(Error::NonHalfIntegerSpin(_))
        ));
        assert!(matches!(
            spin_matrices(-1.5),
            Err(Error::NonHalfIntegerSpin(_))
        ));
    }

    #[test]
    fn expm_at_zero_time_is_identity() {
        let s = spin_three_halves();
        let u = expm_generator(&s.ix.scale(1e3), 0.0).unwrap();
        assert!(u.max_abs_diff(&Operator::identity(4)) < 1e-15);
    }

    #[test]
    fn expm_of_diagonal_generator() {
        let eps = [-3.0e3, -1.1e3, 0.9e3, 3.2e3];
        let t = 1.7e-3;
        let u = expm_generator(&Operator::diagonal(&eps), t).unwrap();
        for (k, e) in eps.iter().enumerate() {
            assert!((u[(k, k)] - C64::from_polar(1.0, -e * t)).norm() < 1e-12);
        }
        assert!(u.unitarity_error() < 1e-12);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let a = Operator::from_fn(2, |i, j| if i == 0 && j == 1 { ONE } else { ZERO });
        assert!(matches!(
            expm_generator(&a, 1.0),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn fidelity_of_pseudopure_basis_states() {
        let a = DeviationState::pseudopure(&StateVector::basis(4, 0));
        let b = DeviationState::pseudopure(&StateVector::basis(4, 1));
        // diag(3,-1,-1,-1)/2 . diag(-1,3,-1,-1)/2: Tr(AB) = (-3 - 3 + 1 + 1)/4 = -1, Tr(A^2) = 3
        let trace_ab: f64 = a
            .populations()
            .iter()
            .zip(b.populations())
            .map(|(x, y)| x * y)
            .sum();
        let trace_aa: f64 = a.populations().iter().map(|x| x * x).sum();
        assert_eq!((trace_ab, trace_aa), (-1.0, 3.0));
        assert!((fidelity(&a, &b).unwrap() - trace_ab / trace_aa).abs() < 1e-14);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-14);
        let s = StateVector::uniform(4);
        for k in 0..4 {
            assert!((fidelity(&s, &StateVector::basis(4, k)).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn fidelity_rejects_zero_norm_and_mismatched_dims() {
        let zero = DeviationState::from_operator_unchecked(Operator::zeros(4));
        let eq = DeviationState::equilibrium(4);
        assert!(matches!(fidelity(&zero, &eq), Err(Error::ZeroNorm)));
        assert!(matches!(
            fidelity(&StateVector::uniform(2), &StateVector::uniform(4)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            StateVector::new(vec![ZERO; 3]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn deviation_constructor_validates() {
        let not_traceless = Operator::diagonal(&[1.0, 0.0]);
        assert!(matches!(
            DeviationState::new(not_traceless),
            Err(Error::NotTraceless { .. })
        ));
        let rec = DeviationRecord::from(&DeviationState::equilibrium(4));
        let back = DeviationState::try_from(&rec).unwrap();
        assert_eq!(back, DeviationState::equilibrium(4));
    }

    #[test]
    fn pseudopure_of_00_from_spin_populations() {
        let p = DeviationState::pseudopure(&StateVector::basis(4, 0)).populations();
        assert_eq!(p, vec![1.5, -0.5, -0.5, -0.5]);
    }
}
