// Copyright 2026 The qthermo Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense linear algebra for small closed quantum systems.
//!
//! Everything here works on explicit complex matrices of dimension 2 or 4.
//! Exponentials, Gibbs states and logarithms all go through the Hermitian
//! eigendecomposition, so they are exact up to rounding.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when validating Hermiticity of inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Minimum eigenvalue gap for a spectrum to count as non-degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Components smaller than this are skipped by the eigenvector phase convention.
const PHASE_TOL: f64 = 1e-8;

const I: C64 = C64::new(0.0, 1.0);

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Square complex matrix acting on a `dim`-dimensional Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "operator must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { m })
    }

    /// Builds an operator from row-major entries. Panics if `entries.len()` is
    /// not a perfect square; intended for literals.
    pub fn from_row_slice(entries: &[C64]) -> Self {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, entries.len(), "entries must form a square matrix");
        Self {
            m: DMatrix::from_row_slice(dim, dim, entries),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        let v = DVector::from_iterator(values.len(), values.iter().map(|&x| c(x)));
        Self {
            m: DMatrix::from_diagonal(&v),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            m: self.m.map(|z| z * factor),
        }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for k in j..d {
                worst = worst.max((self.m[(j, k)] - self.m[(k, j)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// `max |(U U† - I)_{jk}|`.
    pub fn unitarity_error(&self) -> f64 {
        let prod = &self.m * self.m.adjoint();
        let id = DMatrix::<C64>::identity(self.dim(), self.dim());
        (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (&self.m - &other.m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `[self, other]` in absolute value.
    pub fn commutator_norm(&self, other: &Operator) -> f64 {
        let comm = &self.m * &other.m - &other.m * &self.m;
        comm.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.m * v
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..d {
            for k in 0..d {
                acc += self.m[(j, k)] * other.m[(k, j)];
            }
        }
        acc
    }

    fn check_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    fn require_hermitian(&self) -> Result<()> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOL {
            return Err(Error::NotHermitian(err));
        }
        Ok(())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m + &rhs.m }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m - &rhs.m }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m * &rhs.m }
    }
}

impl Mul<&Operator> for f64 {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        rhs.scale(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: Axis) -> Operator {
    let (o, l) = (c(0.0), c(1.0));
    match axis {
        Axis::X => Operator::from_row_slice(&[o, l, l, o]),
        Axis::Y => Operator::from_row_slice(&[o, -I, I, o]),
        Axis::Z => Operator::from_row_slice(&[l, o, o, -l]),
    }
}

/// `(σx + iσy)/2`, mapping `(0,1)ᵀ` to `(1,0)ᵀ`.
pub fn sigma_plus() -> Operator {
    let sx = pauli(Axis::X);
    let isy = pauli(Axis::Y).scale_complex(I);
    (&sx + &isy).scale(0.5)
}

/// `(σx − iσy)/2`.
pub fn sigma_minus() -> Operator {
    let sx = pauli(Axis::X);
    let isy = pauli(Axis::Y).scale_complex(I);
    (&sx - &isy).scale(0.5)
}

impl Operator {
    fn scale_complex(&self, factor: C64) -> Self {
        Self {
            m: self.m.map(|z| z * factor),
        }
    }
}

/// Kronecker product with `a` as the left (most significant) factor.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator {
        m: a.m.kronecker(&b.m),
    }
}

/// Spectral decomposition `h = V diag(λ) V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, phase-fixed.
    pub vectors: DMatrix<C64>,
}

impl Eigen {
    pub fn vector(&self, index: usize) -> DVector<C64> {
        self.vectors.column(index).into_owned()
    }

    /// Smallest spacing between consecutive eigenvalues (`inf` for dim 1).
    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// `V f(Λ) V†` for a real spectral function `f`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> Operator {
        self.map_indexed(|_, lambda| f(lambda))
    }

    fn map_indexed(&self, f: impl Fn(usize, f64) -> C64) -> Operator {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let fk = f(k, self.values[k]);
            for j in 0..d {
                scaled[(j, k)] *= fk;
            }
        }
        Operator {
            m: scaled * self.vectors.adjoint(),
        }
    }

    pub fn reconstruct(&self) -> Operator {
        self.map_spectrum(c)
    }
}

/// Rotates `v` so that its first component with magnitude above 1e-8 is real
/// and non-negative.
pub fn fix_phase(v: &mut DVector<C64>) {
    if let Some(pivot) = v.iter().find(|z| z.norm() > PHASE_TOL).copied() {
        let phase = pivot.conj() / pivot.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

pub fn eig_hermitian(h: &Operator) -> Result<Eigen> {
    h.require_hermitian()?;
    let decomposition = h.m.clone().symmetric_eigen();
    let d = h.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[a]
            .partial_cmp(&decomposition.eigenvalues[b])
            .expect("eigenvalues of a Hermitian matrix are finite")
    });
    let values = order.iter().map(|&k| decomposition.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<C64>::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = decomposition.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(Eigen { values, vectors })
}

/// `exp(−i h dt)`.
pub fn propagator(h: &Operator, dt: f64) -> Result<Operator> {
    let eig = eig_hermitian(h)?;
    Ok(eig.map_spectrum(|lambda| (-I * lambda * dt).exp()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    DensityMatrix(Operator),
    PureVector(DVector<C64>),
}

impl QuantumState {
    /// Normalizes `amplitudes` and wraps them as a pure state.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        Ok(Self::PureVector(v / c(norm)))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::DensityMatrix(rho) => rho.dim(),
            Self::PureVector(psi) => psi.len(),
        }
    }

    pub fn density(&self) -> Operator {
        match self {
            Self::DensityMatrix(rho) => rho.clone(),
            Self::PureVector(psi) => Operator {
                m: psi * psi.adjoint(),
            },
        }
    }

    pub fn as_density(&self) -> Option<&Operator> {
        match self {
            Self::DensityMatrix(rho) => Some(rho),
            Self::PureVector(_) => None,
        }
    }

    pub fn as_pure(&self) -> Option<&DVector<C64>> {
        match self {
            Self::DensityMatrix(_) => None,
            Self::PureVector(psi) => Some(psi),
        }
    }

    /// `|tr ρ − 1|` or `| ‖ψ‖ − 1 |`.
    pub fn normalization_error(&self) -> f64 {
        match self {
            Self::DensityMatrix(rho) => (rho.trace() - c(1.0)).norm(),
            Self::PureVector(psi) => (psi.norm() - 1.0).abs(),
        }
    }

    /// Smallest eigenvalue of the density operator (0 for pure vectors up to rounding).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let eig = eig_hermitian(&self.density())?;
        Ok(eig.values[0])
    }

    pub fn transform(&self, u: &Operator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(match self {
            Self::DensityMatrix(rho) => Self::DensityMatrix(Operator {
                m: &u.m * &rho.m * u.m.adjoint(),
            }),
            Self::PureVector(psi) => Self::PureVector(&u.m * psi),
        })
    }

    /// `tr(ρ A)` or `⟨ψ|A|ψ⟩`, complex.
    pub fn expectation(&self, a: &Operator) -> Result<C64> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.dim(),
            });
        }
        Ok(match self {
            Self::DensityMatrix(rho) => rho.trace_product(a),
            Self::PureVector(psi) => psi.dotc(&(&a.m * psi)),
        })
    }
}

/// States at every grid point `t_0..t_N` under piecewise-constant Hamiltonians.
pub fn evolve(initial: &QuantumState, hamiltonians: &[Operator], dt: f64) -> Result<Vec<QuantumState>> {
    evolve_substeps(initial, hamiltonians, dt, 1)
}

/// Like [`evolve`], but also records `substeps − 1` intermediate states inside
/// every interval (`N·substeps + 1` states in total).
pub fn evolve_substeps(
    initial: &QuantumState,
    hamiltonians: &[Operator],
    dt: f64,
    substeps: usize,
) -> Result<Vec<QuantumState>> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and substeps ≥ 1 (dt = {dt}, substeps = {substeps})"
        )));
    }
    let mut states = Vec::with_capacity(hamiltonians.len() * substeps + 1);
    states.push(initial.clone());
    let mut current = initial.clone();
    for h in hamiltonians {
        if h.dim() != initial.dim() {
            return Err(Error::DimensionMismatch {
                expected: initial.dim(),
                got: h.dim(),
            });
        }
        let u = propagator(h, dt / substeps as f64)?;
        for _ in 0..substeps {
            current = current.transform(&u)?;
            states.push(current.clone());
        }
    }
    Ok(states)
}

/// `ln tr e^{−βh}`, computed with a shifted exponent.
pub fn log_partition(h: &Operator, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let eig = eig_hermitian(h)?;
    Ok(log_partition_of(&eig.values, beta))
}

fn log_partition_of(values: &[f64], beta: f64) -> f64 {
    let shift = values[0];
    let sum: f64 = values.iter().map(|&l| (-beta * (l - shift)).exp()).sum();
    -beta * shift + sum.ln()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be positive and finite, got {beta}; use infinite_temperature_state for the β → 0 limit"
        )));
    }
    Ok(())
}

/// `e^{−βh}/Z` as a density matrix.
pub fn gibbs_state(h: &Operator, beta: f64) -> Result<QuantumState> {
    check_beta(beta)?;
    let eig = eig_hermitian(h)?;
    let shift = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|&l| (-beta * (l - shift)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let rho = eig.map_indexed(|k, _| c(weights[k] / z));
    Ok(QuantumState::DensityMatrix(rho))
}

/// The `β → 0⁺` limit of [`gibbs_state`]: `I/dim`.
pub fn infinite_temperature_state(dim: usize) -> QuantumState {
    QuantumState::DensityMatrix(Operator::identity(dim).scale(1.0 / dim as f64))
}

/// Outcome of a projective energy measurement.
#[derive(Clone, Debug)]
pub struct EnergyMeasurement {
    pub energy: f64,
    pub state: QuantumState,
    /// Position of the outcome in the ascending spectrum.
    pub index: usize,
}

/// Born probabilities of the eigenbasis of `h` in state `rho`.
pub fn energy_probabilities(rho: &Operator, h: &Operator) -> Result<(Eigen, Vec<f64>)> {
    rho.check_dim(h)?;
    let eig = eig_hermitian(h)?;
    let gap = eig.min_gap();
    if gap <= DEGENERACY_TOL {
        return Err(Error::DegenerateSpectrum(gap));
    }
    let probs: Vec<f64> = (0..h.dim())
        .map(|k| {
            let v = eig.vector(k);
            v.dotc(&(&rho.m * &v)).re.max(0.0)
        })
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidProbabilities(total));
    }
    Ok((eig, probs))
}

pub fn measure_energy<R: Rng + ?Sized>(rho: &Operator, h: &Operator, rng: &mut R) -> Result<EnergyMeasurement> {
    let (eig, probs) = energy_probabilities(rho, h)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut index = probs.len() - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            index = k;
            break;
        }
    }
    Ok(EnergyMeasurement {
        energy: eig.values[index],
        state: QuantumState::PureVector(eig.vector(index)),
        index,
    })
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &DVector<C64>, b: &DVector<C64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.dotc(b).norm_sqr())
}

/// Eigenvector of `h_final` at spectral position `index` (ascending order).
pub fn adiabatic_target(h_final: &Operator, index: usize) -> Result<DVector<C64>> {
    let eig = eig_hermitian(h_final)?;
    let gap = eig.min_gap();
    if gap <= DEGENERACY_TOL {
        return Err(Error::DegenerateSpectrum(gap));
    }
    if index >= h_final.dim() {
        return Err(Error::InvalidParameter(format!(
            "spectral index {index} out of range for dimension {}",
            h_final.dim()
        )));
    }
    Ok(eig.vector(index))
}
