//! Measurement statistics for a finite microsystem coupled to a finite
//! instrument of the first kind.
//!
//! The microsystem basis is the standard basis `u_0..u_{n-1}` of its energy
//! eigenstates. Coupling to branch `r` evolves the instrument with
//! `K_r = K + V_r + ε_r·I`, and every statistic of the composite is carried by
//! the tensor `F[r, s; α] = Tr(U_r(t)† Ω U_s(t) Π_α)` with `U_r(t) = exp(i K_r t)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{
    expm_hermitian_with, trace_product, ComplexOperator, DensityOperator, ProjectorOperator,
    Tolerances,
};
use crate::numerics::KahanSum;
use crate::scalar::{cr, modulus, Complex, Real};

/// Tolerances and thresholds for the measurement-statistics layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameworkConfig<T> {
    pub linalg: Tolerances<T>,
    /// Accepted deviation of `Σ|c_r|²` from one.
    pub norm_tol: T,
    /// Largest imaginary part tolerated in a real-valued functional.
    pub residue_tol: T,
    /// Conditional expectations are undefined for cell weights below this.
    pub w_floor: T,
    pub ideal_tol: T,
    pub eta_threshold: T,
    pub tie_tol: T,
}

impl<T: Real> Default for FrameworkConfig<T> {
    fn default() -> Self {
        Self {
            linalg: Tolerances::default(),
            norm_tol: T::lit(1e-10),
            residue_tol: T::lit(1e-10),
            w_floor: T::lit(1e-12),
            ideal_tol: T::lit(1e-12),
            eta_threshold: T::lit(1e-2),
            tie_tol: T::lit(1e-9),
        }
    }
}

/// Normalized superposition `ψ = Σ c_r u_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState<T: Real> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> MicroState<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        Self::with_tolerance(amplitudes, T::lit(1e-10))
    }

    pub fn with_tolerance(amplitudes: Vec<Complex<T>>, tol: T) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty microstate".into()));
        }
        let norm: T = amplitudes.iter().fold(T::ZERO, |acc, z| acc + z.norm_sqr());
        let deviation = (norm - T::ONE).abs();
        if !(deviation <= tol) {
            return Err(Error::Normalization {
                deviation: deviation.as_f64(),
            });
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[T]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| cr(a)).collect())
    }

    /// Basis state `u_r` of an `n`-level system.
    pub fn basis(n: usize, r: usize) -> Self {
        let mut amplitudes = vec![cr(T::ZERO); n];
        amplitudes[r] = cr(T::ONE);
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn n(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn populations(&self) -> Vec<T> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Energy levels `ε_r` of the microsystem Hamiltonian `H = Σ ε_r P(u_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroSystem<T> {
    energies: Vec<T>,
}

impl<T: Real> MicroSystem<T> {
    pub fn new(energies: Vec<T>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidParameter(
                "microsystem needs at least one level".into(),
            ));
        }
        if let Some(bad) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite energy {bad}")));
        }
        Ok(Self { energies })
    }

    /// `n` degenerate levels at zero energy.
    pub fn degenerate(n: usize) -> Self {
        Self {
            energies: vec![T::ZERO; n],
        }
    }

    pub fn n(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }
}

/// Instrument: free Hamiltonian `K`, branch couplings `V_r` and pointer cells
/// `Π_α` that resolve the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentModel<T: Real> {
    free: ComplexOperator<T>,
    couplings: Vec<ComplexOperator<T>>,
    cells: Vec<ProjectorOperator<T>>,
}

impl<T: Real> InstrumentModel<T> {
    pub fn new(
        free: ComplexOperator<T>,
        couplings: Vec<ComplexOperator<T>>,
        cells: Vec<ProjectorOperator<T>>,
    ) -> Result<Self> {
        Self::with_tolerances(free, couplings, cells, &Tolerances::default())
    }

    pub fn with_tolerances(
        free: ComplexOperator<T>,
        couplings: Vec<ComplexOperator<T>>,
        cells: Vec<ProjectorOperator<T>>,
        tol: &Tolerances<T>,
    ) -> Result<Self> {
        let dim = free.dim();
        if couplings.is_empty() {
            return Err(Error::InvalidParameter(
                "instrument needs at least one coupling".into(),
            ));
        }
        if cells.len() != couplings.len() {
            return Err(Error::DimensionMismatch {
                expected: couplings.len(),
                found: cells.len(),
            });
        }
        let deviation = free.hermitian_deviation();
        if !(deviation <= tol.herm) {
            return Err(Error::NotHermitian {
                deviation: deviation.as_f64(),
            });
        }
        for v in &couplings {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.dim(),
                });
            }
            let deviation = v.hermitian_deviation();
            if !(deviation <= tol.herm) {
                return Err(Error::NotHermitian {
                    deviation: deviation.as_f64(),
                });
            }
        }
        for p in &cells {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        for (a, pa) in cells.iter().enumerate() {
            for (b, pb) in cells.iter().enumerate().skip(a + 1) {
                let overlap = (pa.op() * pb.op()).max_abs_diff(&ComplexOperator::zeros(dim));
                if !(overlap <= tol.herm) {
                    return Err(Error::InvalidPartition(format!(
                        "cells {a} and {b} are not orthogonal (deviation {overlap:e})"
                    )));
                }
            }
        }
        let total = cells
            .iter()
            .fold(ComplexOperator::zeros(dim), |acc, p| &acc + p.op());
        let deviation = total.max_abs_diff(&ComplexOperator::identity(dim));
        if !(deviation <= tol.herm) {
            return Err(Error::InvalidPartition(format!(
                "cells sum to the identity only within {deviation:e}"
            )));
        }
        Ok(Self {
            free,
            couplings,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.free.dim()
    }

    /// Number of microsystem levels (equal to the number of pointer cells).
    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    pub fn free_hamiltonian(&self) -> &ComplexOperator<T> {
        &self.free
    }

    pub fn couplings(&self) -> &[ComplexOperator<T>] {
        &self.couplings
    }

    pub fn cells(&self) -> &[ProjectorOperator<T>] {
        &self.cells
    }
}

fn check_levels<T: Real>(sys: &MicroSystem<T>, inst: &InstrumentModel<T>) -> Result<()> {
    if sys.n() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            found: sys.n(),
        });
    }
    Ok(())
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    Ok(())
}

/// `K_r = K + V_r + ε_r·I`.
pub fn effective_hamiltonian<T: Real>(
    sys: &MicroSystem<T>,
    inst: &InstrumentModel<T>,
    r: usize,
) -> Result<ComplexOperator<T>> {
    check_levels(sys, inst)?;
    check_index(r, sys.n())?;
    let shift = ComplexOperator::identity(inst.dim()).scale_real(sys.energies[r]);
    Ok(&(&inst.free + &inst.couplings[r]) + &shift)
}

fn propagators<T: Real>(
    sys: &MicroSystem<T>,
    inst: &InstrumentModel<T>,
    t: T,
    tol: &Tolerances<T>,
) -> Result<Vec<ComplexOperator<T>>> {
    (0..sys.n())
        .map(|r| expm_hermitian_with(&effective_hamiltonian(sys, inst, r)?, t, tol))
        .collect()
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t >= T::ZERO) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time must be finite and non-negative, got {t}"
        )));
    }
    Ok(())
}

fn check_state_dim<T: Real>(inst: &InstrumentModel<T>, omega: &DensityOperator<T>) -> Result<()> {
    if omega.dim() != inst.dim() {
        return Err(Error::DimensionMismatch {
            expected: inst.dim(),
            found: omega.dim(),
        });
    }
    Ok(())
}

/// `Ω_{r,s}(t) = U_r(t)† Ω U_s(t)`.
pub fn cross_evolved_state<T: Real>(
    inst: &InstrumentModel<T>,
    sys: &MicroSystem<T>,
    omega: &DensityOperator<T>,
    r: usize,
    s: usize,
    t: T,
) -> Result<ComplexOperator<T>> {
    check_levels(sys, inst)?;
    check_state_dim(inst, omega)?;
    check_index(r, sys.n())?;
    check_index(s, sys.n())?;
    check_time(t)?;
    let tol = Tolerances::default();
    let ur = expm_hermitian_with(&effective_hamiltonian(sys, inst, r)?, t, &tol)?;
    let us = expm_hermitian_with(&effective_hamiltonian(sys, inst, s)?, t, &tol)?;
    Ok(&(&ur.adjoint() * omega.op()) * &us)
}

/// Complex tensor `F[r, s; α]`, all indices in `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FTensor<T: Real> {
    n: usize,
    values: Vec<Complex<T>>,
}

impl<T: Real> FTensor<T> {
    /// Builds a tensor from a generator `f(r, s, α)`. No invariants are
    /// checked; see [`FTensor::check_invariants`].
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> Complex<T>) -> Self {
        let mut values = Vec::with_capacity(n * n * n);
        for r in 0..n {
            for s in 0..n {
                for alpha in 0..n {
                    values.push(f(r, s, alpha));
                }
            }
        }
        Self { n, values }
    }

    /// Ideal tensor for the assignment `a`: `F[r,r;α] = δ_{a(r),α}` and all
    /// off-diagonal entries zero.
    pub fn ideal(assignment: &[usize]) -> Self {
        Self::from_fn(assignment.len(), |r, s, alpha| {
            if r == s && assignment[r] == alpha {
                cr(T::ONE)
            } else {
                cr(T::ZERO)
            }
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, s: usize, alpha: usize) -> Complex<T> {
        self.values[(r * self.n + s) * self.n + alpha]
    }

    /// Pointer-cell sum `Σ_α F[r, s; α]`.
    pub fn cell_sum(&self, r: usize, s: usize) -> Complex<T> {
        (0..self.n).fold(cr(T::ZERO), |acc, a| acc + self.get(r, s, a))
    }

    /// The `n × n` matrix `F[·, ·; α]`.
    pub fn cell_matrix(&self, alpha: usize) -> ComplexOperator<T> {
        ComplexOperator::from_fn(self.n, |r, s| self.get(r, s, alpha))
    }

    /// Checks row sums, range, Hermiticity in `(r, s)` and per-cell positivity.
    pub fn check_invariants(&self, tol: T) -> Result<()> {
        let n = self.n;
        for r in 0..n {
            let sum = self.cell_sum(r, r);
            if !(modulus(sum - cr(T::ONE)) <= tol) {
                return Err(Error::InvalidParameter(format!(
                    "row {r} sums to {sum}, not 1"
                )));
            }
            for alpha in 0..n {
                let d = self.get(r, r, alpha);
                if !(d.re >= -tol && d.re <= T::ONE + tol && d.im.abs() <= tol) {
                    return Err(Error::InvalidParameter(format!(
                        "diagonal entry F[{r},{r};{alpha}] = {d} outside [0, 1]"
                    )));
                }
            }
        }
        for alpha in 0..n {
            let m = self.cell_matrix(alpha);
            let herm = m.hermitian_deviation();
            if !(herm <= tol) {
                return Err(Error::InvalidParameter(format!(
                    "cell {alpha} block is not Hermitian in (r, s): deviation {herm}"
                )));
            }
            let lowest = m.hermitian_eigenvalues()[0];
            if !(lowest >= -tol) {
                return Err(Error::InvalidParameter(format!(
                    "cell {alpha} block has negative eigenvalue {lowest}"
                )));
            }
        }
        Ok(())
    }
}

/// Computes the full tensor at time `t` after coupling at `t = 0`.
pub fn f_tensor<T: Real>(
    inst: &InstrumentModel<T>,
    sys: &MicroSystem<T>,
    omega: &DensityOperator<T>,
    t: T,
) -> Result<FTensor<T>> {
    f_tensor_with(inst, sys, omega, t, &Tolerances::default())
}

pub fn f_tensor_with<T: Real>(
    inst: &InstrumentModel<T>,
    sys: &MicroSystem<T>,
    omega: &DensityOperator<T>,
    t: T,
    tol: &Tolerances<T>,
) -> Result<FTensor<T>> {
    check_levels(sys, inst)?;
    check_state_dim(inst, omega)?;
    check_time(t)?;
    let n = sys.n();
    let us = propagators(sys, inst, t, tol)?;
    let left: Vec<ComplexOperator<T>> = us.iter().map(|u| &u.adjoint() * omega.op()).collect();
    let mut values = Vec::with_capacity(n * n * n);
    for l in &left {
        for u in &us {
            let cross = l * u;
            for cell in &inst.cells {
                values.push(trace_product(&cross, cell.op())?);
            }
        }
    }
    Ok(FTensor { n, values })
}

fn check_observable<T: Real>(
    f: &FTensor<T>,
    psi: &MicroState<T>,
    a: &ComplexOperator<T>,
    cfg: &FrameworkConfig<T>,
) -> Result<()> {
    check_state(f, psi)?;
    if a.dim() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            found: a.dim(),
        });
    }
    let deviation = a.hermitian_deviation();
    if !(deviation <= cfg.linalg.herm) {
        return Err(Error::NotHermitian {
            deviation: deviation.as_f64(),
        });
    }
    Ok(())
}

fn check_state<T: Real>(f: &FTensor<T>, psi: &MicroState<T>) -> Result<()> {
    if psi.n() != f.n {
        return Err(Error::DimensionMismatch {
            expected: f.n,
            found: psi.n(),
        });
    }
    Ok(())
}

fn real_part<T: Real>(z: Complex<T>, tol: T) -> Result<T> {
    if !(z.im.abs() <= tol) {
        return Err(Error::ImaginaryResidue {
            residue: z.im.as_f64(),
        });
    }
    Ok(z.re)
}

/// `E(A)` for an observable `A` of the microsystem (Hermitian, `n × n`).
///
/// Off-diagonal terms carry `c_r c̄_s A_{sr} Σ_α F[r,s;α]`, the index
/// placement produced by evolving `P(ψ) ⊗ Ω` with `U_c = Σ_r P(u_r) ⊗ U_r`.
pub fn expectation<T: Real>(
    f: &FTensor<T>,
    psi: &MicroState<T>,
    a: &ComplexOperator<T>,
    cfg: &FrameworkConfig<T>,
) -> Result<T> {
    check_observable(f, psi, a, cfg)?;
    let c = psi.amplitudes();
    let mut acc = cr(T::ZERO);
    for r in 0..f.n {
        acc += cr(c[r].norm_sqr()) * a.get(r, r);
        for s in (0..f.n).filter(|&s| s != r) {
            acc += c[r] * c[s].conj() * a.get(s, r) * f.cell_sum(r, s);
        }
    }
    real_part(acc, cfg.residue_tol)
}

/// Pointer weights `w_α = Σ_r |c_r|² F[r,r;α]`.
pub fn pointer_probabilities<T: Real>(f: &FTensor<T>, psi: &MicroState<T>) -> Result<Vec<T>> {
    check_state(f, psi)?;
    let pops = psi.populations();
    Ok((0..f.n)
        .map(|alpha| (0..f.n).fold(T::ZERO, |acc, r| acc + pops[r] * f.get(r, r, alpha).re))
        .collect())
}

/// `E(A | 𝒦_α)`, defined only when `w_α` exceeds `cfg.w_floor`.
pub fn conditional_expectation<T: Real>(
    f: &FTensor<T>,
    psi: &MicroState<T>,
    a: &ComplexOperator<T>,
    alpha: usize,
    cfg: &FrameworkConfig<T>,
) -> Result<T> {
    check_observable(f, psi, a, cfg)?;
    check_index(alpha, f.n)?;
    let weight = pointer_probabilities(f, psi)?[alpha];
    if !(weight > cfg.w_floor) {
        return Err(Error::UndefinedConditional {
            alpha,
            weight: weight.as_f64(),
        });
    }
    let c = psi.amplitudes();
    let mut acc = cr(T::ZERO);
    for r in 0..f.n {
        for s in 0..f.n {
            acc += c[r] * c[s].conj() * a.get(s, r) * f.get(r, s, alpha);
        }
    }
    real_part(acc / cr(weight), cfg.residue_tol)
}

/// Effective state of the microsystem: `ρ_{rr} = |c_r|²` and
/// `ρ_{rs} = c_r c̄_s Σ_α F[r,s;α]`, so that `Tr(ρA) = E(A)`.
pub fn reduced_state<T: Real>(f: &FTensor<T>, psi: &MicroState<T>) -> Result<DensityOperator<T>> {
    check_state(f, psi)?;
    let c = psi.amplitudes();
    let rho = ComplexOperator::from_fn(f.n, |r, s| {
        if r == s {
            cr(c[r].norm_sqr())
        } else {
            c[r] * c[s].conj() * f.cell_sum(r, s)
        }
    });
    DensityOperator::new(rho)
}

/// `|E(A) − Σ_α w_α E(A | 𝒦_α)|` over the cells whose conditional is defined.
pub fn consistency_residual<T: Real>(
    f: &FTensor<T>,
    psi: &MicroState<T>,
    a: &ComplexOperator<T>,
    cfg: &FrameworkConfig<T>,
) -> Result<T> {
    let e = expectation(f, psi, a, cfg)?;
    let w = pointer_probabilities(f, psi)?;
    let mut acc = KahanSum::new();
    for (alpha, &weight) in w.iter().enumerate() {
        if weight > cfg.w_floor {
            acc.add(weight * conditional_expectation(f, psi, a, alpha, cfg)?);
        }
    }
    Ok((e - acc.total()).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Ideal,
    Normal,
    Unclassified,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ideal => "Ideal",
            Verdict::Normal => "Normal",
            Verdict::Unclassified => "Unclassified",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport<T> {
    pub verdict: Verdict,
    /// Pointer assignment `a(r)`, present when the argmax is a permutation.
    pub assignment: Option<Vec<usize>>,
    /// Realized maximal deficit `max_r (1 − F[r,r;a(r)])`.
    pub eta: T,
    /// Per-level deficits `1 − F[r,r;a(r)]`.
    pub deficits: Vec<T>,
    /// Whether `|F[r,s;α]| ≤ √η` holds for every `r ≠ s`.
    pub off_diagonal_bound: bool,
    pub diagnostics: Vec<String>,
}

/// Classifies a tensor as ideal, normal or neither.
///
/// The assignment is the argmax of `F[r,r;·]`; near-ties (within `tie_tol`)
/// are refused and yield `Unclassified`.
pub fn classify<T: Real>(
    f: &FTensor<T>,
    ideal_tol: T,
    eta_threshold: T,
) -> ClassificationReport<T> {
    classify_with(f, ideal_tol, eta_threshold, T::lit(1e-9))
}

pub fn classify_with<T: Real>(
    f: &FTensor<T>,
    ideal_tol: T,
    eta_threshold: T,
    tie_tol: T,
) -> ClassificationReport<T> {
    let n = f.n;
    let mut diagnostics = Vec::new();
    let mut assignment = Vec::with_capacity(n);
    let mut tie = false;
    for r in 0..n {
        let row: Vec<T> = (0..n).map(|a| f.get(r, r, a).re).collect();
        let (best, best_val) =
            row.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, T::NEG_INFINITY),
                    |acc, (a, v)| if v > acc.1 { (a, v) } else { acc },
                );
        if row
            .iter()
            .enumerate()
            .any(|(a, &v)| a != best && (best_val - v).abs() <= tie_tol)
        {
            diagnostics.push(format!("level {r}: argmax tie within {tie_tol}"));
            tie = true;
        }
        assignment.push(best);
    }

    let deficits: Vec<T> = (0..n)
        .map(|r| T::ONE - f.get(r, r, assignment[r]).re)
        .collect();
    let eta = deficits.iter().copied().fold(T::ZERO, |a, b| a.max(b));

    let mut seen = vec![false; n];
    let permutation = assignment
        .iter()
        .all(|&a| !std::mem::replace(&mut seen[a], true));
    if !permutation {
        diagnostics.push("assignment is not invertible".to_string());
    }

    let bound = eta.max(T::ZERO).sqrt();
    let slack = T::lit(1e-12);
    let mut off_diagonal_bound = true;
    for r in 0..n {
        for s in (0..n).filter(|&s| s != r) {
            for alpha in 0..n {
                if modulus(f.get(r, s, alpha)) > bound + slack {
                    off_diagonal_bound = false;
                }
            }
        }
    }
    if !off_diagonal_bound {
        diagnostics.push("off-diagonal entries exceed sqrt(eta)".to_string());
    }

    let verdict = if tie || !permutation {
        Verdict::Unclassified
    } else if eta <= ideal_tol {
        Verdict::Ideal
    } else if eta < eta_threshold {
        Verdict::Normal
    } else {
        Verdict::Unclassified
    };

    ClassificationReport {
        verdict,
        assignment: permutation.then_some(assignment),
        eta,
        deficits,
        off_diagonal_bound,
        diagnostics,
    }
}
