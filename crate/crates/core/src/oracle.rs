//! Brute-force cross-checks for the closed forms in [`crate::chain`] and the
//! F-tensor path in [`crate::framework`].
//!
//! Nothing here calls the binomial-tail evaluators: enumeration sums bitstring
//! weights directly, dense routines build operators on the full chain space,
//! and the composite check evolves `P(ψ) ⊗ Ω` with the composite propagator.

use rayon::prelude::*;

use crate::chain::{
    coupling_strength, critical_time, site_kick, ChainParams, PacketSpec, PotentialSpec, SiteState,
};
use crate::error::{Error, Result};
use crate::framework::{
    conditional_expectation, expectation, f_tensor, pointer_probabilities, FTensor,
    FrameworkConfig, InstrumentModel, MicroState, MicroSystem,
};
use crate::linalg::{
    expm_hermitian, expm_hermitian_with, kron, kron_limited, trace_product, ComplexOperator,
    DensityOperator, Limits, ProjectorOperator, Tolerances,
};
use crate::numerics::KahanSum;
use crate::scalar::{cr, modulus, Complex, Real};

/// Largest `L` accepted by [`enumerate_overlap`].
pub const MAX_ENUMERATION_L: usize = 12;
/// Largest `L` for dense operators on the chain space.
pub const MAX_DENSE_L: usize = 5;
/// Largest `L` for [`time_resolved_f`].
pub const MAX_TIME_RESOLVED_L: usize = 7;
/// Largest composite dimension for [`dense_composite_check`].
pub const MAX_COMPOSITE_DIM: usize = 1 << 12;

const CHUNK_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapKind {
    /// `Tr(Ω̂₊ Π̂₋)`.
    PlusInMinus,
    /// `Tr(Ω̂₋ Π̂₊)`.
    MinusInPlus,
}

/// Sum of product weights over all bitstrings of `weights.len()` sites whose
/// up-count is a strict majority (`majority_up`) or strict minority.
///
/// Bit `n` of the index is site `n + 1`, set meaning up. Work is split into
/// fixed chunks so the result does not depend on the thread count.
pub fn enumerate_majority<T: Real>(weights: &[(T, T)], majority_up: bool) -> T {
    let sites = weights.len();
    assert!(
        sites <= 2 * MAX_ENUMERATION_L + 1,
        "enumeration over {sites} sites"
    );
    let low_bits = sites / 2;
    let table = |range: std::ops::Range<usize>| -> Vec<T> {
        let width = range.len();
        (0..1usize << width)
            .map(|bits| {
                range.clone().enumerate().fold(T::ONE, |acc, (k, site)| {
                    let (up, down) = weights[site];
                    acc * if bits >> k & 1 == 1 { up } else { down }
                })
            })
            .collect()
    };
    let low = table(0..low_bits);
    let high = table(low_bits..sites);
    let low_mask = (1usize << low_bits) - 1;
    let total = 1usize << sites;
    let chunk = 1usize << CHUNK_BITS;
    let chunks = total.div_ceil(chunk);
    let partials: Vec<KahanSum<T>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = KahanSum::new();
            for bits in ci * chunk..((ci + 1) * chunk).min(total) {
                let ups = bits.count_ones() as usize;
                if (2 * ups > sites) == majority_up {
                    acc.add(low[bits & low_mask] * high[bits >> low_bits]);
                }
            }
            acc
        })
        .collect();
    let mut acc = KahanSum::new();
    for p in &partials {
        acc.merge(p);
    }
    acc.total()
}

/// Overlap of a steady chain state with the wrong pointer cell, by
/// enumerating all `2^(2L+1)` `σ_z` bitstrings.
pub fn enumerate_overlap<T: Real>(l: usize, m: T, j: T, which: OverlapKind) -> Result<T> {
    if l > MAX_ENUMERATION_L {
        return Err(Error::ChainTooLong {
            l,
            max: MAX_ENUMERATION_L,
        });
    }
    let params = ChainParams::new(l, m, j)?;
    let sites = params.sites();
    Ok(match which {
        OverlapKind::PlusInMinus => {
            let w = ((T::ONE + m) * T::HALF, (T::ONE - m) * T::HALF);
            enumerate_majority(&vec![w; sites], false)
        }
        OverlapKind::MinusInPlus => {
            let mc = m * (T::TWO * j).cos();
            let w = ((T::ONE + mc) * T::HALF, (T::ONE - mc) * T::HALF);
            enumerate_majority(&vec![w; sites], true)
        }
    })
}

fn check_dense_l(l: usize) -> Result<()> {
    if l > MAX_DENSE_L {
        return Err(Error::ChainTooLong {
            l,
            max: MAX_DENSE_L,
        });
    }
    Ok(())
}

fn chain_product<T: Real>(
    mut factors: impl Iterator<Item = ComplexOperator<T>>,
) -> Result<ComplexOperator<T>> {
    factors.try_fold(ComplexOperator::identity(1), |acc, f| kron(&acc, &f))
}

/// `Z = ⊗_n exp(iJσ_{n,x})` on the dense chain space.
pub fn dense_kick_operator<T: Real>(l: usize, j: T) -> Result<ComplexOperator<T>> {
    check_dense_l(l)?;
    chain_product((0..2 * l + 1).map(|_| site_kick(j)))
}

/// `Σ_n σ_{n,x}` on the dense chain space.
pub fn dense_total_sigma_x<T: Real>(l: usize) -> Result<ComplexOperator<T>> {
    check_dense_l(l)?;
    let sites = 2 * l + 1;
    let mut total = ComplexOperator::zeros(1 << sites);
    for n in 0..sites {
        let term = chain_product((0..sites).map(|k| {
            if k == n {
                ComplexOperator::pauli_x()
            } else {
                ComplexOperator::identity(2)
            }
        }))?;
        total = &total + &term;
    }
    Ok(total)
}

/// `⊗_n ω_n`, first site most significant.
pub fn dense_product_state<T: Real>(sites: &[SiteState<T>]) -> Result<DensityOperator<T>> {
    check_dense_l(sites.len().saturating_sub(1) / 2)?;
    let (first, rest) = sites
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("empty chain".into()))?;
    rest.iter()
        .try_fold(first.density().clone(), |acc, s| acc.tensor(s.density()))
}

/// Majority-up (`up = true`) or majority-down projector on `2L + 1` sites.
/// Basis index bit `2L − n` carries site `n + 1`, a set bit meaning down.
pub fn dense_majority_projector<T: Real>(l: usize, up: bool) -> Result<ProjectorOperator<T>> {
    check_dense_l(l)?;
    let sites = 2 * l + 1;
    let mask: Vec<bool> = (0..1usize << sites)
        .map(|idx| {
            let downs = idx.count_ones() as usize;
            (2 * downs < sites) == up
        })
        .collect();
    Ok(ProjectorOperator::from_basis_mask(&mask))
}

/// `Z* ρ Z` for a dense operator `ρ` on `sites` spins, applying one site
/// factor of `Z` at a time instead of forming `Z`.
pub fn conjugate_by_kick<T: Real>(
    rho: &ComplexOperator<T>,
    sites: usize,
    j: T,
) -> Result<ComplexOperator<T>> {
    let dim = 1usize << sites;
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: rho.dim(),
        });
    }
    let u = site_kick(j);
    let (u00, u01, u10, u11) = (u.get(0, 0), u.get(0, 1), u.get(1, 0), u.get(1, 1));
    let mut mat = rho.matrix().clone();
    for n in 0..sites {
        let bit = 1usize << (sites - 1 - n);
        for mut col in mat.column_iter_mut() {
            for i0 in (0..dim).filter(|i| i & bit == 0) {
                let i1 = i0 | bit;
                let (a, b) = (col[i0], col[i1]);
                col[i0] = u00.conj() * a + u10.conj() * b;
                col[i1] = u01.conj() * a + u11.conj() * b;
            }
        }
        for k0 in (0..dim).filter(|k| k & bit == 0) {
            let k1 = k0 | bit;
            let (mut left, mut right) = mat.columns_range_pair_mut(k0, k1);
            for (a, b) in left.iter_mut().zip(right.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x * u00 + y * u10;
                *b = x * u01 + y * u11;
            }
        }
    }
    ComplexOperator::from_matrix(mat)
}

/// Max entrywise deviation between the dense `Z* Ω̂ Z` and `⊗ site_state_minus`.
pub fn kick_conjugation_deviation<T: Real>(l: usize, m: T, j: T) -> Result<T> {
    check_dense_l(l)?;
    let sites = 2 * l + 1;
    let plus = crate::chain::site_state_plus(m)?;
    let minus = crate::chain::site_state_minus(m, j)?;
    let omega = dense_product_state(&vec![plus; sites])?;
    let kicked = conjugate_by_kick(omega.op(), sites, j)?;
    let closed = dense_product_state(&vec![minus; sites])?;
    Ok(kicked.max_abs_diff(closed.op()))
}

/// Max entrywise deviation between the site-wise product `⊗ exp(iJσ_x)` and
/// `exp(iJ Σσ_x)` from the eigendecomposition.
pub fn kick_factorization_deviation<T: Real>(l: usize, j: T) -> Result<T> {
    let product = dense_kick_operator(l, j)?;
    let summed = expm_hermitian(&dense_total_sigma_x(l)?, j)?;
    Ok(product.max_abs_diff(&summed))
}

/// Uniform spatial grid for the packet quadrature and the time step of the
/// time schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig<T> {
    pub x_min: T,
    pub x_max: T,
    pub points: usize,
    pub dt: T,
}

impl<T: Real> GridConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs >= 2 points, got {}",
                self.points
            )));
        }
        if !(self.dt > T::ZERO) {
            return Err(Error::InvalidParameter(format!(
                "grid dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::InvalidParameter(
                "grid x_max must exceed x_min".into(),
            ));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<T> {
        let h = (self.x_max - self.x_min) / T::of_usize(self.points - 1);
        (0..self.points)
            .map(|i| self.x_min + h * T::of_usize(i))
            .collect()
    }

    fn trapezoid_weights(&self) -> Vec<T> {
        let h = (self.x_max - self.x_min) / T::of_usize(self.points - 1);
        (0..self.points)
            .map(|i| {
                if i == 0 || i + 1 == self.points {
                    h * T::HALF
                } else {
                    h
                }
            })
            .collect()
    }
}

/// `F_{n,t}(x) = ∫₀ᵗ V(x + s − n) ds`, integrating the interpolated profile
/// exactly. Sites are labelled `1..=2L+1`.
pub fn accumulated_phase<T: Real>(v: &PotentialSpec<T>, n: usize, x: T, t: T) -> T {
    let shift = x - T::of_usize(n);
    v.antiderivative(shift + t) - v.antiderivative(shift)
}

/// Time after which every site phase equals `J` for every packet point:
/// `2L + 1 + b − c`. Coincides with the critical time `2L + 1 − b − c` when
/// the potential support ends at `b = 0`.
pub fn saturation_time<T: Real>(l: usize, v: &PotentialSpec<T>, phi: &PacketSpec<T>) -> T {
    let (_, b) = v.support();
    let (c, _) = phi.support();
    T::of_usize(2 * l + 1) + b - c
}

/// Snapshot of the `2 × 2 × 2` tensor at time `t` (index 0 is `+`, 1 is `−`).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord<T: Real> {
    pub t: T,
    pub f: FTensor<T>,
    /// Pointer weights `(w₊, w₋)` for the configured microstate.
    pub w: (T, T),
    pub stationary: bool,
}

/// Time-resolved dynamics of the finite Coleman–Hepp instrument.
///
/// The free motion of the electron cancels under traces with `I ⊗ Π̂_α`, so
/// only the packet density and the site phases `F_{n,t}(x)` enter. The packet
/// quadrature weights are renormalized to unit mass after the grid self-check.
#[derive(Debug, Clone)]
pub struct TimeResolver<T: Real> {
    params: ChainParams<T>,
    potential: PotentialSpec<T>,
    nodes: Vec<T>,
    weights: Vec<T>,
    psi: MicroState<T>,
    tau: T,
    stat_tol: T,
    static_cells: (T, T),
    reference: FTensor<T>,
}

impl<T: Real> TimeResolver<T> {
    pub fn new(
        params: ChainParams<T>,
        potential: PotentialSpec<T>,
        packet: &PacketSpec<T>,
        grid: &GridConfig<T>,
        psi: MicroState<T>,
    ) -> Result<Self> {
        if params.l() > MAX_TIME_RESOLVED_L {
            return Err(Error::ChainTooLong {
                l: params.l(),
                max: MAX_TIME_RESOLVED_L,
            });
        }
        if psi.n() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: psi.n(),
            });
        }
        grid.validate()?;
        packet.check_pairing(&potential)?;
        let (c, d) = packet.support();
        if grid.x_min > c || grid.x_max < d {
            return Err(Error::InvalidParameter(format!(
                "grid [{}, {}] does not cover the packet support [{c}, {d}]",
                grid.x_min, grid.x_max
            )));
        }
        let nodes = grid.nodes();
        let raw: Vec<T> = grid
            .trapezoid_weights()
            .iter()
            .zip(&nodes)
            .map(|(&w, &x)| w * packet.amplitude_at(x).norm_sqr())
            .collect();
        let mass = raw.iter().copied().collect::<KahanSum<T>>().total();
        if !((mass - T::ONE).abs() <= T::lit(1e-6)) {
            return Err(Error::Quadrature(format!(
                "packet mass on the grid is {mass}; refine grid.points"
            )));
        }
        let (keep_nodes, weights): (Vec<T>, Vec<T>) = nodes
            .into_iter()
            .zip(raw.into_iter().map(|w| w / mass))
            .filter(|(_, w)| *w > T::ZERO)
            .unzip();

        let plus = crate::chain::site_state_plus(params.m())?;
        let unkicked = crate::chain::up_count_distribution(&vec![plus.z_weights(); params.sites()]);
        let static_minus = unkicked[..=params.l()]
            .iter()
            .copied()
            .collect::<KahanSum<T>>()
            .total();
        let static_plus = unkicked[params.l() + 1..]
            .iter()
            .copied()
            .collect::<KahanSum<T>>()
            .total();
        let static_cells = (static_plus, static_minus);

        let tau = critical_time(params.l(), potential.support().1, c);
        let mut resolver = Self {
            params,
            potential,
            nodes: keep_nodes,
            weights,
            psi,
            tau,
            stat_tol: T::lit(1e-8),
            static_cells,
            reference: FTensor::from_fn(2, |_, _, _| cr(T::ZERO)),
        };
        resolver.reference = resolver.tensor_at(tau.max(T::ZERO));
        Ok(resolver)
    }

    pub fn with_stat_tol(mut self, stat_tol: T) -> Self {
        self.stat_tol = stat_tol;
        self
    }

    /// Critical time `τ = 2L + 1 − b − c`.
    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn coupling(&self) -> T {
        coupling_strength(&self.potential)
    }

    fn tensor_at(&self, t: T) -> FTensor<T> {
        let sites = self.params.sites();
        let l = self.params.l();
        let plus = crate::chain::site_state_plus(self.params.m()).expect("validated");
        let mut minus_acc = [KahanSum::new(), KahanSum::new()];
        let mut cross_re = [KahanSum::new(), KahanSum::new()];
        let mut cross_im = [KahanSum::new(), KahanSum::new()];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let mut kicked = Vec::with_capacity(sites);
            let mut diag = Vec::with_capacity(sites);
            for n in 1..=sites {
                let phase = accumulated_phase(&self.potential, n, x, t);
                kicked.push(plus.kicked(phase).z_weights());
                let u = site_kick(phase);
                let rho_u = plus.density().op() * &u;
                diag.push((rho_u.get(0, 0), rho_u.get(1, 1)));
            }
            let dist = crate::chain::up_count_distribution(&kicked);
            let minus_in_minus: T = dist[..=l].iter().copied().collect::<KahanSum<T>>().total();
            let minus_in_plus: T = dist[l + 1..]
                .iter()
                .copied()
                .collect::<KahanSum<T>>()
                .total();
            minus_acc[0].add(w * minus_in_plus);
            minus_acc[1].add(w * minus_in_minus);
            let cdist = complex_up_count_distribution(&diag);
            let low = cdist[..=l].iter().fold(cr(T::ZERO), |a, &z| a + z);
            let high = cdist[l + 1..].iter().fold(cr(T::ZERO), |a, &z| a + z);
            cross_re[0].add(w * high.re);
            cross_im[0].add(w * high.im);
            cross_re[1].add(w * low.re);
            cross_im[1].add(w * low.im);
        }
        let (pp, pm) = self.static_cells;
        let mm = [minus_acc[0].total(), minus_acc[1].total()];
        let pmc = [
            Complex::new(cross_re[0].total(), cross_im[0].total()),
            Complex::new(cross_re[1].total(), cross_im[1].total()),
        ];
        FTensor::from_fn(2, |r, s, alpha| match (r, s) {
            (0, 0) => cr(if alpha == 0 { pp } else { pm }),
            (1, 1) => cr(mm[alpha]),
            (0, 1) => pmc[alpha],
            _ => pmc[alpha].conj(),
        })
    }

    /// Record at time `t ≥ 0`.
    pub fn record(&self, t: T) -> Result<TimeSeriesRecord<T>> {
        if !(t >= T::ZERO) {
            return Err(Error::InvalidParameter(format!(
                "time must be non-negative, got {t}"
            )));
        }
        let f = self.tensor_at(t);
        let w = pointer_probabilities(&f, &self.psi)?;
        let stationary =
            t >= self.tau && max_tensor_deviation(&f, &self.reference) <= self.stat_tol;
        Ok(TimeSeriesRecord {
            t,
            f,
            w: (w[0], w[1]),
            stationary,
        })
    }
}

fn complex_up_count_distribution<T: Real>(diag: &[(Complex<T>, Complex<T>)]) -> Vec<Complex<T>> {
    let mut dist = vec![cr(T::ZERO); diag.len() + 1];
    dist[0] = cr(T::ONE);
    for (i, &(up, down)) in diag.iter().enumerate() {
        for k in (0..=i + 1).rev() {
            let rise = if k > 0 { dist[k - 1] * up } else { cr(T::ZERO) };
            dist[k] = dist[k] * down + rise;
        }
    }
    dist
}

/// Largest entrywise modulus of the difference of two tensors of equal size.
pub fn max_tensor_deviation<T: Real>(a: &FTensor<T>, b: &FTensor<T>) -> T {
    assert_eq!(a.n(), b.n(), "tensors of unequal size");
    let n = a.n();
    let mut dev = T::ZERO;
    for r in 0..n {
        for s in 0..n {
            for alpha in 0..n {
                dev = dev.max(modulus(a.get(r, s, alpha) - b.get(r, s, alpha)));
            }
        }
    }
    dev
}

/// One-shot form of [`TimeResolver::record`] with `ψ = (u₊ + u₋)/√2`.
pub fn time_resolved_f<T: Real>(
    params: &ChainParams<T>,
    v: &PotentialSpec<T>,
    phi: &PacketSpec<T>,
    grid: &GridConfig<T>,
    t: T,
) -> Result<TimeSeriesRecord<T>> {
    let h = T::HALF.sqrt();
    let psi = MicroState::from_real(&[h, h])?;
    TimeResolver::new(*params, v.clone(), phi, grid, psi)?.record(t)
}

/// Chain-only embedding of the Coleman–Hepp instrument into the generic
/// framework: `K = 0`, `V₊ = 0`, `V₋ = J Σσ_x`, evaluated at `t = 1` so that
/// `U₋(1) = Z`. Level 0 is `+`, cell 0 is majority up.
#[derive(Debug, Clone)]
pub struct EmbeddedChain<T: Real> {
    pub system: MicroSystem<T>,
    pub instrument: InstrumentModel<T>,
    pub omega: DensityOperator<T>,
    pub t: T,
}

pub fn embedded_chain<T: Real>(l: usize, m: T, j: T) -> Result<EmbeddedChain<T>> {
    let params = ChainParams::new(l, m, j)?;
    let dim = 1 << params.sites();
    let plus = crate::chain::site_state_plus(m)?;
    let omega = dense_product_state(&vec![plus; params.sites()])?;
    let kick = dense_total_sigma_x(l)?.scale_real(j);
    let cells = vec![
        dense_majority_projector(l, true)?,
        dense_majority_projector(l, false)?,
    ];
    let instrument = InstrumentModel::new(
        ComplexOperator::zeros(dim),
        vec![ComplexOperator::zeros(dim), kick],
        cells,
    )?;
    Ok(EmbeddedChain {
        system: MicroSystem::degenerate(2),
        instrument,
        omega,
        t: T::ONE,
    })
}

/// Max deviations of the F-tensor path from the dense composite evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeReport<T> {
    pub expectation: T,
    pub pointer_probabilities: T,
    pub conditional: T,
}

impl<T: Real> CompositeReport<T> {
    pub fn max(&self) -> T {
        self.expectation
            .max(self.pointer_probabilities)
            .max(self.conditional)
    }
}

/// Builds `Φ(t) = U_c(t)† (P(ψ) ⊗ Ω) U_c(t)` with `U_c = exp(i t Σ_r P(u_r) ⊗ K_r)`
/// and compares `Tr(Φ(t)(A ⊗ M))` against the F-tensor functionals for every
/// observable in `observables`.
pub fn dense_composite_check<T: Real>(
    sys: &MicroSystem<T>,
    inst: &InstrumentModel<T>,
    omega: &DensityOperator<T>,
    psi: &MicroState<T>,
    observables: &[ComplexOperator<T>],
    t: T,
    cfg: &FrameworkConfig<T>,
) -> Result<CompositeReport<T>> {
    let n = sys.n();
    let dim_k = inst.dim();
    let composite_dim = n * dim_k;
    if composite_dim > MAX_COMPOSITE_DIM {
        return Err(Error::SizeLimit {
            dim: composite_dim,
            max: MAX_COMPOSITE_DIM,
        });
    }
    let limits = Limits {
        max_vector_dim: MAX_COMPOSITE_DIM,
        max_matrix_dim: MAX_COMPOSITE_DIM,
    };
    let mut h_c = ComplexOperator::zeros(composite_dim);
    for r in 0..n {
        let p_r =
            ProjectorOperator::<T>::from_basis_mask(&(0..n).map(|k| k == r).collect::<Vec<_>>());
        let k_r = crate::framework::effective_hamiltonian(sys, inst, r)?;
        h_c = &h_c + &kron_limited(p_r.op(), &k_r, &limits)?;
    }
    let u_c = expm_hermitian_with(&h_c, t, &Tolerances::default())?;
    let initial = kron_limited(
        &ComplexOperator::outer(psi.amplitudes(), psi.amplitudes()),
        omega.op(),
        &limits,
    )?;
    let phi_t = &(&u_c.adjoint() * &initial) * &u_c;

    let f = f_tensor(inst, sys, omega, t)?;
    let w = pointer_probabilities(&f, psi)?;
    let id_k = ComplexOperator::identity(dim_k);
    let id_n = ComplexOperator::identity(n);
    let mut report = CompositeReport {
        expectation: T::ZERO,
        pointer_probabilities: T::ZERO,
        conditional: T::ZERO,
    };
    for (alpha, cell) in inst.cells().iter().enumerate() {
        let dense_w = trace_product(&phi_t, &kron_limited(&id_n, cell.op(), &limits)?)?;
        report.pointer_probabilities = report
            .pointer_probabilities
            .max(modulus(dense_w - cr(w[alpha])));
    }
    for a in observables {
        let dense_e = trace_product(&phi_t, &kron_limited(a, &id_k, &limits)?)?;
        let e = expectation(&f, psi, a, cfg)?;
        report.expectation = report.expectation.max(modulus(dense_e - cr(e)));
        for (alpha, cell) in inst.cells().iter().enumerate() {
            if !(w[alpha] > cfg.w_floor) {
                continue;
            }
            let dense_joint = trace_product(&phi_t, &kron_limited(a, cell.op(), &limits)?)?;
            let cond = conditional_expectation(&f, psi, a, alpha, cfg)?;
            report.conditional = report
                .conditional
                .max(modulus(dense_joint - cr(cond * w[alpha])));
        }
    }
    Ok(report)
}

/// Outcome of one named equivalence in [`run_equivalence_checks`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// Settings for the closed-form / oracle equivalence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckConfig {
    /// Largest `L` in the enumeration comparison.
    pub l_max: usize,
    pub polarizations: Vec<f64>,
    pub couplings: Vec<f64>,
    /// Replaces every per-check tolerance when set.
    pub tolerance_override: Option<f64>,
}

impl Default for OracleCheckConfig {
    fn default() -> Self {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};
        Self {
            l_max: 10,
            polarizations: vec![0.0, 0.25, 0.5, 0.9, 1.0],
            couplings: vec![FRAC_PI_4, FRAC_PI_3, FRAC_PI_2],
            tolerance_override: None,
        }
    }
}

/// Runs every oracle equivalence and reports per-check maximum deviations.
pub fn run_equivalence_checks(cfg: &OracleCheckConfig) -> Result<Vec<CheckOutcome>> {
    if cfg.l_max > MAX_ENUMERATION_L {
        return Err(Error::ChainTooLong {
            l: cfg.l_max,
            max: MAX_ENUMERATION_L,
        });
    }
    let tol = |default: f64| cfg.tolerance_override.unwrap_or(default);
    let mut out = Vec::new();

    let mut dev = 0.0f64;
    for l in 0..=cfg.l_max {
        for &m in &cfg.polarizations {
            for &j in &cfg.couplings {
                let pm = crate::chain::overlap_plus_in_minus(l, m)?;
                let mp = crate::chain::overlap_minus_in_plus(l, m, j)?;
                dev = dev.max((pm - enumerate_overlap(l, m, j, OverlapKind::PlusInMinus)?).abs());
                dev = dev.max((mp - enumerate_overlap(l, m, j, OverlapKind::MinusInPlus)?).abs());
            }
        }
    }
    out.push(CheckOutcome {
        name: "closed_form_vs_enumeration",
        max_deviation: dev,
        tolerance: tol(1e-11),
    });

    let mut dev = 0.0f64;
    for l in 0..=2 {
        for &j in &cfg.couplings {
            dev = dev.max(kick_factorization_deviation(l, j)?);
        }
    }
    out.push(CheckOutcome {
        name: "kick_product_vs_exponential",
        max_deviation: dev,
        tolerance: tol(1e-11),
    });

    let mut dev = 0.0f64;
    for l in 0..=2 {
        for &m in &cfg.polarizations {
            for &j in &cfg.couplings {
                dev = dev.max(kick_conjugation_deviation(l, m, j)?);
            }
        }
    }
    out.push(CheckOutcome {
        name: "kick_conjugation_vs_site_states",
        max_deviation: dev,
        tolerance: tol(1e-12),
    });

    let (conservation, stationarity, closed_form) = time_resolved_checks()?;
    out.push(CheckOutcome {
        name: "time_resolved_conservation",
        max_deviation: conservation,
        tolerance: tol(1e-9),
    });
    out.push(CheckOutcome {
        name: "time_resolved_stationarity",
        max_deviation: stationarity,
        tolerance: tol(1e-8),
    });
    out.push(CheckOutcome {
        name: "time_resolved_vs_closed_form",
        max_deviation: closed_form,
        tolerance: tol(1e-7),
    });
    Ok(out)
}

/// Default dynamics setup: rectangular potential on `[−1, 0]` with integral
/// `J`, sin² packet on `[−1, 0]`, 801 grid points.
pub fn default_dynamics<T: Real>(j: T) -> Result<(PotentialSpec<T>, PacketSpec<T>, GridConfig<T>)> {
    let v = PotentialSpec::rectangular_with_coupling(-T::ONE, T::ZERO, j, 2)?;
    let phi = PacketSpec::sin_squared_bump(-T::ONE, T::ZERO, 4001)?;
    let grid = GridConfig {
        x_min: -T::ONE,
        x_max: T::ZERO,
        points: 801,
        dt: T::lit(0.25),
    };
    Ok((v, phi, grid))
}

fn time_resolved_checks() -> Result<(f64, f64, f64)> {
    let params = ChainParams::new(3, 0.8, 1.2)?;
    let (v, phi, grid) = default_dynamics(params.j())?;
    let h = 0.5f64.sqrt();
    let resolver = TimeResolver::new(params, v, &phi, &grid, MicroState::from_real(&[h, h])?)?;
    let tau = resolver.tau();
    let mut conservation = 0.0f64;
    let mut stationarity = 0.0f64;
    let mut closed_form = 0.0f64;
    let steady = crate::chain::steady_f_tensor(&params)?;
    let mut t = 0.0;
    let mut reference = None;
    while t <= tau + 3.0 {
        let rec = resolver.record(t)?;
        for r in 0..2 {
            conservation = conservation.max(modulus(rec.f.cell_sum(r, r) - cr(1.0)));
        }
        if t >= tau {
            let reference = reference.get_or_insert_with(|| rec.f.clone());
            stationarity = stationarity.max(max_tensor_deviation(&rec.f, reference));
            closed_form = closed_form.max(max_tensor_deviation(&rec.f, &steady));
        }
        t += 0.25;
    }
    Ok((conservation, stationarity, closed_form))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn enumeration_small_cases() {
        let v: f64 = enumerate_overlap(1, 0.5, FRAC_PI_2, OverlapKind::PlusInMinus).unwrap();
        assert!((v - 5.0 / 32.0).abs() < 1e-15);
        for which in [OverlapKind::PlusInMinus, OverlapKind::MinusInPlus] {
            assert_eq!(enumerate_overlap(3, 0.0, 0.7, which).unwrap(), 0.5);
            assert_eq!(enumerate_overlap(3, 1.0, FRAC_PI_2, which).unwrap(), 0.0);
        }
        assert!(matches!(
            enumerate_overlap(13, 0.5, 1.0, OverlapKind::PlusInMinus),
            Err(Error::ChainTooLong { l: 13, .. })
        ));
    }

    #[test]
    fn kick_operator_cases() {
        let id = dense_kick_operator(1, 0.0).unwrap();
        assert!(id.max_abs_diff(&ComplexOperator::identity(8)) < 1e-15);
        let single = dense_kick_operator(0, FRAC_PI_2).unwrap();
        let target = ComplexOperator::pauli_x().scale(Complex::new(0.0, 1.0));
        assert!(single.max_abs_diff(&target) < 1e-15);
        assert!(dense_kick_operator::<f64>(6, 1.0).is_err());
    }

    #[test]
    fn sitewise_conjugation_matches_dense_kick() {
        let rho = crate::sampling::random_density::<f64, _>(
            &mut rand::rngs::mock::StepRng::new(3, 0x9E37_79B9_7F4A_7C15),
            8,
        );
        let z = dense_kick_operator(1, 0.77).unwrap();
        let dense = &(&z.adjoint() * rho.op()) * &z;
        let sitewise = conjugate_by_kick(rho.op(), 3, 0.77).unwrap();
        assert!(dense.max_abs_diff(&sitewise) < 1e-14);
    }

    #[test]
    fn kick_factorizes() {
        assert!(kick_factorization_deviation(2, 0.83).unwrap() < 1e-11);
    }

    #[test]
    fn conjugation_matches_closed_form_sites() {
        assert!(kick_conjugation_deviation(2, 0.6, 1.1).unwrap() < 1e-12);
    }

    #[test]
    fn phase_accumulation() {
        let j: f64 = 1.3;
        let v = PotentialSpec::rectangular_with_coupling(0.0, 1.0, j, 2).unwrap();
        assert_eq!(accumulated_phase(&v, 2, -0.5, 0.0), 0.0);
        // x + s − n sweeps [−1.5, 3.5] ⊃ [0, 1].
        assert!((accumulated_phase(&v, 2, -0.5, 5.0) - j).abs() < 1e-14);
        // x + s − n sweeps [−0.5, 0.5]: half the support.
        assert!((accumulated_phase(&v, 1, 0.5, 1.0) - j / 2.0).abs() < 1e-8);
    }

    #[test]
    fn grid_validation() {
        let g = GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            points: 1,
            dt: 0.1,
        };
        assert!(g.validate().is_err());
        let g = GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            points: 5,
            dt: 0.0,
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn coarse_grid_fails_self_check() {
        let params = ChainParams::new(2, 0.5, 1.0).unwrap();
        let (v, phi, _) = default_dynamics(1.0).unwrap();
        let coarse = GridConfig {
            x_min: -1.0,
            x_max: 0.0,
            points: 3,
            dt: 0.5,
        };
        assert!(matches!(
            time_resolved_f(&params, &v, &phi, &coarse, 1.0),
            Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn time_zero_record_is_uncoupled() {
        let params = ChainParams::new(2, 0.7, 1.1).unwrap();
        let (v, phi, grid) = default_dynamics(params.j()).unwrap();
        let rec = time_resolved_f(&params, &v, &phi, &grid, 0.0).unwrap();
        for alpha in 0..2 {
            assert!(modulus(rec.f.get(1, 1, alpha) - rec.f.get(0, 0, alpha)) < 1e-14);
        }
        assert!(!rec.stationary);
    }
}
