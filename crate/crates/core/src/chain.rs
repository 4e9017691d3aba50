//! Finite Coleman–Hepp model: an electron with linear dispersion crosses a
//! chain of `N = 2L + 1` spin-½ sites, kicking each site by `exp(iJσ_x)` when
//! the microsystem is in its lower state.
//!
//! Branch labels: index `0` is the `+` state of the microsystem (no kick) and
//! index `1` the `−` state. Pointer cell `+` (index 0) is the majority-up
//! subspace of the chain, cell `−` (index 1) the majority-down subspace.
//!
//! Closed-form overlaps are binomial tails, evaluated in the log domain so that
//! chains with tens of thousands of sites stay finite.

use crate::error::{Error, Result};
use crate::framework::{ClassificationReport, FTensor, Verdict};
use crate::linalg::{ComplexOperator, DensityOperator};
use crate::numerics::{ln_binomial_row, log_sum_exp, xlny, KahanSum};
use crate::scalar::{c, cr, Complex, Real};

/// Chain length and initial polarization / coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams<T> {
    l: usize,
    m: T,
    j: T,
}

impl<T: Real> ChainParams<T> {
    pub fn new(l: usize, m: T, j: T) -> Result<Self> {
        check_polarization(m)?;
        if !j.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling J must be finite, got {j}"
            )));
        }
        Ok(Self { l, m, j })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> T {
        self.m
    }

    pub fn j(&self) -> T {
        self.j
    }

    /// Number of sites `N = 2L + 1`.
    pub fn sites(&self) -> usize {
        2 * self.l + 1
    }

    pub fn with_m(&self, m: T) -> Result<Self> {
        Self::new(self.l, m, self.j)
    }
}

fn check_polarization<T: Real>(m: T) -> Result<()> {
    if !(m.abs() <= T::ONE) {
        return Err(Error::InvalidParameter(format!(
            "polarization must satisfy |m| <= 1, got {m}"
        )));
    }
    Ok(())
}

fn uniform_trapezoid<T: Real>(values: impl ExactSizeIterator<Item = T>, lo: T, hi: T) -> T {
    let len = values.len();
    let h = (hi - lo) / T::of_usize(len - 1);
    let mut acc = KahanSum::new();
    for (i, v) in values.enumerate() {
        let w = if i == 0 || i + 1 == len {
            T::HALF
        } else {
            T::ONE
        };
        acc.add(w * v);
    }
    acc.total() * h
}

/// Real potential profile `V` sampled on a uniform grid over its support
/// `[a, b]`; linear between samples and zero outside.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec<T> {
    a: T,
    b: T,
    profile: Vec<T>,
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(a: T, b: T, profile: Vec<T>) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "potential support [{a}, {b}] is empty"
            )));
        }
        if profile.len() < 2 {
            return Err(Error::Quadrature(
                "potential grid needs at least two points".into(),
            ));
        }
        if let Some(v) = profile.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "potential profile is unbounded ({v})"
            )));
        }
        Ok(Self { a, b, profile })
    }

    /// Constant `height` on `[a, b]`.
    pub fn rectangular(a: T, b: T, height: T, points: usize) -> Result<Self> {
        Self::new(a, b, vec![height; points.max(2)])
    }

    /// Rectangle on `[a, b]` whose integral is `j`.
    pub fn rectangular_with_coupling(a: T, b: T, j: T, points: usize) -> Result<Self> {
        Self::rectangular(a, b, j / (b - a), points)
    }

    /// Symmetric tent of the given peak height.
    pub fn triangular(a: T, b: T, height: T, points: usize) -> Result<Self> {
        let points = points.max(3);
        let mid = T::of_usize(points - 1) * T::HALF;
        let profile = (0..points)
            .map(|i| height * (T::ONE - (T::of_usize(i) - mid).abs() / mid))
            .collect();
        Self::new(a, b, profile)
    }

    pub fn support(&self) -> (T, T) {
        (self.a, self.b)
    }

    pub fn profile(&self) -> &[T] {
        &self.profile
    }

    fn step(&self) -> T {
        (self.b - self.a) / T::of_usize(self.profile.len() - 1)
    }

    pub fn value_at(&self, y: T) -> T {
        if y < self.a || y > self.b {
            return T::ZERO;
        }
        let u = (y - self.a) / self.step();
        let last = self.profile.len() - 1;
        let i = num_traits::ToPrimitive::to_usize(&u.as_f64().floor())
            .unwrap_or(0)
            .min(last - 1);
        let frac = u - T::of_usize(i);
        self.profile[i] + frac * (self.profile[i + 1] - self.profile[i])
    }

    /// Exact integral of the interpolated profile over `[a, y]`.
    pub fn antiderivative(&self, y: T) -> T {
        if y <= self.a {
            return T::ZERO;
        }
        let h = self.step();
        let last = self.profile.len() - 1;
        let y = y.min(self.b);
        let u = (y - self.a) / h;
        let full = num_traits::ToPrimitive::to_usize(&u.as_f64().floor())
            .unwrap_or(0)
            .min(last);
        let mut acc = KahanSum::new();
        for i in 0..full {
            acc.add(T::HALF * h * (self.profile[i] + self.profile[i + 1]));
        }
        if full < last {
            let frac = u - T::of_usize(full);
            let v0 = self.profile[full];
            let v1 = self.profile[full + 1];
            acc.add(h * frac * (v0 + T::HALF * frac * (v1 - v0)));
        }
        acc.total()
    }
}

/// Electron wave packet `φ` sampled on a uniform grid over its support `[c, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec<T: Real> {
    c: T,
    d: T,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> PacketSpec<T> {
    /// Accepts samples whose trapezoid norm is one within `1e-6`.
    pub fn new(c: T, d: T, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if !(d > c) || !c.is_finite() || !d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "packet support [{c}, {d}] is empty"
            )));
        }
        if amplitudes.len() < 2 {
            return Err(Error::Quadrature(
                "packet grid needs at least two points".into(),
            ));
        }
        let packet = Self { c, d, amplitudes };
        let norm = packet.norm_sqr();
        if !((norm - T::ONE).abs() <= T::lit(1e-6)) {
            return Err(Error::Quadrature(format!(
                "packet norm {norm} differs from 1"
            )));
        }
        Ok(packet)
    }

    /// `φ(x) = √(8/(3w))·sin²(π(x − c)/w)` on `[c, d]`, `w = d − c`: a
    /// continuously differentiable bump with unit norm.
    pub fn sin_squared_bump(c: T, d: T, points: usize) -> Result<Self> {
        let points = points.max(3);
        let w = d - c;
        let amp = (T::lit(8.0) / (T::lit(3.0) * w)).sqrt();
        let amplitudes = (0..points)
            .map(|i| {
                let u = T::of_usize(i) / T::of_usize(points - 1);
                let s = (T::pi() * u).sin();
                cr(amp * s * s)
            })
            .collect();
        Self::new(c, d, amplitudes)
    }

    pub fn support(&self) -> (T, T) {
        (self.c, self.d)
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    /// Trapezoid estimate of `∫|φ|²` on the sample grid.
    pub fn norm_sqr(&self) -> T {
        uniform_trapezoid(self.amplitudes.iter().map(|z| z.norm_sqr()), self.c, self.d)
    }

    /// Linearly interpolated amplitude; zero outside the support.
    pub fn amplitude_at(&self, x: T) -> Complex<T> {
        if x < self.c || x > self.d {
            return cr(T::ZERO);
        }
        let last = self.amplitudes.len() - 1;
        let u = (x - self.c) / (self.d - self.c) * T::of_usize(last);
        let i = num_traits::ToPrimitive::to_usize(&u.as_f64().floor())
            .unwrap_or(0)
            .min(last - 1);
        let frac = u - T::of_usize(i);
        self.amplitudes[i] + (self.amplitudes[i + 1] - self.amplitudes[i]) * cr(frac)
    }

    /// The packet must start clear of the first site's potential: `d ≤ a + 1`.
    pub fn check_pairing(&self, v: &PotentialSpec<T>) -> Result<()> {
        if !(self.d <= v.a + T::ONE) {
            return Err(Error::InvalidParameter(format!(
                "packet end d = {} exceeds a + 1 = {}",
                self.d,
                v.a + T::ONE
            )));
        }
        Ok(())
    }
}

/// `J = ∫ V(x) dx` (composite trapezoid on the profile grid).
pub fn coupling_strength<T: Real>(v: &PotentialSpec<T>) -> T {
    uniform_trapezoid(v.profile.iter().copied(), v.a, v.b)
}

/// Traversal time `τ = 2L + 1 − b − c`.
pub fn critical_time<T: Real>(l: usize, b: T, c: T) -> T {
    T::of_usize(2 * l + 1) - b - c
}

/// Single-site density operator of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteState<T: Real>(DensityOperator<T>);

impl<T: Real> SiteState<T> {
    pub fn new(rho: DensityOperator<T>) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: rho.dim(),
            });
        }
        Ok(Self(rho))
    }

    /// `(I + x σ_x + y σ_y + z σ_z)/2`; requires `x² + y² + z² ≤ 1`.
    pub fn from_bloch(x: T, y: T, z: T) -> Result<Self> {
        let r2 = x * x + y * y + z * z;
        if !(r2 <= T::ONE + T::lit(1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "Bloch vector length² {r2} exceeds 1"
            )));
        }
        let h = T::HALF;
        let op = ComplexOperator::from_fn(2, |i, k| match (i, k) {
            (0, 0) => cr(h * (T::ONE + z)),
            (1, 1) => cr(h * (T::ONE - z)),
            (0, 1) => c(h * x, -h * y),
            _ => c(h * x, h * y),
        });
        Ok(Self(DensityOperator::new(op)?))
    }

    /// Pure `σ_z` eigenstate: up for `true`, down for `false`.
    pub fn basis(up: bool) -> Self {
        let z = if up { T::ONE } else { -T::ONE };
        Self::from_bloch(T::ZERO, T::ZERO, z).expect("basis state is valid")
    }

    pub fn density(&self) -> &DensityOperator<T> {
        &self.0
    }

    /// Diagonal `σ_z` weights `(⟨↑|ω|↑⟩, ⟨↓|ω|↓⟩)`.
    pub fn z_weights(&self) -> (T, T) {
        (self.0.op().get(0, 0).re, self.0.op().get(1, 1).re)
    }

    /// Kicked state `e^{−iJσ_x} ω e^{iJσ_x}`.
    pub fn kicked(&self, j: T) -> Self {
        let kick = site_kick(j);
        let rho = &(&kick.adjoint() * self.0.op()) * &kick;
        Self(DensityOperator::new(rho).expect("unitary conjugation preserves density operators"))
    }
}

/// `exp(iJσ_x) = cos J·I + i sin J·σ_x`.
pub fn site_kick<T: Real>(j: T) -> ComplexOperator<T> {
    let (s, co) = (j.sin(), j.cos());
    ComplexOperator::from_fn(2, |i, k| if i == k { cr(co) } else { c(T::ZERO, s) })
}

/// Unkicked steady site state `(I + mσ_z)/2`.
pub fn site_state_plus<T: Real>(m: T) -> Result<SiteState<T>> {
    check_polarization(m)?;
    SiteState::from_bloch(T::ZERO, T::ZERO, m)
}

/// Kicked steady site state `e^{−iJσ_x}(I + mσ_z)e^{iJσ_x}/2
/// = (I + m cos 2J σ_z − m sin 2J σ_y)/2`.
pub fn site_state_minus<T: Real>(m: T, j: T) -> Result<SiteState<T>> {
    check_polarization(m)?;
    let two_j = T::TWO * j;
    SiteState::from_bloch(T::ZERO, -m * two_j.sin(), m * two_j.cos())
}

/// `ln P(#up ≤ L)` for `2L + 1` independent sites with `P(up) = (1 + m)/2`.
pub fn ln_majority_tail<T: Real>(l: usize, m: T) -> T {
    if m == T::ZERO {
        return T::HALF.ln();
    }
    let n = 2 * l + 1;
    let p_up = (T::ONE + m) * T::HALF;
    let p_down = (T::ONE - m) * T::HALF;
    let ln_binom = ln_binomial_row::<T>(n);
    let terms: Vec<T> = (0..=l)
        .map(|k| ln_binom[k] + xlny(T::of_usize(k), p_up) + xlny(T::of_usize(n - k), p_down))
        .collect();
    log_sum_exp(&terms).min(T::ZERO)
}

/// `ln Tr(Ω̂₊ Π̂₋)`.
pub fn ln_overlap_plus_in_minus<T: Real>(l: usize, m: T) -> Result<T> {
    check_polarization(m)?;
    Ok(ln_majority_tail(l, m))
}

/// `Tr(Ω̂₊ Π̂₋)`: probability that the unkicked chain reads `−`.
pub fn overlap_plus_in_minus<T: Real>(l: usize, m: T) -> Result<T> {
    Ok(ln_overlap_plus_in_minus(l, m)?.exp())
}

/// `ln Tr(Ω̂₋ Π̂₊)`.
pub fn ln_overlap_minus_in_plus<T: Real>(l: usize, m: T, j: T) -> Result<T> {
    check_polarization(m)?;
    let m_eff = (-m * (T::TWO * j).cos()).max(-T::ONE).min(T::ONE);
    Ok(ln_majority_tail(l, m_eff))
}

/// `Tr(Ω̂₋ Π̂₊)`: probability that the kicked chain reads `+`.
pub fn overlap_minus_in_plus<T: Real>(l: usize, m: T, j: T) -> Result<T> {
    Ok(ln_overlap_minus_in_plus(l, m, j)?.exp())
}

/// Per-site suppression rate `c = −½ ln(1 − m² cos² 2J)`; `+∞` when the
/// argument of the logarithm vanishes.
pub fn decay_rate<T: Real>(m: T, j: T) -> T {
    let mc = m * (T::TWO * j).cos();
    let x = mc * mc;
    if x >= T::ONE {
        return T::INFINITY;
    }
    -T::HALF * (-x).ln_1p_value()
}

/// `0 < m < 1` and `π/4 < J ≤ π/2`.
pub fn in_suppression_regime<T: Real>(m: T, j: T) -> bool {
    let quarter = T::frac_pi_4();
    let half = T::frac_pi_2();
    m > T::ZERO && m < T::ONE && j > quarter && j <= half + T::lit(1e-12)
}

/// Steady-state tensor `F` of the chain instrument (after the critical time).
///
/// Besides the two overlaps, the cross terms factor as
/// `F[+,−;α] = cos^N(J)·Tr(Ω̂ Π̂_α)`.
pub fn steady_f_tensor<T: Real>(params: &ChainParams<T>) -> Result<FTensor<T>> {
    let ov_pm = overlap_plus_in_minus(params.l, params.m)?;
    let ov_mp = overlap_minus_in_plus(params.l, params.m, params.j)?;
    let cross = params.j.cos().powi(params.sites() as i32);
    Ok(FTensor::from_fn(2, |r, s, alpha| match (r, s, alpha) {
        (0, 0, 0) => cr(T::ONE - ov_pm),
        (0, 0, _) => cr(ov_pm),
        (1, 1, 0) => cr(ov_mp),
        (1, 1, _) => cr(T::ONE - ov_mp),
        (_, _, 0) => cr(cross * (T::ONE - ov_pm)),
        _ => cr(cross * ov_pm),
    }))
}

/// Thresholds for [`classify_model`].
///
/// `ideal_tol` is compared with the overlaps in the log domain; the default of
/// zero accepts only overlaps that vanish identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainThresholds<T> {
    pub ideal_tol: T,
    pub eta_threshold: T,
}

impl<T: Real> Default for ChainThresholds<T> {
    fn default() -> Self {
        Self {
            ideal_tol: T::ZERO,
            eta_threshold: T::lit(1e-2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport<T> {
    pub report: ClassificationReport<T>,
    pub overlap_plus_in_minus: T,
    pub overlap_minus_in_plus: T,
    /// `ln η` with `η` the larger overlap; `−∞` for an ideal chain.
    pub ln_eta: T,
    pub decay_rate: T,
    /// `−c·N`, the per-spin prediction for `ln η`.
    pub predicted_ln_eta: T,
    pub in_regime: bool,
}

impl<T: Real> ChainReport<T> {
    pub fn verdict(&self) -> Verdict {
        self.report.verdict
    }

    pub fn eta(&self) -> T {
        self.report.eta
    }
}

fn verdict_from_ln<T: Real>(ln_eta: T, thresholds: &ChainThresholds<T>) -> Verdict {
    let ln_ideal = if thresholds.ideal_tol > T::ZERO {
        thresholds.ideal_tol.ln()
    } else {
        T::NEG_INFINITY
    };
    if ln_eta <= ln_ideal {
        Verdict::Ideal
    } else if ln_eta < thresholds.eta_threshold.ln() {
        Verdict::Normal
    } else {
        Verdict::Unclassified
    }
}

fn chain_report<T: Real>(
    ln_pm: T,
    ln_mp: T,
    m: T,
    j: T,
    sites: usize,
    cross: T,
    thresholds: &ChainThresholds<T>,
) -> ChainReport<T> {
    let ln_eta = ln_pm.max(ln_mp);
    let (ov_pm, ov_mp) = (ln_pm.exp(), ln_mp.exp());
    let eta = ln_eta.exp();
    let verdict = verdict_from_ln(ln_eta, thresholds);
    let off_diagonal_bound =
        cross.abs() * (T::ONE - ov_pm).max(ov_pm) <= eta.sqrt() + T::lit(1e-12);
    let mut diagnostics = Vec::new();
    let in_regime = in_suppression_regime(m, j);
    if !in_regime {
        diagnostics.push("outside the suppression regime 0 < m < 1, pi/4 < J <= pi/2".to_string());
    }
    if !off_diagonal_bound {
        diagnostics.push("off-diagonal entries exceed sqrt(eta)".to_string());
    }
    let c = decay_rate(m, j);
    ChainReport {
        report: ClassificationReport {
            verdict,
            assignment: Some(vec![0, 1]),
            eta,
            deficits: vec![ov_pm, ov_mp],
            off_diagonal_bound,
            diagnostics,
        },
        overlap_plus_in_minus: ov_pm,
        overlap_minus_in_plus: ov_mp,
        ln_eta,
        decay_rate: c,
        predicted_ln_eta: T::ZERO - c * T::of_usize(sites),
        in_regime,
    }
}

/// Ideal / normal / unclassified verdict for the steady chain.
pub fn classify_model<T: Real>(
    params: &ChainParams<T>,
    thresholds: &ChainThresholds<T>,
) -> ChainReport<T> {
    let ln_pm = ln_majority_tail(params.l, params.m);
    let ln_mp =
        ln_overlap_minus_in_plus(params.l, params.m, params.j).expect("validated polarization");
    let cross = params.j.cos().powi(params.sites() as i32);
    chain_report(
        ln_pm,
        ln_mp,
        params.m,
        params.j,
        params.sites(),
        cross,
        thresholds,
    )
}

/// Chain whose initial product state differs from `(I + mσ_z)/2` on a few sites.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedChain<T: Real> {
    base: ChainParams<T>,
    sites: Vec<SiteState<T>>,
    flipped: Vec<usize>,
}

/// Replaces the initial state of the listed sites (labelled `1..=2L+1`).
pub fn perturb_chain_state<T: Real>(
    base: &ChainParams<T>,
    flips: &[(usize, SiteState<T>)],
) -> Result<PerturbedChain<T>> {
    let n = base.sites();
    let plus = site_state_plus(base.m)?;
    let mut sites = vec![plus; n];
    let mut seen = vec![false; n];
    let mut flipped = Vec::with_capacity(flips.len());
    for (site, state) in flips {
        if *site == 0 || *site > n {
            return Err(Error::IndexOutOfRange {
                index: *site,
                len: n,
            });
        }
        if std::mem::replace(&mut seen[site - 1], true) {
            return Err(Error::InvalidParameter(format!("site {site} listed twice")));
        }
        sites[site - 1] = state.clone();
        flipped.push(*site);
    }
    Ok(PerturbedChain {
        base: *base,
        sites,
        flipped,
    })
}

/// `P(#up = k)` for independent sites with the given `(up, down)` weights.
pub fn up_count_distribution<T: Real>(weights: &[(T, T)]) -> Vec<T> {
    let mut dist = vec![T::ZERO; weights.len() + 1];
    dist[0] = T::ONE;
    for (i, &(up, down)) in weights.iter().enumerate() {
        for k in (0..=i + 1).rev() {
            let stay = dist[k] * down;
            let rise = if k > 0 { dist[k - 1] * up } else { T::ZERO };
            dist[k] = stay + rise;
        }
    }
    dist
}

impl<T: Real> PerturbedChain<T> {
    pub fn base(&self) -> &ChainParams<T> {
        &self.base
    }

    pub fn site_states(&self) -> &[SiteState<T>] {
        &self.sites
    }

    pub fn flipped_sites(&self) -> &[usize] {
        &self.flipped
    }

    /// `σ_z` weights of the unkicked branch.
    pub fn plus_weights(&self) -> Vec<(T, T)> {
        self.sites.iter().map(SiteState::z_weights).collect()
    }

    /// `σ_z` weights of the kicked branch.
    pub fn minus_weights(&self) -> Vec<(T, T)> {
        self.sites
            .iter()
            .map(|s| s.kicked(self.base.j).z_weights())
            .collect()
    }

    pub fn overlap_plus_in_minus(&self) -> T {
        let dist = up_count_distribution(&self.plus_weights());
        dist[..=self.base.l]
            .iter()
            .copied()
            .collect::<KahanSum<T>>()
            .total()
    }

    pub fn overlap_minus_in_plus(&self) -> T {
        let dist = up_count_distribution(&self.minus_weights());
        dist[self.base.l + 1..]
            .iter()
            .copied()
            .collect::<KahanSum<T>>()
            .total()
    }

    /// Upper bound on `|Δ ln overlap|` from the perturbed sites, per branch
    /// `(plus_in_minus, minus_in_plus)`.
    ///
    /// Replacing one site's weights `(u, d)` by `(u', d')` turns the minority
    /// sum `uA + dB` (with `A ≤ B`) into `u'A + d'B`, so the ratio lies between
    /// `1` and `d'/d`. The majority sum likewise moves by at most `u'/u`.
    /// Replacements compose, so the per-site log factors add.
    pub fn log_ratio_bounds(&self) -> (T, T) {
        let plus = site_state_plus(self.base.m).expect("validated");
        let (_, ref_down) = plus.z_weights();
        let (ref_up, _) = plus.kicked(self.base.j).z_weights();
        let mut bound_plus = T::ZERO;
        let mut bound_minus = T::ZERO;
        for &site in &self.flipped {
            let state = &self.sites[site - 1];
            bound_plus += abs_log_ratio(state.z_weights().1, ref_down);
            bound_minus += abs_log_ratio(state.kicked(self.base.j).z_weights().0, ref_up);
        }
        (bound_plus, bound_minus)
    }

    pub fn classify(&self, thresholds: &ChainThresholds<T>) -> ChainReport<T> {
        let ln_pm = self.overlap_plus_in_minus().ln();
        let ln_mp = self.overlap_minus_in_plus().ln();
        let cross = self.base.j.cos().powi(self.base.sites() as i32);
        chain_report(
            ln_pm,
            ln_mp,
            self.base.m,
            self.base.j,
            self.base.sites(),
            cross,
            thresholds,
        )
    }
}

fn abs_log_ratio<T: Real>(new: T, old: T) -> T {
    if new == old {
        T::ZERO
    } else if new == T::ZERO || old == T::ZERO {
        T::INFINITY
    } else {
        (new / old).ln().abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    type PotentialSpec = super::PotentialSpec<f64>;
    type PacketSpec = super::PacketSpec<f64>;
    type ChainParams = super::ChainParams<f64>;

    fn overlap_plus_in_minus(l: usize, m: f64) -> Result<f64> {
        super::overlap_plus_in_minus(l, m)
    }

    fn overlap_minus_in_plus(l: usize, m: f64, j: f64) -> Result<f64> {
        super::overlap_minus_in_plus(l, m, j)
    }

    #[test]
    fn coupling_strength_shapes() {
        let rect = PotentialSpec::rectangular(0.0, 1.0, FRAC_PI_2, 11).unwrap();
        assert!((coupling_strength(&rect) - FRAC_PI_2).abs() < 1e-15);
        let zero = PotentialSpec::rectangular(0.0, 1.0, 0.0, 5).unwrap();
        assert_eq!(coupling_strength(&zero), 0.0);
        let tri = PotentialSpec::triangular(-0.5, 1.5, 3.0, 101).unwrap();
        assert!((coupling_strength(&tri) - 3.0 * 2.0 / 2.0).abs() < 1e-10);
        assert!(PotentialSpec::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(PotentialSpec::new(1.0, 1.0, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn antiderivative_is_exact_for_interpolant() {
        let tri = PotentialSpec::triangular(0.0, 2.0, 1.0, 3).unwrap();
        assert!((tri.antiderivative(1.0) - 0.5).abs() < 1e-15);
        assert!((tri.antiderivative(0.5) - 0.125).abs() < 1e-15);
        assert!((tri.antiderivative(5.0) - 1.0).abs() < 1e-15);
        assert_eq!(tri.antiderivative(-1.0), 0.0);
    }

    #[test]
    fn critical_time_substitution() {
        assert_eq!(critical_time(5, 1.0, 0.0), 10.0);
        assert_eq!(critical_time(0, 0.0, 0.0), 1.0);
        assert_eq!(critical_time(10, 0.5, -2.0), 22.5);
    }

    #[test]
    fn site_states() {
        let plus = site_state_plus(0.3).unwrap();
        assert_eq!(site_state_minus(0.3, 0.0).unwrap(), plus);
        let down = site_state_minus(1.0, FRAC_PI_2).unwrap();
        let expected = ComplexOperator::from_real_diagonal(&[0.0, 1.0]);
        assert!(down.density().op().max_abs_diff(&expected) < 1e-15);
        let ev = site_state_minus(0.5, FRAC_PI_3)
            .unwrap()
            .density()
            .op()
            .hermitian_eigenvalues();
        assert!((ev[0] - 0.25).abs() < 1e-14 && (ev[1] - 0.75).abs() < 1e-14);
        assert!(site_state_plus(1.5).is_err());
        assert!(site_state_minus(-1.01, 0.2).is_err());
    }

    #[test]
    fn kicked_plus_state_matches_minus_state() {
        for &(m, j) in &[(0.6, 0.7), (1.0, 1.2), (-0.4, 2.9)] {
            let kicked = site_state_plus(m).unwrap().kicked(j);
            let closed = site_state_minus(m, j).unwrap();
            assert!(kicked.density().op().max_abs_diff(closed.density().op()) < 1e-15);
        }
    }

    #[test]
    fn overlap_plus_in_minus_values() {
        for l in [0, 1, 7, 100] {
            assert_eq!(overlap_plus_in_minus(l, 1.0).unwrap(), 0.0);
            assert_eq!(overlap_plus_in_minus(l, 0.0).unwrap(), 0.5);
            assert_eq!(overlap_minus_in_plus(l, 0.0, 0.9).unwrap(), 0.5);
        }
        assert!((overlap_plus_in_minus(1, 0.5).unwrap() - 5.0 / 32.0).abs() < 1e-15);
        assert!(overlap_plus_in_minus(2, 1.2).is_err());
    }

    #[test]
    fn overlap_minus_in_plus_values() {
        assert_eq!(overlap_minus_in_plus(4, 1.0, FRAC_PI_2).unwrap(), 0.0);
        for m in [0.1, 0.7, 1.0] {
            assert!((overlap_minus_in_plus(6, m, FRAC_PI_4).unwrap() - 0.5).abs() < 1e-13);
        }
        assert!((overlap_minus_in_plus(1, 0.5, FRAC_PI_2).unwrap() - 5.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn large_chains_stay_finite() {
        let ln: f64 = ln_overlap_plus_in_minus(20_000, 0.5).unwrap();
        assert!(ln.is_finite() && ln < -5000.0);
        assert_eq!(overlap_plus_in_minus(20_000, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn decay_rate_values() {
        assert_eq!(decay_rate(1.0, FRAC_PI_2), f64::INFINITY);
        assert_eq!(decay_rate(0.0, 1.0), 0.0);
        assert!((decay_rate(0.5, FRAC_PI_2) - 0.143_841_036_225_890_5).abs() < 1e-12);
    }

    #[test]
    fn classify_model_examples() {
        let th = ChainThresholds::default();
        let ideal = classify_model(&ChainParams::new(50, 1.0, FRAC_PI_2).unwrap(), &th);
        assert_eq!(ideal.verdict(), Verdict::Ideal);
        assert_eq!(ideal.ln_eta, f64::NEG_INFINITY);
        let normal = classify_model(&ChainParams::new(50, 0.9, FRAC_PI_2).unwrap(), &th);
        assert_eq!(normal.verdict(), Verdict::Normal);
        assert!(normal.in_regime);
        let none = classify_model(&ChainParams::new(2, 0.05, FRAC_PI_4).unwrap(), &th);
        assert_eq!(none.verdict(), Verdict::Unclassified);
        assert!(!none.in_regime);
    }

    #[test]
    fn steady_tensor_is_consistent() {
        let p = ChainParams::new(3, 0.8, 1.2).unwrap();
        let f = steady_f_tensor(&p).unwrap();
        f.check_invariants(1e-12).unwrap();
        let ideal = steady_f_tensor(&ChainParams::new(3, 1.0, FRAC_PI_2).unwrap()).unwrap();
        let rep = crate::framework::classify(&ideal, 1e-12, 1e-2);
        assert_eq!(rep.verdict, Verdict::Ideal);
    }

    #[test]
    fn packet_validation() {
        let p = PacketSpec::sin_squared_bump(-1.0, 0.0, 401).unwrap();
        assert!((p.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(p.amplitude_at(0.5), cr(0.0));
        let v = PotentialSpec::rectangular(-1.0, 0.0, 1.0, 3).unwrap();
        assert!(p.check_pairing(&v).is_ok());
        let shifted = PacketSpec::sin_squared_bump(0.5, 1.5, 401).unwrap();
        assert!(shifted.check_pairing(&v).is_err());
        assert!(PacketSpec::new(0.0, 1.0, vec![cr(2.0), cr(2.0)]).is_err());
    }

    #[test]
    fn perturbation_validation_and_identity() {
        let base = ChainParams::new(4, 0.7, 1.1).unwrap();
        let none = perturb_chain_state(&base, &[]).unwrap();
        let a = none.overlap_plus_in_minus();
        let b = overlap_plus_in_minus(4, 0.7).unwrap();
        assert!((a - b).abs() < 1e-14);
        let c2 = none.overlap_minus_in_plus();
        assert!((c2 - overlap_minus_in_plus(4, 0.7, 1.1).unwrap()).abs() < 1e-14);
        let s = SiteState::basis(false);
        assert!(perturb_chain_state(&base, &[(0, s.clone())]).is_err());
        assert!(perturb_chain_state(&base, &[(10, s.clone())]).is_err());
        assert!(perturb_chain_state(&base, &[(2, s.clone()), (2, s)]).is_err());
    }

    #[test]
    fn single_flip_keeps_ideal_chain_ideal() {
        let base = ChainParams::new(3, 1.0, FRAC_PI_2).unwrap();
        let p = perturb_chain_state(&base, &[(4, SiteState::basis(false))]).unwrap();
        assert!(p.overlap_plus_in_minus() <= f64::EPSILON);
        assert!(p.overlap_minus_in_plus() <= f64::EPSILON);
    }

    #[test]
    fn site_kick_at_half_pi() {
        let k = site_kick(FRAC_PI_2);
        let target = ComplexOperator::pauli_x().scale(c(0.0, 1.0));
        assert!(k.max_abs_diff(&target) < 1e-15);
        let full = site_kick(PI);
        assert!(full.max_abs_diff(&ComplexOperator::identity(2).scale_real(-1.0)) < 1e-15);
    }
}
