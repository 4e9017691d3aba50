use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qmeasure::chain::{classify_model, ChainThresholds, PacketSpec, PotentialSpec};
use qmeasure::framework::{
    classify, conditional_expectation, consistency_residual, expectation, f_tensor,
    pointer_probabilities, reduced_state,
};
use qmeasure::oracle::{
    embedded_chain, run_equivalence_checks, OracleCheckConfig, TimeResolver, MAX_DENSE_L,
};
use qmeasure::sampling::{random_hermitian, random_instance, random_microstate};
use qmeasure::{ChainParams64, ComplexOperator64, FrameworkConfig64, GridConfig64, MicroState64};

use crate::config::{RunConfig, Validated, ValidationError};
use crate::output::{num, Csv};

pub enum Outcome {
    Pass,
    /// A check ran and failed; the string names it.
    Fail(String),
}

fn chain_params(cfg: &RunConfig, default_l: usize) -> Validated<ChainParams64> {
    let l = cfg.count("L", default_l)?;
    let m = cfg.real("m", 0.8)?;
    let j = cfg.real("J", std::f64::consts::FRAC_PI_2)?;
    Ok(ChainParams64::new(l, m, j)?)
}

fn thresholds(cfg: &RunConfig) -> Validated<ChainThresholds<f64>> {
    Ok(ChainThresholds {
        ideal_tol: cfg.real("tol.ideal", 0.0)?,
        eta_threshold: cfg.real("tol.eta", 1e-2)?,
    })
}

fn chain_meta(csv: &mut Csv, p: &ChainParams64) {
    csv.meta("L", p.l())
        .meta("m", num(p.m()))
        .meta("J", num(p.j()));
}

pub fn classify_cmd(cfg: &RunConfig) -> Validated<(Csv, Outcome)> {
    let p = chain_params(cfg, 10)?;
    let th = thresholds(cfg)?;
    let rep = classify_model(&p, &th);
    let mut csv = Csv::new("classify");
    chain_meta(&mut csv, &p);
    csv.meta("tol.ideal", num(th.ideal_tol))
        .meta("tol.eta", num(th.eta_threshold));
    for d in &rep.report.diagnostics {
        csv.meta("note", d);
    }
    csv.header(&[
        "L",
        "N",
        "verdict",
        "overlap_plus_in_minus",
        "overlap_minus_in_plus",
        "eta",
        "ln_eta",
        "decay_rate",
        "predicted_ln_eta",
        "in_regime",
    ]);
    csv.row(&[
        p.l().to_string(),
        p.sites().to_string(),
        rep.verdict().to_string(),
        num(rep.overlap_plus_in_minus),
        num(rep.overlap_minus_in_plus),
        num(rep.eta()),
        num(rep.ln_eta),
        num(rep.decay_rate),
        num(rep.predicted_ln_eta),
        rep.in_regime.to_string(),
    ]);
    Ok((csv, Outcome::Pass))
}

pub fn sweep_cmd(cfg: &RunConfig) -> Validated<(Csv, Outcome)> {
    let base = chain_params(cfg, 0)?;
    let l_min = cfg.count("sweep.L_min", 10)?;
    let l_max = cfg.count("sweep.L_max", 2000)?;
    let step = cfg.count("sweep.L_step", 10)?;
    if step == 0 || l_max < l_min {
        return Err(ValidationError(format!(
            "sweep needs L_step > 0 and L_min <= L_max (got {l_min}..{l_max} step {step})"
        )));
    }
    let th = thresholds(cfg)?;
    let ls: Vec<usize> = (l_min..=l_max).step_by(step).collect();
    let rows: Vec<Vec<String>> = ls
        .par_iter()
        .map(|&l| {
            let p = ChainParams64::new(l, base.m(), base.j()).expect("validated above");
            let rep = classify_model(&p, &th);
            let n = p.sites() as f64;
            vec![
                l.to_string(),
                p.sites().to_string(),
                num(rep.overlap_plus_in_minus),
                num(rep.overlap_minus_in_plus),
                num(rep.ln_eta / n),
                num(-rep.decay_rate),
                rep.verdict().to_string(),
            ]
        })
        .collect();
    let mut csv = Csv::new("sweep");
    csv.meta("m", num(base.m())).meta("J", num(base.j()));
    csv.meta("sweep.L_min", l_min)
        .meta("sweep.L_max", l_max)
        .meta("sweep.L_step", step);
    csv.meta(
        "decay_rate",
        num(qmeasure::chain::decay_rate(base.m(), base.j())),
    );
    csv.header(&[
        "L",
        "N",
        "overlap_plus_in_minus",
        "overlap_minus_in_plus",
        "ln_eta_per_N",
        "minus_decay_rate",
        "verdict",
    ]);
    for r in &rows {
        csv.row(r);
    }
    Ok((csv, Outcome::Pass))
}

struct Dynamics {
    potential: PotentialSpec<f64>,
    packet: PacketSpec<f64>,
    grid: GridConfig64,
}

fn dynamics(cfg: &RunConfig, j: f64) -> Validated<Dynamics> {
    let a = cfg.real("a", -1.0)?;
    let b = cfg.real("b", 0.0)?;
    let c = cfg.real("c_supp", -1.0)?;
    let d = cfg.real("d", 0.0)?;
    let potential =
        PotentialSpec::rectangular_with_coupling(a, b, j, cfg.count("potential.points", 2)?)?;
    let packet = PacketSpec::sin_squared_bump(c, d, cfg.count("packet.points", 4001)?)?;
    packet.check_pairing(&potential)?;
    let grid = GridConfig64 {
        x_min: cfg.real("grid.x_min", c)?,
        x_max: cfg.real("grid.x_max", d)?,
        points: cfg.count("grid.points", 801)?,
        dt: cfg.real("grid.dt", 0.25)?,
    };
    grid.validate()?;
    Ok(Dynamics {
        potential,
        packet,
        grid,
    })
}

fn psi_or(cfg: &RunConfig, default: &[f64]) -> Validated<MicroState64> {
    let amps = cfg.reals("psi")?.unwrap_or_else(|| default.to_vec());
    Ok(MicroState64::from_real(&amps)?)
}

/// Uniform schedule `0, dt, 2dt, …` up to `t_max`, with `τ` merged in.
fn schedule(dt: f64, t_max: f64, tau: f64) -> Vec<f64> {
    let steps = (t_max / dt + 1e-9).floor() as usize;
    let mut ts: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    if tau >= 0.0 && !ts.iter().any(|&t| (t - tau).abs() <= 1e-12 * tau.max(1.0)) {
        ts.push(tau);
        ts.sort_by(f64::total_cmp);
    }
    ts
}

pub fn time_series_cmd(cfg: &RunConfig) -> Validated<(Csv, Outcome)> {
    let p = chain_params(cfg, 3)?;
    let dynamics = dynamics(cfg, p.j())?;
    let h = 0.5f64.sqrt();
    let psi = psi_or(cfg, &[h, h])?;
    let stat_tol = cfg.real("tol.stat", 1e-8)?;
    let resolver = TimeResolver::new(
        p,
        dynamics.potential.clone(),
        &dynamics.packet,
        &dynamics.grid,
        psi,
    )?
    .with_stat_tol(stat_tol);
    let tau = resolver.tau();
    let t_max = cfg.real("t_max", tau.max(0.0) + 2.0)?;
    if t_max < tau {
        return Err(ValidationError(format!(
            "t_max = {t_max} must be at least tau = {tau}"
        )));
    }
    let ts = schedule(dynamics.grid.dt, t_max, tau);
    let records = ts
        .par_iter()
        .map(|&t| resolver.record(t))
        .collect::<qmeasure::Result<Vec<_>>>()?;

    let mut csv = Csv::new("time-series");
    chain_meta(&mut csv, &p);
    let (a, b) = dynamics.potential.support();
    let (c, d) = dynamics.packet.support();
    csv.meta("a", num(a))
        .meta("b", num(b))
        .meta("c_supp", num(c))
        .meta("d", num(d));
    csv.meta("grid.points", dynamics.grid.points)
        .meta("grid.dt", num(dynamics.grid.dt));
    csv.meta("tol.stat", num(stat_tol))
        .meta("t_max", num(t_max));
    csv.meta("tau", num(tau));
    csv.header(&[
        "t",
        "F_pp_plus",
        "F_pp_minus",
        "F_mm_plus",
        "F_mm_minus",
        "F_pm_plus_re",
        "F_pm_plus_im",
        "F_pm_minus_re",
        "F_pm_minus_im",
        "w_plus",
        "w_minus",
        "stationary",
    ]);
    for rec in &records {
        let f = &rec.f;
        csv.row(&[
            num(rec.t),
            num(f.get(0, 0, 0).re),
            num(f.get(0, 0, 1).re),
            num(f.get(1, 1, 0).re),
            num(f.get(1, 1, 1).re),
            num(f.get(0, 1, 0).re),
            num(f.get(0, 1, 0).im),
            num(f.get(0, 1, 1).re),
            num(f.get(0, 1, 1).im),
            num(rec.w.0),
            num(rec.w.1),
            rec.stationary.to_string(),
        ]);
    }
    Ok((csv, Outcome::Pass))
}

pub fn oracle_check_cmd(cfg: &RunConfig) -> Validated<(Csv, Outcome)> {
    let defaults = OracleCheckConfig::default();
    let check = OracleCheckConfig {
        l_max: cfg.count("oracle.L_max", defaults.l_max)?,
        tolerance_override: cfg.real_opt("tol.check")?,
        ..defaults
    };
    let outcomes = run_equivalence_checks(&check)?;
    let mut csv = Csv::new("oracle-check");
    csv.meta("oracle.L_max", check.l_max);
    if let Some(t) = check.tolerance_override {
        csv.meta("tol.check", num(t));
    }
    csv.header(&["check", "max_deviation", "tolerance", "passed"]);
    for o in &outcomes {
        csv.row(&[
            o.name.to_string(),
            num(o.max_deviation),
            num(o.tolerance),
            o.passed().to_string(),
        ]);
    }
    let outcome = match outcomes.iter().find(|o| !o.passed()) {
        Some(o) => Outcome::Fail(format!(
            "{}: max deviation {:e} exceeds tolerance {:e}",
            o.name, o.max_deviation, o.tolerance
        )),
        None => Outcome::Pass,
    };
    Ok((csv, outcome))
}

pub fn framework_demo_cmd(cfg: &RunConfig, seed: u64) -> Validated<(Csv, Outcome)> {
    let fcfg = FrameworkConfig64::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = cfg.text("demo.model", "random");
    let mut csv = Csv::new("framework-demo");
    csv.meta("demo.model", model).meta("seed", seed);
    let (f, psi) = match model {
        "random" => {
            let n = cfg.count("demo.n", 2)?;
            let dim = cfg.count("demo.dim", 8)?;
            if n == 0 || dim < n {
                return Err(ValidationError(format!(
                    "demo needs 1 <= demo.n <= demo.dim (got n = {n}, dim = {dim})"
                )));
            }
            let t = cfg.real("demo.t", 1.3)?;
            let inst = random_instance::<f64, _>(&mut rng, n, dim)?;
            let psi = match cfg.reals("psi")? {
                Some(amps) => MicroState64::from_real(&amps)?,
                None => random_microstate(&mut rng, n),
            };
            csv.meta("demo.n", n)
                .meta("demo.dim", dim)
                .meta("demo.t", num(t));
            (
                f_tensor(&inst.instrument, &inst.system, &inst.omega, t)?,
                psi,
            )
        }
        "embedded" => {
            let p = ChainParams64::new(
                cfg.count("L", 3)?,
                cfg.real("m", 1.0)?,
                cfg.real("J", std::f64::consts::FRAC_PI_2)?,
            )?;
            if p.l() > MAX_DENSE_L {
                return Err(ValidationError(format!(
                    "embedded model needs L <= {MAX_DENSE_L}, got {}",
                    p.l()
                )));
            }
            let model = embedded_chain(p.l(), p.m(), p.j())?;
            let h = 0.5f64.sqrt();
            let psi = psi_or(cfg, &[h, h])?;
            chain_meta(&mut csv, &p);
            (
                f_tensor(&model.instrument, &model.system, &model.omega, model.t)?,
                psi,
            )
        }
        other => {
            return Err(ValidationError(format!(
                "demo.model must be 'random' or 'embedded', got '{other}'"
            )))
        }
    };
    let n = psi.n();
    if f.n() != n {
        return Err(ValidationError(format!(
            "psi has {} amplitudes, model has {} levels",
            n,
            f.n()
        )));
    }
    let observable = cfg.text("demo.observable", "random");
    let a = match observable {
        "identity" => ComplexOperator64::identity(n),
        "diagonal" => {
            ComplexOperator64::from_real_diagonal(&(0..n).map(|r| r as f64).collect::<Vec<_>>())
        }
        "random" => random_hermitian(&mut rng, n, 1.0),
        other => {
            return Err(ValidationError(format!(
                "demo.observable must be 'identity', 'diagonal' or 'random', got '{other}'"
            )))
        }
    };
    csv.meta("demo.observable", observable);
    let join = |part: fn(&qmeasure::Complex<f64>) -> f64| {
        psi.amplitudes()
            .iter()
            .map(|z| num(part(z)))
            .collect::<Vec<_>>()
            .join(";")
    };
    csv.meta("psi.re", join(|z| z.re))
        .meta("psi.im", join(|z| z.im));
    let verdict = classify(&f, fcfg.ideal_tol, fcfg.eta_threshold);
    csv.meta("verdict", verdict.verdict);

    let zero = num(0.0);
    let blank = String::new();
    csv.header(&["quantity", "i", "j", "re", "im"]);
    for r in 0..n {
        for s in 0..n {
            let z = a.get(r, s);
            csv.row(&[
                "observable".into(),
                r.to_string(),
                s.to_string(),
                num(z.re),
                num(z.im),
            ]);
        }
    }
    csv.row(&[
        "expectation".into(),
        blank.clone(),
        blank.clone(),
        num(expectation(&f, &psi, &a, &fcfg)?),
        zero.clone(),
    ]);
    let w = pointer_probabilities(&f, &psi)?;
    for (alpha, &wa) in w.iter().enumerate() {
        csv.row(&[
            "pointer_probability".into(),
            alpha.to_string(),
            blank.clone(),
            num(wa),
            zero.clone(),
        ]);
    }
    for (alpha, &wa) in w.iter().enumerate() {
        let value = if wa > fcfg.w_floor {
            num(conditional_expectation(&f, &psi, &a, alpha, &fcfg)?)
        } else {
            num(f64::NAN)
        };
        csv.row(&[
            "conditional_expectation".into(),
            alpha.to_string(),
            blank.clone(),
            value,
            zero.clone(),
        ]);
    }
    let rho = reduced_state(&f, &psi)?;
    for r in 0..n {
        for s in 0..n {
            let z = rho.op().get(r, s);
            csv.row(&[
                "reduced_state".into(),
                r.to_string(),
                s.to_string(),
                num(z.re),
                num(z.im),
            ]);
        }
    }
    csv.row(&[
        "consistency_residual".into(),
        blank.clone(),
        blank,
        num(consistency_residual(&f, &psi, &a, &fcfg)?),
        zero,
    ]);
    Ok((csv, Outcome::Pass))
}
