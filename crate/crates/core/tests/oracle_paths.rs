use std::f64::consts::FRAC_PI_2;

use qmeasure::chain::{perturb_chain_state, site_state_plus, steady_f_tensor, SiteState};
use qmeasure::framework::{f_tensor, pointer_probabilities};
use qmeasure::oracle::{
    default_dynamics, dense_composite_check, embedded_chain, enumerate_majority,
    max_tensor_deviation, time_resolved_f, TimeResolver,
};
use qmeasure::sampling::{random_density, random_hermitian, random_instance, random_microstate};
use qmeasure::{
    ChainParams64, ComplexOperator64, FrameworkConfig64, InstrumentModel64, MicroState64,
    SiteState64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_site(r: &mut ChaCha8Rng) -> SiteState64 {
    SiteState::new(random_density(r, 2)).unwrap()
}

#[test]
fn dynamic_programming_matches_enumeration_on_perturbed_chains() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for l in 0..=6 {
        let n = 2 * l + 1;
        let base =
            ChainParams64::new(l, r.gen_range(0.0..1.0), r.gen_range(0.0..FRAC_PI_2)).unwrap();
        let k = r.gen_range(0..=n.min(3));
        let mut sites: Vec<usize> = (1..=n).collect();
        let flips: Vec<_> = (0..k)
            .map(|_| {
                let idx = r.gen_range(0..sites.len());
                (sites.swap_remove(idx), random_site(&mut r))
            })
            .collect();
        let chain = perturb_chain_state(&base, &flips).unwrap();
        let brute_pm = enumerate_majority(&chain.plus_weights(), false);
        let brute_mp = enumerate_majority(&chain.minus_weights(), true);
        assert!(
            (chain.overlap_plus_in_minus() - brute_pm).abs() < 1e-14,
            "L={l}"
        );
        assert!(
            (chain.overlap_minus_in_plus() - brute_mp).abs() < 1e-14,
            "L={l}"
        );
    }
}

#[test]
fn single_wrong_site_cannot_flip_a_pure_chain() {
    for l in 1..=8 {
        let base = ChainParams64::new(l, 1.0, FRAC_PI_2).unwrap();
        let chain = perturb_chain_state(&base, &[(l + 1, SiteState::basis(false))]).unwrap();
        assert!(chain.overlap_plus_in_minus() <= f64::EPSILON);
        assert!(chain.overlap_minus_in_plus() <= f64::EPSILON);
    }
}

#[test]
fn perturbation_rejects_bad_sites() {
    let base = ChainParams64::new(2, 0.5, 1.0).unwrap();
    let s = site_state_plus(0.1).unwrap();
    assert!(perturb_chain_state(&base, &[(0, s.clone())]).is_err());
    assert!(perturb_chain_state(&base, &[(6, s.clone())]).is_err());
    assert!(perturb_chain_state(&base, &[(2, s.clone()), (2, s)]).is_err());
}

#[test]
fn composite_check_on_random_two_cell_instrument() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let inst = random_instance::<f64, _>(&mut r, 2, 8).unwrap();
    let psi = random_microstate(&mut r, 2);
    let obs: Vec<_> = (0..4).map(|_| random_hermitian(&mut r, 2, 1.0)).collect();
    let cfg = FrameworkConfig64::default();
    let rep = dense_composite_check(
        &inst.system,
        &inst.instrument,
        &inst.omega,
        &psi,
        &obs,
        1.3,
        &cfg,
    )
    .unwrap();
    assert!(rep.max() < 1e-11, "{rep:?}");
}

#[test]
fn equal_couplings_leave_the_microstate_coherent() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let base = random_instance::<f64, _>(&mut r, 2, 6).unwrap();
    let v = random_hermitian(&mut r, 6, 1.0);
    let inst = InstrumentModel64::new(
        base.instrument.free_hamiltonian().clone(),
        vec![v.clone(), v],
        base.instrument.cells().to_vec(),
    )
    .unwrap();
    let sys = qmeasure::MicroSystem64::degenerate(2);
    let psi = random_microstate(&mut r, 2);
    let a = random_hermitian(&mut r, 2, 1.0);
    let f = f_tensor(&inst, &sys, &base.omega, 0.9).unwrap();
    let cfg = FrameworkConfig64::default();
    let e = qmeasure::framework::expectation(&f, &psi, &a, &cfg).unwrap();
    let direct = a
        .apply(psi.amplitudes())
        .iter()
        .zip(psi.amplitudes())
        .fold(qmeasure::Complex::new(0.0, 0.0), |acc, (x, c)| {
            acc + c.conj() * x
        });
    assert!((e - direct.re).abs() < 1e-12);
    let rep = dense_composite_check(&sys, &inst, &base.omega, &psi, &[a], 0.9, &cfg).unwrap();
    assert!(rep.max() < 1e-11);
}

#[test]
fn embedded_ideal_chain_reads_populations() {
    let model = embedded_chain(2, 1.0, FRAC_PI_2).unwrap();
    let psi = MicroState64::from_real(&[0.6, 0.8]).unwrap();
    let f = f_tensor(&model.instrument, &model.system, &model.omega, model.t).unwrap();
    let w = pointer_probabilities(&f, &psi).unwrap();
    assert!((w[0] - 0.36).abs() < 1e-10 && (w[1] - 0.64).abs() < 1e-10);
    let cfg = FrameworkConfig64::default();
    let rep = dense_composite_check(
        &model.system,
        &model.instrument,
        &model.omega,
        &psi,
        &[ComplexOperator64::pauli_x(), ComplexOperator64::pauli_z()],
        model.t,
        &cfg,
    )
    .unwrap();
    assert!(rep.max() < 1e-11);
}

#[test]
fn embedded_chain_agrees_with_closed_form_tensor() {
    let params = ChainParams64::new(2, 0.7, 1.1).unwrap();
    let model = embedded_chain(params.l(), params.m(), params.j()).unwrap();
    let dense = f_tensor(&model.instrument, &model.system, &model.omega, model.t).unwrap();
    assert!(max_tensor_deviation(&dense, &steady_f_tensor(&params).unwrap()) < 1e-12);
}

#[test]
fn pure_chain_dynamics_end_in_the_ideal_tensor() {
    let params = ChainParams64::new(3, 1.0, FRAC_PI_2).unwrap();
    let (v, phi, grid) = default_dynamics(params.j()).unwrap();
    let tau = qmeasure::chain::critical_time(3, 0.0, -1.0);
    for t in [tau, tau + 0.5, tau + 3.0] {
        let rec = time_resolved_f(&params, &v, &phi, &grid, t).unwrap();
        assert!((rec.f.get(1, 1, 1).re - 1.0).abs() < 1e-8);
        assert!((rec.f.get(0, 0, 0).re - 1.0).abs() < 1e-8);
        for alpha in 0..2 {
            assert!(rec.f.get(0, 1, alpha).norm() < 1e-8);
        }
        assert!(rec.stationary);
    }
}

#[test]
fn time_zero_matches_unkicked_overlaps() {
    let params = ChainParams64::new(3, 0.6, 1.3).unwrap();
    let (v, phi, grid) = default_dynamics(params.j()).unwrap();
    let rec = time_resolved_f(&params, &v, &phi, &grid, 0.0).unwrap();
    let pm = qmeasure::chain::overlap_plus_in_minus(3, 0.6).unwrap();
    assert!((rec.f.get(0, 0, 1).re - pm).abs() < 1e-14);
    assert!((rec.f.get(1, 1, 1).re - pm).abs() < 1e-14);
    assert!((rec.f.get(0, 1, 0).re + rec.f.get(0, 1, 1).re - 1.0).abs() < 1e-12);
}

#[test]
fn diagonal_entries_saturate_monotonically() {
    let params = ChainParams64::new(3, 0.8, 1.2).unwrap();
    let (v, phi, grid) = default_dynamics(params.j()).unwrap();
    let h = 0.5f64.sqrt();
    let resolver = TimeResolver::new(
        params,
        v,
        &phi,
        &grid,
        MicroState64::from_real(&[h, h]).unwrap(),
    )
    .unwrap();
    let mut prev = resolver.record(0.0).unwrap().f.get(1, 1, 1).re;
    for k in 1..=40 {
        let now = resolver.record(0.25 * k as f64).unwrap().f.get(1, 1, 1).re;
        assert!(now >= prev - 1e-12, "t={}", 0.25 * k as f64);
        prev = now;
    }
}
