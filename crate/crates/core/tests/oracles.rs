//! Closed forms and hand computations checked against the library.

use std::f64::consts::PI;

use idslab_core::floquet::{band_structure, DEFAULT_FLAT_TOL};
use idslab_core::ids::{energy_grid, finite_volume_ids, jump_profile, mc_expected_ids};
use idslab_core::random::derive_seed;
use idslab_core::spectral::{coupling_finite_difference, eigensolve, hellmann_feynman, simple_indices};
use idslab_core::ssf::{invariance_principle_check, superbound_check};
use idslab_core::wegner::{scaling_fit, wegner_scan, DEFAULT_METRIC_WINDOW};
use idslab_core::*;
use nalgebra::{DMatrix, DVector};

fn no_disorder() -> RandomConfig {
    RandomConfig::constant(&IndexSet::new(), 0.0)
}

#[test]
fn dirichlet_chain_eigenvalues() {
    let lat = Lattice::builtin("chain").unwrap();
    for len in [1usize, 2, 7, 20] {
        let agg = lat.box_agglomerate(len).unwrap();
        let spec = eigensolve(&Model::periodic(&lat).assemble(&agg, &no_disorder()).unwrap(), false).unwrap();
        let mut want: Vec<f64> = (1..=len).map(|k| 2.0 - 2.0 * (k as f64 * PI / (len + 1) as f64).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (got, w) in spec.eigenvalues().iter().zip(&want) {
            assert!((got - w).abs() < 1e-13, "L={len}: {got} vs {w}");
        }
    }
}

#[test]
fn square_box_is_a_kronecker_sum() {
    let lat = Lattice::builtin("square").unwrap();
    let len = 5;
    let agg = lat.box_agglomerate(len).unwrap();
    let spec = eigensolve(&Model::periodic(&lat).assemble(&agg, &no_disorder()).unwrap(), false).unwrap();
    let one: Vec<f64> = (1..=len).map(|k| 2.0 - 2.0 * (k as f64 * PI / (len + 1) as f64).cos()).collect();
    let mut want: Vec<f64> = one.iter().flat_map(|a| one.iter().map(move |b| a + b)).collect();
    want.sort_by(f64::total_cmp);
    for (got, w) in spec.eigenvalues().iter().zip(&want) {
        assert!((got - w).abs() < 1e-12);
    }
}

#[test]
fn chain_bloch_ids_matches_arccos_law() {
    let lat = Lattice::builtin("chain").unwrap();
    for g in [64usize, 256] {
        let bands = band_structure(&lat, &[0.0], g).unwrap();
        for e in [0.3f64, 1.0, 2.0, 3.1, 3.9] {
            let exact = (1.0 - e / 2.0).acos() / PI;
            assert!((bands.bloch_ids(e) - exact).abs() <= 2.0 / g as f64, "G={g} E={e}");
        }
        assert!(bands.flat_bands(DEFAULT_FLAT_TOL).is_empty());
    }
}

#[test]
fn pendant_pair_box_has_exact_flat_states() {
    let lat = Lattice::builtin("pendant-pair").unwrap();
    let len = 6;
    let agg = lat.box_agglomerate(len).unwrap();
    let spec = eigensolve(&Model::periodic(&lat).assemble(&agg, &no_disorder()).unwrap(), false).unwrap();
    assert_eq!(spec.projection_trace(1.0, 1e-9), len);
    let curve = finite_volume_ids(&Model::periodic(&lat), &agg, &no_disorder(), &[1.0 - 1e-6, 1.0 + 1e-6]).unwrap();
    assert!((curve.values[1] - curve.values[0] - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn zero_disorder_keeps_the_jump() {
    let lat = Lattice::builtin("pendant-pair").unwrap();
    let model = Model::cell_alloy(&lat, CouplingDistribution::constant(0.0).unwrap()).unwrap();
    let agg = lat.box_agglomerate(8).unwrap();
    let curve = mc_expected_ids(&model, &agg, &energy_grid(0.5, 1.5, 81), 2, 4).unwrap();
    for j in jump_profile(&curve, &[0.1, 0.05, 0.025, 0.0125]).unwrap() {
        assert!(j.max_increment >= 1.0 / 3.0 - 1e-12, "{j:?}");
    }
}

#[test]
fn hellmann_feynman_against_central_differences() {
    let lat = Lattice::builtin("chain").unwrap();
    let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
    let agg = lat.box_agglomerate(10).unwrap();
    let cfg = model.sample(&agg, 99, 0).unwrap();
    let spec = eigensolve(&model.assemble(&agg, &cfg).unwrap(), false).unwrap();
    for n in simple_indices(&spec) {
        let hf = hellmann_feynman(&model, &agg, &cfg, n).unwrap();
        // v = χ_cell covers with λ = 1 and is a partition of unity: Σ ∂E/∂q = ‖ψ‖² = 1
        assert!((hf.sum - 1.0).abs() < 1e-12);
        assert_eq!(hf.lower_bound_holds(), Some(true));
        for (site, d) in hf.derivatives.iter().step_by(3) {
            let fd = coupling_finite_difference(&model, &agg, &cfg, n, site, 1e-5).unwrap();
            assert!((fd - d).abs() < 1e-6, "n={n} site={site}: {fd} vs {d}");
        }
    }
}

#[test]
fn invariance_principle_by_direct_counting() {
    // H2 = H1 + rank-two positive part on a random 4×4 symmetric matrix
    let mut rng = idslab_core::random::CounterRng::new(derive_seed(5, 5));
    let a = DMatrix::from_fn(4, 4, |_, _| rng.next_normal());
    let b1 = &a * a.transpose();
    let u = DVector::from_fn(4, |_, _| rng.next_normal());
    let w = DVector::from_fn(4, |_, _| rng.next_normal());
    let b2 = &b1 + &u * u.transpose() + &w * w.transpose();
    let h1 = Hamiltonian::with_unit_measure(b1.clone(), ModelKind::Periodic).unwrap();
    let h2 = Hamiltonian::with_unit_measure(b2.clone(), ModelKind::Periodic).unwrap();
    let e1 = b1.symmetric_eigenvalues();
    let e2 = b2.symmetric_eigenvalues();
    for i in 0..20 {
        let e = 0.5 * i as f64 + 0.123;
        let direct = e1.iter().filter(|&&x| x < e).count() as i64 - e2.iter().filter(|&&x| x < e).count() as i64;
        let r = invariance_principle_check(&h1, &h2, 2, e).unwrap();
        assert_eq!(r.xi, direct);
        assert!(r.moduli_agree && r.sign_flipped, "{r:?}");
        assert!((0..=2).contains(&r.xi));
    }
}

#[test]
fn superbound_on_single_site_pairs() {
    let lat = Lattice::builtin("chain").unwrap();
    let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
    let agg = lat.box_agglomerate(8).unwrap();
    for s in 0..10u64 {
        let cfg = model.sample(&agg, 3, s).unwrap();
        let site = GroupElement::from([(s % 8) as i64]);
        let (h1, h2) = idslab_core::ssf::perturbation_pair(&model, &agg, &cfg, &site, 0.0).unwrap();
        let r = superbound_check(&h1, &h2, 2.0, 1).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.lhs > 0.0);
    }
}

#[test]
fn flat_band_defeats_wegner_scaling() {
    let lat = Lattice::builtin("pendant-pair").unwrap();
    let model = Model::cell_alloy(&lat, CouplingDistribution::constant(0.0).unwrap()).unwrap();
    let table = wegner_scan(&model, &lat, 8, 1.0, &[0.2, 0.1, 0.05, 0.025], 2, 0, DEFAULT_METRIC_WINDOW).unwrap();
    let fit = scaling_fit(&table.rows, 2.0).unwrap();
    assert!(fit.slope.abs() < 0.05);
}
