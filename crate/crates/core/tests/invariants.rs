use idslab_core::lattice::{support_extension, translate_set};
use idslab_core::operators::{rap_potential, s_transform, MetricMode, SingleSiteDeformation, SiteFunction};
use idslab_core::random::{sample_config, shift_config, substitute};
use idslab_core::spectral::{eigensolve, symmetric_eigenvalues};
use idslab_core::ssf::{counting_ssf, krein_check, TestFunction};
use idslab_core::*;
use proptest::prelude::*;

fn lattice_strategy() -> impl Strategy<Value = Lattice> {
    prop::sample::select(vec!["chain", "square", "pendant-pair"]).prop_map(|n| Lattice::builtin(n).unwrap())
}

fn offset(dim: usize, shift: i64) -> GroupElement {
    GroupElement::new((0..dim as i64).map(|i| shift - 2 * i).collect())
}

fn small_box(lat: &Lattice) -> usize {
    if lat.dim() == 1 { 5 } else { 3 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn vertex_index_round_trip(lat in lattice_strategy(), len in 1usize..5) {
        let agg = lat.box_agglomerate(len).unwrap();
        for i in 0..agg.len() {
            let (cell, local) = agg.vertex(i);
            prop_assert_eq!(agg.vertex_index(cell, local), Some(i));
        }
    }

    #[test]
    fn extended_set_bounds(lat in lattice_strategy(), len in 1usize..5) {
        let cells = idslab_core::lattice::box_set(lat.dim(), len);
        let support: std::collections::BTreeSet<GroupElement> =
            [GroupElement::zero(lat.dim()), offset(lat.dim(), 1)].into_iter().collect();
        let plus = support_extension(&cells, &support).unwrap();
        prop_assert!(plus.len() >= cells.len());
        prop_assert!(plus.len() <= cells.len() * support.len());
        prop_assert!(cells.iter().all(|g| plus.contains(g)));
    }

    #[test]
    fn agglomerate_translation_equivariant(lat in lattice_strategy(), shift in -7i64..7) {
        let agg = lat.box_agglomerate(small_box(&lat)).unwrap();
        let by = offset(lat.dim(), shift);
        let moved = agg.translate(&by).unwrap();
        prop_assert_eq!(moved.index_set(), translate_set(&agg.index_set(), &by));
        prop_assert_eq!(moved.edges(), agg.edges());
        prop_assert_eq!(moved.degrees(), agg.degrees());
    }

    #[test]
    fn rap_potential_equivariant(lat in lattice_strategy(), shift in -7i64..7, seed in any::<u64>()) {
        let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let Model::Rap { v_per, potential, .. } = &model else { unreachable!() };
        let agg = lat.box_agglomerate(small_box(&lat)).unwrap();
        let by = offset(lat.dim(), shift);
        let moved = agg.translate(&by).unwrap();
        let cfg = model.sample(&agg, seed, 0).unwrap();
        let v = rap_potential(&agg, &cfg, potential, v_per).unwrap();
        let w = rap_potential(&moved, &shift_config(&cfg, &by), potential, v_per).unwrap();
        prop_assert_eq!(v, w);
    }

    #[test]
    fn ram_operator_equivariant(shift in -7i64..7, seed in any::<u64>()) {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let agg = lat.box_agglomerate(4).unwrap();
        let by = GroupElement::from([shift]);
        let cfg = model.sample(&agg, seed, 1).unwrap();
        let h = model.assemble(&agg, &cfg).unwrap();
        let g = model.assemble(&agg.translate(&by).unwrap(), &shift_config(&cfg, &by)).unwrap();
        prop_assert_eq!(h.matrix(), g.matrix());
        prop_assert_eq!(h.measure(), g.measure());
    }

    #[test]
    fn site_streams_split(seed in any::<u64>(), extra in 1i64..20) {
        let dist = CouplingDistribution::uniform(0.0, 1.0).unwrap();
        let small: IndexSet = (0..4).map(|i| GroupElement::from([i])).collect();
        let large: IndexSet = (-extra..4 + extra).map(|i| GroupElement::from([i])).collect();
        let a = sample_config(&dist, &small, seed);
        let b = sample_config(&dist, &large, seed);
        for g in &small {
            prop_assert_eq!(a.get(g), b.get(g));
        }
    }

    #[test]
    fn measure_change_is_unitary(seed in any::<u64>()) {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let agg = lat.box_agglomerate(3).unwrap();
        let h1 = model.assemble(&agg, &model.sample(&agg, seed, 0).unwrap()).unwrap();
        let h2 = model.assemble(&agg, &model.sample(&agg, seed, 1).unwrap()).unwrap();
        let s = s_transform(h1.measure().as_slice(), h2.measure().as_slice()).unwrap();
        let phi = nalgebra::DVector::from_fn(agg.len(), |i, _| (i as f64 * 0.37).sin());
        let sphi = s.apply(&phi);
        let n1: f64 = phi.iter().zip(h1.measure().iter()).map(|(x, m)| m * x * x).sum();
        let n2: f64 = sphi.iter().zip(h2.measure().iter()).map(|(x, m)| m * x * x).sum();
        prop_assert!((n1 - n2).abs() <= 1e-13 * n1);
        let conj = s.conjugate(&h1).unwrap();
        let e1 = eigensolve(&h1, false).unwrap();
        let e2 = eigensolve(&conj, false).unwrap();
        for (a, b) in e1.eigenvalues().iter().zip(e2.eigenvalues()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn counting_is_monotone(seed in any::<u64>(), a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let lat = Lattice::builtin("chain").unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let agg = lat.box_agglomerate(8).unwrap();
        let spec = eigensolve(&model.assemble(&agg, &model.sample(&agg, seed, 0).unwrap()).unwrap(), false).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(spec.count_below(lo) <= spec.count_below(hi));
    }

    #[test]
    fn global_metric_shift_scales_spectrum(seed in any::<u64>(), t in -1.0f64..1.0) {
        let lat = Lattice::builtin("chain").unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let agg = lat.box_agglomerate(7).unwrap();
        let cfg = model.sample(&agg, seed, 0).unwrap();
        let e0 = eigensolve(&model.assemble(&agg, &cfg).unwrap(), false).unwrap();
        let et = eigensolve(&model.assemble(&agg, &cfg.offset_all(t)).unwrap(), false).unwrap();
        let top = e0.eigenvalues().last().unwrap().abs();
        for (a, b) in e0.eigenvalues().iter().zip(et.eigenvalues()) {
            prop_assert!((b - (-t).exp() * a).abs() <= 1e-12 * (-t).exp() * top);
        }
    }

    #[test]
    fn eigenvalues_increase_with_coupling(seed in any::<u64>(), site in 0i64..6, bump in 0.0f64..2.0) {
        let lat = Lattice::builtin("chain").unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let agg = lat.box_agglomerate(6).unwrap();
        let cfg = model.sample(&agg, seed, 0).unwrap();
        let g = GroupElement::from([site]);
        let raised = substitute(&cfg, &g, cfg.get(&g).unwrap() + bump);
        let e1 = eigensolve(&model.assemble(&agg, &cfg).unwrap(), false).unwrap();
        let e2 = eigensolve(&model.assemble(&agg, &raised).unwrap(), false).unwrap();
        for (a, b) in e1.eigenvalues().iter().zip(e2.eigenvalues()) {
            prop_assert!(b >= &(a - 1e-12));
        }
        // rank-one positive perturbation: ξ takes values in {0, 1}
        let xi = counting_ssf(&model.assemble(&agg, &cfg).unwrap(), &model.assemble(&agg, &raised).unwrap()).unwrap();
        prop_assert!(xi.values.iter().all(|&v| v == 0 || v == 1));
    }

    #[test]
    fn krein_on_random_pairs(seed in any::<u64>(), k in 1u32..14) {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let agg = lat.box_agglomerate(2).unwrap();
        let h1 = model.assemble(&agg, &model.sample(&agg, seed, 0).unwrap()).unwrap();
        let h2 = model.assemble(&agg, &model.sample(&agg, seed, 1).unwrap()).unwrap();
        for phi in [TestFunction::Polynomial(vec![0.5, -1.0, 1.0]), TestFunction::ResolventPower(k)] {
            let r = krein_check(&h1, &h2, &phi).unwrap();
            prop_assert!(r.passed, "{:?}", r);
        }
    }
}

#[test]
fn deformation_normalization_restores_partition_of_unity() {
    let lat = Lattice::builtin("pendant-pair").unwrap();
    let raw = SingleSiteDeformation {
        profile: SiteFunction::new(
            &lat,
            [(GroupElement::from([0]), "b", 2.0), (GroupElement::from([0]), "p1", 0.5), (GroupElement::from([0]), "p2", 1.0)],
        )
        .unwrap(),
        kappa: 0.5,
    };
    assert!(raw.check_normalized(&lat).is_err());
    let u = raw.normalized();
    u.check_normalized(&lat).unwrap();
    let model = Model::Ram {
        deformation: u,
        distribution: CouplingDistribution::constant(0.0).unwrap(),
        metric: MetricMode::MeasureOnly,
    };
    let agg = lat.box_agglomerate(3).unwrap();
    let h = model.assemble(&agg, &model.sample(&agg, 0, 0).unwrap()).unwrap();
    assert!(h.measure().iter().all(|&m| (m - 1.0).abs() < 1e-15));
    let plain = Model::periodic(&lat).assemble(&agg, &RandomConfig::constant(&IndexSet::new(), 0.0)).unwrap();
    let a = symmetric_eigenvalues(h.matrix()).unwrap();
    let b = symmetric_eigenvalues(plain.matrix()).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-13));
}
