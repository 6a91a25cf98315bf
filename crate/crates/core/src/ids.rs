//! Finite-volume and expected integrated density of states.
//!
//! `N_ω^I(E) = #{eigenvalues of H_ω^I below E} / vol_ω Λ(I)` with
//! `vol_ω = n` for potentials and `Σ a_ω` for metrics. The expected IDS is the
//! Monte-Carlo mean of `N_ω^I` over independent configurations; on growing
//! boxes it converges to the IDS at its continuity points.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::floquet::band_structure;
use crate::lattice::{box_set, Agglomerate, Lattice};
use crate::model::Model;
use crate::operators::ModelKind;
use crate::random::RandomConfig;
use crate::spectral::{eigensolve, Spectrum};
use crate::stats::sample_stats;

#[derive(Clone, Debug, PartialEq)]
pub struct CurveMeta {
    pub box_length: Option<usize>,
    pub samples: usize,
    pub model: ModelKind,
    pub seed: Option<u64>,
    /// Normalization volume (mean over samples for random metrics).
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdsCurve {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub meta: CurveMeta,
}

impl IdsCurve {
    /// Largest decrease between consecutive energies, net of twice the
    /// combined standard error. Zero for a monotone curve.
    pub fn monotonicity_violation(&self) -> f64 {
        (1..self.values.len())
            .map(|i| {
                let drop = self.values[i - 1] - self.values[i];
                drop - 2.0 * (self.stderr[i - 1] + self.stderr[i])
            })
            .fold(0.0, f64::max)
    }
}

fn check_energies(energies: &[f64]) -> Result<()> {
    if energies.iter().any(|e| !e.is_finite()) || energies.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("energy grid must be finite and sorted".into()));
    }
    Ok(())
}

/// Side length `L` when the agglomerate is the box `{0..L-1}ᵈ`.
pub fn box_length(agg: &Agglomerate) -> Option<usize> {
    let d = agg.lattice().dim() as f64;
    let l = libm::round(libm::pow(agg.cells().len() as f64, 1.0 / d)) as usize;
    (l > 0 && box_set(agg.lattice().dim(), l).iter().eq(agg.cells().iter())).then_some(l)
}

/// `N(E)` for each energy from a spectrum and a normalization volume.
pub fn counting_curve(spectrum: &Spectrum, volume: f64, energies: &[f64]) -> Vec<f64> {
    energies.iter().map(|&e| spectrum.count_below(e) as f64 / volume).collect()
}

pub fn finite_volume_ids(model: &Model, agg: &Agglomerate, config: &RandomConfig, energies: &[f64]) -> Result<IdsCurve> {
    check_energies(energies)?;
    let h = model.assemble(agg, config)?;
    let volume = h.volume();
    let spec = eigensolve(&h, false)?;
    Ok(IdsCurve {
        energies: energies.to_vec(),
        values: counting_curve(&spec, volume, energies),
        stderr: alloc::vec![0.0; energies.len()],
        meta: CurveMeta { box_length: box_length(agg), samples: 1, model: model.kind(), seed: config.seed(), volume },
    })
}

/// Monte-Carlo estimate of `E[N^I(E)]`. Sample `k` uses the configuration
/// stream `derive_seed(seed, k)`, so increasing `n_samples` extends the
/// sample set without changing earlier samples.
pub fn mc_expected_ids(model: &Model, agg: &Agglomerate, energies: &[f64], n_samples: usize, seed: u64) -> Result<IdsCurve> {
    check_energies(energies)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let per_sample = crate::exec::try_map_indexed(n_samples, |k| {
        let cfg = model.sample(agg, seed, k as u64)?;
        let h = model.assemble(agg, &cfg)?;
        let volume = h.volume();
        let spec = eigensolve(&h, false)?;
        Ok::<_, Error>((counting_curve(&spec, volume, energies), volume))
    })?;
    let mut values = Vec::with_capacity(energies.len());
    let mut stderr = Vec::with_capacity(energies.len());
    for j in 0..energies.len() {
        let column: Vec<f64> = per_sample.iter().map(|(c, _)| c[j]).collect();
        let s = sample_stats(&column);
        values.push(s.mean);
        stderr.push(s.stderr);
    }
    let volumes: Vec<f64> = per_sample.iter().map(|(_, v)| *v).collect();
    Ok(IdsCurve {
        energies: energies.to_vec(),
        values,
        stderr,
        meta: CurveMeta {
            box_length: box_length(agg),
            samples: n_samples,
            model: model.kind(),
            seed: Some(seed),
            volume: sample_stats(&volumes).mean,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustionRow {
    pub box_length: usize,
    pub energy: f64,
    pub mean: f64,
    pub stderr: f64,
    /// Bloch IDS reference (periodic models only).
    pub bloch: Option<f64>,
    pub deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustionTable {
    pub rows: Vec<ExhaustionRow>,
    pub curves: Vec<IdsCurve>,
}

/// Expected IDS on boxes of increasing side, with the Bloch IDS reference
/// column for periodic models (computed on `bloch_grid` points per axis).
pub fn exhaustion_study(
    model: &Model,
    lattice: &Lattice,
    lengths: &[usize],
    energies: &[f64],
    n_samples: usize,
    seed: u64,
    bloch_grid: usize,
) -> Result<ExhaustionTable> {
    let boxes = crate::lattice::folner_boxes(lattice, lengths)?;
    let bands = match model {
        Model::Periodic { v_per } => Some(band_structure(lattice, v_per, bloch_grid)?),
        _ => None,
    };
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for (&l, cells) in lengths.iter().zip(&boxes) {
        let agg = lattice.agglomerate(cells)?;
        let curve = mc_expected_ids(model, &agg, energies, n_samples, seed)?;
        for (j, &e) in energies.iter().enumerate() {
            let bloch = bands.as_ref().map(|b| b.bloch_ids(e));
            rows.push(ExhaustionRow {
                box_length: l,
                energy: e,
                mean: curve.values[j],
                stderr: curve.stderr[j],
                bloch,
                deviation: bloch.map(|b| (curve.values[j] - b).abs()),
            });
        }
        curves.push(curve);
    }
    Ok(ExhaustionTable { rows, curves })
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpEntry {
    pub eps: f64,
    /// `max N(E_j) − N(E_i)` over grid pairs with `E_j − E_i ≤ 2ε`.
    pub max_increment: f64,
    /// Sum of the two point standard errors at the maximizing pair.
    pub stderr: f64,
    /// Midpoint of the maximizing pair.
    pub at_energy: f64,
    /// No two grid points are within `2ε` of each other.
    pub resolution_limited: bool,
}

impl JumpEntry {
    /// `max_increment + 2·stderr`.
    pub fn upper(&self) -> f64 {
        self.max_increment + 2.0 * self.stderr
    }
}

/// For each ε, the largest increase of the curve across a window of width
/// 2ε, i.e. `max_E N(E+ε) − N(E−ε)` at grid resolution. A floor that
/// persists as ε shrinks signals a jump of the IDS.
pub fn jump_profile(curve: &IdsCurve, eps_list: &[f64]) -> Result<Vec<JumpEntry>> {
    if eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument("ε list must be positive and strictly decreasing".into()));
    }
    let e = &curve.energies;
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let width = 2.0 * eps * (1.0 + 1e-12);
        let mut best: Option<(f64, f64, f64)> = None;
        for i in 0..e.len() {
            let j = e.partition_point(|&x| x - e[i] <= width) - 1;
            if j <= i {
                continue;
            }
            let inc = curve.values[j] - curve.values[i];
            if best.map_or(true, |(b, _, _)| inc > b) {
                best = Some((inc, curve.stderr[i] + curve.stderr[j], 0.5 * (e[i] + e[j])));
            }
        }
        out.push(match best {
            Some((max_increment, stderr, at_energy)) => {
                JumpEntry { eps, max_increment, stderr, at_energy, resolution_limited: false }
            }
            None => JumpEntry { eps, max_increment: 0.0, stderr: 0.0, at_energy: f64::NAN, resolution_limited: true },
        });
    }
    Ok(out)
}

/// Uniform grid of `count` energies on `[lo, hi]`.
pub fn energy_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::CouplingDistribution;
    use alloc::vec;

    #[test]
    fn chain_three_at_two() {
        let lat = Lattice::builtin("chain").unwrap();
        let agg = lat.box_agglomerate(3).unwrap();
        let model = Model::periodic(&lat);
        let none = RandomConfig::constant(&Default::default(), 0.0);
        let c = finite_volume_ids(&model, &agg, &none, &[2.0, 10.0]).unwrap();
        assert_eq!(c.values, vec![1.0 / 3.0, 1.0]);
        assert_eq!(c.meta.box_length, Some(3));
    }

    #[test]
    fn ram_normalization_identity() {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let agg = lat.box_agglomerate(4).unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let t = 0.4;
        let sites = model.extended_sites(&agg.index_set()).unwrap();
        let base = RandomConfig::constant(&sites, 0.0);
        let shifted = RandomConfig::constant(&sites, t);
        let energies = [0.3, 1.5, 2.5, 5.0];
        let n0 = finite_volume_ids(&model, &agg, &base, &energies).unwrap();
        let scaled: Vec<f64> = energies.iter().map(|e| libm::exp(-t) * e).collect();
        let nt = finite_volume_ids(&model, &agg, &shifted, &scaled).unwrap();
        for (a, b) in nt.values.iter().zip(&n0.values) {
            assert!((a - libm::exp(-t) * b).abs() < 1e-14);
        }
    }

    #[test]
    fn mc_degenerate_and_single_sample() {
        let lat = Lattice::builtin("chain").unwrap();
        let agg = lat.box_agglomerate(6).unwrap();
        let energies = energy_grid(0.0, 5.0, 11);
        let fixed = Model::cell_alloy(&lat, CouplingDistribution::constant(0.5).unwrap()).unwrap();
        let mc = mc_expected_ids(&fixed, &agg, &energies, 5, 3).unwrap();
        let det = finite_volume_ids(&fixed, &agg, &RandomConfig::constant(&agg.index_set(), 0.5), &energies).unwrap();
        assert_eq!(mc.values, det.values);
        assert!(mc.stderr.iter().all(|&s| s == 0.0));

        let random = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let one = mc_expected_ids(&random, &agg, &energies, 1, 9).unwrap();
        let cfg = random.sample(&agg, 9, 0).unwrap();
        assert_eq!(one.values, finite_volume_ids(&random, &agg, &cfg, &energies).unwrap().values);
        assert!(mc_expected_ids(&random, &agg, &energies, 0, 9).is_err());
    }

    #[test]
    fn jump_profile_of_a_step() {
        let curve = IdsCurve {
            energies: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            values: vec![0.0, 0.0, 0.5, 0.5, 0.6],
            stderr: vec![0.0; 5],
            meta: CurveMeta { box_length: None, samples: 1, model: ModelKind::Periodic, seed: None, volume: 1.0 },
        };
        let p = jump_profile(&curve, &[0.1, 0.05, 0.01]).unwrap();
        assert_eq!(p[0].max_increment, 0.5);
        assert_eq!(p[1].max_increment, 0.5);
        assert!(p[2].resolution_limited);
        assert!(jump_profile(&curve, &[0.01, 0.1]).is_err());
    }
}
