//! Wegner statistics: the expected number of eigenvalues in
//! `[E − ε, E + ε]` on a finite box, its scaling in `ε` and in `|I⁺|`, switch
//! functions, and the constant pipeline `(α, q, k, g)` behind the bound
//! `E[Tr P([E−ε, E+ε])] ≤ C ε^{1/p} |I⁺|`.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::model::Model;
use crate::operators::ModelKind;
use crate::spectral::eigensolve;
use crate::ssf::ScanTable;
use crate::stats::{least_squares, sample_stats};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WegnerConstants {
    pub p: f64,
    pub d: usize,
    pub alpha: f64,
    pub q: u32,
    pub k: u32,
}

impl WegnerConstants {
    /// `g(x) = (x + 1)^{−k}`.
    pub fn g(&self, x: f64) -> f64 {
        libm::pow(x + 1.0, -(self.k as f64))
    }
}

/// `α = 1 − 1/p`; `q` the smallest even integer `≥ max{6, d/2 + 2}`; `k` the
/// smallest integer with `k/q ≥ 1/α`. `p = ∞` gives `α = 1`, `k = q`.
pub fn wegner_constants(p: f64, d: usize) -> Result<WegnerConstants> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument("Hölder parameter p must exceed 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let lower = (d as f64 / 2.0 + 2.0).max(6.0);
    let mut q = libm::ceil(lower) as u32;
    if q % 2 == 1 {
        q += 1;
    }
    let (alpha, k) = if p.is_infinite() {
        (1.0, q)
    } else {
        // k ≥ q/α = q·p/(p−1); snap to an integer that rounding pushed past
        let x = q as f64 * p / (p - 1.0);
        let near = libm::round(x);
        let k = if (x - near).abs() <= 1e-9 * x { near } else { libm::ceil(x) };
        (1.0 - 1.0 / p, k as u32)
    };
    Ok(WegnerConstants { p, d, alpha, q, k })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SwitchProfile {
    /// `s(u) = u`, `ρ′ = 1/(2ε)` on the ramp.
    #[default]
    Linear,
    /// `s(u) = 3u² − 2u³`, `sup ρ′ = 3/(4ε)`.
    Smoothstep,
}

/// Monotone switch `ρ = −1` on `(−∞, E−ε]`, `ρ = 0` on `[E+ε, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchFunction {
    pub center: f64,
    pub eps: f64,
    pub profile: SwitchProfile,
}

const SWITCH_SAMPLES: usize = 4001;

impl SwitchFunction {
    /// Builds the switch and checks its invariants on a dense grid:
    /// monotonicity, `sup ρ′ ≤ 1/ε`, the boundary values, and the covering
    /// bound `ρ(x+2ε) − ρ(x−2ε) ≥ χ_{[E−ε, E+ε]}(x)`.
    pub fn new(center: f64, eps: f64, profile: SwitchProfile) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite() && center.is_finite()) {
            return Err(Error::InvalidArgument("switch half-width must be positive and finite".into()));
        }
        let sw = SwitchFunction { center, eps, profile };
        let lo = center - 3.0 * eps;
        let step = 6.0 * eps / (SWITCH_SAMPLES - 1) as f64;
        let mut prev = f64::NEG_INFINITY;
        for i in 0..SWITCH_SAMPLES {
            let x = lo + step * i as f64;
            let r = sw.rho(x);
            if r < prev || sw.rho_prime(x) > 1.0 / eps * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument("switch function fails monotonicity or slope bound".into()));
            }
            if (x - center).abs() <= eps && sw.covering_integral(x) < 1.0 - 1e-12 {
                return Err(Error::InvalidArgument("switch function fails the covering bound".into()));
            }
            prev = r;
        }
        if sw.rho(center - eps) != -1.0 || sw.rho(center + eps) != 0.0 {
            return Err(Error::InvalidArgument("switch function has wrong limits".into()));
        }
        Ok(sw)
    }

    pub fn linear(center: f64, eps: f64) -> Result<Self> {
        Self::new(center, eps, SwitchProfile::Linear)
    }

    /// `ε ∈ (0, 1/2)`, the range the estimate is stated for.
    pub fn in_standard_range(&self) -> bool {
        self.eps < 0.5
    }

    fn unit(&self, x: f64) -> f64 {
        ((x - self.center + self.eps) / (2.0 * self.eps)).clamp(0.0, 1.0)
    }

    pub fn rho(&self, x: f64) -> f64 {
        let u = self.unit(x);
        let s = match self.profile {
            SwitchProfile::Linear => u,
            SwitchProfile::Smoothstep => u * u * (3.0 - 2.0 * u),
        };
        s - 1.0
    }

    pub fn rho_prime(&self, x: f64) -> f64 {
        let t = (x - self.center + self.eps) / (2.0 * self.eps);
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let ds = match self.profile {
            SwitchProfile::Linear => 1.0,
            SwitchProfile::Smoothstep => 6.0 * t * (1.0 - t),
        };
        ds / (2.0 * self.eps)
    }

    /// `∫_{−2ε}^{2ε} ρ′(x + t) dt = ρ(x + 2ε) − ρ(x − 2ε)`.
    pub fn covering_integral(&self, x: f64) -> f64 {
        self.rho(x + 2.0 * self.eps) - self.rho(x - 2.0 * self.eps)
    }

    /// Largest `ρ′` on the ramp.
    pub fn sup_derivative(&self) -> f64 {
        match self.profile {
            SwitchProfile::Linear => 1.0 / (2.0 * self.eps),
            SwitchProfile::Smoothstep => 0.75 / self.eps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WegnerRow {
    pub model: ModelKind,
    pub energy: f64,
    pub eps: f64,
    pub box_length: usize,
    pub n_plus: usize,
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WegnerTable {
    pub rows: Vec<WegnerRow>,
}

impl WegnerTable {
    /// Rows sorted by `(E, L, ε descending)`.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then(a.box_length.cmp(&b.box_length))
                .then(b.eps.total_cmp(&a.eps))
        });
    }

    /// Largest `mean(ε_small) − mean(ε_large) − 2·(se₁ + se₂)` over row pairs
    /// sharing `(E, L)`; positive values break monotonicity in `ε`.
    pub fn monotonicity_excess(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for a in &self.rows {
            for b in &self.rows {
                if a.energy == b.energy && a.box_length == b.box_length && a.eps < b.eps {
                    worst = worst.max(a.mean - b.mean - 2.0 * (a.stderr + b.stderr));
                }
            }
        }
        worst
    }
}

/// Default metric window `[1/a, a]`.
pub const DEFAULT_METRIC_WINDOW: f64 = 2.0;

fn check_metric_window(energy: f64, eps: f64, a: f64) -> Result<()> {
    if !(a > 1.0) {
        return Err(Error::InvalidArgument("metric window parameter a must exceed 1".into()));
    }
    let (lo, hi) = (energy - eps, energy + eps);
    if lo < 1.0 / a || hi > a {
        return Err(Error::ZeroEnergyCaveat { lo, hi, a });
    }
    Ok(())
}

/// Monte-Carlo `E[Tr P_ω^I([E−ε, E+ε])]` on the box of side `box_length`,
/// for every `ε` in `eps_list`. All half-widths share the same samples, so
/// the table is monotone in `ε` sample by sample. `metric_window` is the `a`
/// of `[1/a, a]` and is enforced for metric models only.
pub fn wegner_scan(
    model: &Model,
    lattice: &Lattice,
    box_length: usize,
    energy: f64,
    eps_list: &[f64],
    n_samples: usize,
    seed: u64,
    metric_window: f64,
) -> Result<WegnerTable> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("half-widths must be positive and finite".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    if !energy.is_finite() {
        return Err(Error::NonFinite);
    }
    if model.kind() == ModelKind::Ram {
        for &eps in eps_list {
            check_metric_window(energy, eps, metric_window)?;
        }
    }
    let agg = lattice.box_agglomerate(box_length)?;
    let n_plus = model.extended_sites(&agg.index_set())?.len();
    let counts = crate::exec::try_map_indexed(n_samples, |s| {
        let cfg = model.sample(&agg, seed, s as u64)?;
        let spec = eigensolve(&model.assemble(&agg, &cfg)?, false)?;
        Ok::<_, Error>(eps_list.iter().map(|&e| spec.projection_trace(energy, e) as f64).collect::<Vec<f64>>())
    })?;
    let rows = eps_list
        .iter()
        .enumerate()
        .map(|(j, &eps)| {
            let column: Vec<f64> = counts.iter().map(|c| c[j]).collect();
            let st = sample_stats(&column);
            WegnerRow {
                model: model.kind(),
                energy,
                eps,
                box_length,
                n_plus,
                mean: st.mean,
                stderr: st.stderr,
                samples: n_samples,
                seed,
            }
        })
        .collect();
    Ok(WegnerTable { rows })
}

pub fn wegner_statistic(
    model: &Model,
    lattice: &Lattice,
    box_length: usize,
    energy: f64,
    eps: f64,
    n_samples: usize,
    seed: u64,
    metric_window: f64,
) -> Result<WegnerRow> {
    let mut t = wegner_scan(model, lattice, box_length, energy, &[eps], n_samples, seed, metric_window)?;
    Ok(t.rows.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalingFit {
    /// Slope of `log mean` against `log ε`.
    pub slope: f64,
    pub intercept: f64,
    /// Hölder exponent implied by the slope, capped at 1.
    pub holder_exponent: f64,
    /// The exponent `1/p` of the estimate.
    pub target: f64,
    /// Smallest `C` with `mean ≤ C ε^{1/p} |I⁺|` on every row.
    pub c_fit: f64,
    pub rows: usize,
}

/// Log-log fit of the Wegner means against `ε` at fixed `(E, L)`.
pub fn scaling_fit(rows: &[WegnerRow], p: f64) -> Result<ScalingFit> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument("Hölder parameter p must exceed 1".into()));
    }
    let first = rows.first().ok_or_else(|| Error::InvalidArgument("empty Wegner table".into()))?;
    if rows.iter().any(|r| r.energy != first.energy || r.box_length != first.box_length) {
        return Err(Error::Incompatible("ε-fit needs rows at a single (E, L)".into()));
    }
    let mut eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 4 {
        return Err(Error::InvalidArgument("ε-fit needs at least four distinct half-widths".into()));
    }
    if let Some(r) = rows.iter().find(|r| !(r.mean > 0.0)) {
        return Err(Error::NoWegnerScaling(alloc::format!(
            "mean eigenvalue count vanishes at ε = {}; no ε-decay can be fitted",
            r.eps
        )));
    }
    let xs: Vec<f64> = rows.iter().map(|r| libm::log(r.eps)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| libm::log(r.mean)).collect();
    let fit = least_squares(&xs, &ys).ok_or_else(|| Error::InvalidArgument("degenerate ε grid".into()))?;
    let c_fit = rows
        .iter()
        .map(|r| r.mean / (libm::pow(r.eps, 1.0 / p) * r.n_plus as f64))
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        slope: fit.slope,
        intercept: fit.intercept,
        holder_exponent: fit.slope.min(1.0),
        target: 1.0 / p,
        c_fit,
        rows: rows.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VolumeFit {
    /// Slope of `log mean` against `log |I⁺|`.
    pub slope: f64,
    pub intercept: f64,
    pub box_sizes: usize,
}

/// Log-log fit of the Wegner means against `|I⁺|` at fixed `(E, ε)`.
pub fn volume_scaling(rows: &[WegnerRow]) -> Result<VolumeFit> {
    let first = rows.first().ok_or_else(|| Error::InvalidArgument("empty Wegner table".into()))?;
    if rows.iter().any(|r| r.energy != first.energy || r.eps != first.eps) {
        return Err(Error::Incompatible("volume fit needs rows at a single (E, ε)".into()));
    }
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.n_plus).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument("volume fit needs at least three box sizes".into()));
    }
    if rows.iter().any(|r| !(r.mean > 0.0)) {
        return Err(Error::NoWegnerScaling("mean eigenvalue count vanishes on some box".to_string()));
    }
    let xs: Vec<f64> = rows.iter().map(|r| libm::log(r.n_plus as f64)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| libm::log(r.mean)).collect();
    let fit = least_squares(&xs, &ys).ok_or_else(|| Error::InvalidArgument("degenerate box sizes".into()))?;
    Ok(VolumeFit { slope: fit.slope, intercept: fit.intercept, box_sizes: sizes.len() })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub model: ModelKind,
    pub energy: f64,
    pub constants: WegnerConstants,
    /// Largest effective perturbation norm seen in the scan, standing in for
    /// the uniform bound `C_α`.
    pub c_alpha: f64,
    /// `‖f‖_∞/λ` for potentials, `a‖h‖_BV` for metrics.
    pub density_factor: f64,
    /// `4 C_α^α · density_factor · (E+2)^{α(k+1)} / k^α`, the coefficient of
    /// `ε^{1/p} |I⁺|` in the analytic bound.
    pub analytic_constant: f64,
    /// `C_fit` from a Wegner table; `None` without disorder or data.
    pub empirical_constant: Option<f64>,
}

/// Puts the measured `C_α` into the analytic constant and reports it next to
/// the fitted one. The two are not expected to agree.
pub fn wegner_bound_report(
    model: &Model,
    p: f64,
    dim: usize,
    energy: f64,
    metric_window: f64,
    scan: &ScanTable,
    table: Option<&[WegnerRow]>,
) -> Result<BoundReport> {
    let constants = wegner_constants(p, dim)?;
    if scan.rows.is_empty() {
        return Err(Error::InvalidArgument("bound report needs an effective perturbation scan".into()));
    }
    let c_alpha = scan.rows.iter().map(|r| r.norm).fold(0.0, f64::max);
    let density_factor = match model {
        Model::Rap { potential, distribution, .. } => distribution.sup_norm() / potential.lambda,
        Model::Ram { distribution, .. } => metric_window * distribution.bv_norm(),
        Model::Periodic { .. } => return Err(Error::WrongModel { expected: "random" }),
    };
    let alpha = constants.alpha;
    let k = constants.k as f64;
    let analytic_constant = 4.0 * libm::pow(c_alpha, alpha) * density_factor
        * libm::pow(energy + 2.0, alpha * (k + 1.0))
        / libm::pow(k, alpha);
    let empirical_constant = match table {
        Some(rows) if !rows.is_empty() => {
            let c = rows
                .iter()
                .map(|r| r.mean / (libm::pow(r.eps, 1.0 / p) * r.n_plus as f64))
                .fold(0.0, f64::max);
            (c > 0.0 && c.is_finite()).then_some(c)
        }
        _ => None,
    };
    Ok(BoundReport {
        model: model.kind(),
        energy,
        constants,
        c_alpha,
        density_factor,
        analytic_constant,
        empirical_constant,
    })
}

/// `ε₀, ε₀/2, …` (`count` terms).
pub fn geometric_eps(first: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| first / libm::pow(2.0, i as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::CouplingDistribution;

    #[test]
    fn constants_examples() {
        let c = wegner_constants(2.0, 2).unwrap();
        assert_eq!((c.alpha, c.q, c.k), (0.5, 6, 12));
        let c = wegner_constants(2.0, 10).unwrap();
        assert_eq!((c.q, c.k), (8, 16));
        let c = wegner_constants(3.0, 1).unwrap();
        assert_eq!(c.k, 9);
        let c = wegner_constants(f64::INFINITY, 4).unwrap();
        assert_eq!((c.alpha, c.k), (1.0, c.q));
        assert!(wegner_constants(1.0, 1).is_err());
        assert_eq!(wegner_constants(2.0, 1).unwrap().g(1.0), libm::pow(2.0, -12.0));
    }

    #[test]
    fn switch_profiles() {
        for profile in [SwitchProfile::Linear, SwitchProfile::Smoothstep] {
            let s = SwitchFunction::new(2.0, 0.1, profile).unwrap();
            assert_eq!(s.rho(2.0 - 0.2), -1.0);
            assert_eq!(s.rho(2.0 + 0.2), 0.0);
            assert_eq!(s.covering_integral(2.0), 1.0);
            assert_eq!(s.covering_integral(2.0 + 0.45), 0.0);
            assert!(s.sup_derivative() <= 1.0 / s.eps);
        }
        assert!(SwitchFunction::linear(0.0, 0.0).is_err());
        assert!(!SwitchFunction::linear(0.0, 0.7).unwrap().in_standard_range());
    }

    #[test]
    fn whole_spectrum_window_counts_everything() {
        let lat = Lattice::builtin("chain").unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let row = wegner_statistic(&model, &lat, 6, 2.5, 10.0, 5, 1, DEFAULT_METRIC_WINDOW).unwrap();
        assert_eq!((row.mean, row.stderr), (6.0, 0.0));
    }

    #[test]
    fn flat_band_without_disorder() {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::constant(0.0).unwrap()).unwrap();
        let t = wegner_scan(&model, &lat, 8, 1.0, &geometric_eps(0.2, 4), 3, 0, DEFAULT_METRIC_WINDOW).unwrap();
        assert!(t.rows.iter().all(|r| r.mean == 8.0));
        let fit = scaling_fit(&t.rows, 2.0).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn metric_window_refusal() {
        let lat = Lattice::builtin("chain").unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let err = wegner_scan(&model, &lat, 6, 0.3, &[0.2], 2, 0, 2.0).unwrap_err();
        assert!(matches!(err, Error::ZeroEnergyCaveat { .. }));
        assert!(wegner_scan(&model, &lat, 6, 1.0, &[0.2], 2, 0, 2.0).is_ok());
    }

    fn synthetic(eps: &[f64], f: impl Fn(f64) -> f64) -> Vec<WegnerRow> {
        eps.iter()
            .map(|&e| WegnerRow {
                model: ModelKind::Rap,
                energy: 2.0,
                eps: e,
                box_length: 10,
                n_plus: 10,
                mean: f(e),
                stderr: 0.0,
                samples: 1,
                seed: 0,
            })
            .collect()
    }

    #[test]
    fn synthetic_fits() {
        let eps = geometric_eps(0.2, 4);
        let lin = scaling_fit(&synthetic(&eps, |e| 10.0 * e), 2.0).unwrap();
        assert!((lin.slope - 1.0).abs() < 1e-12);
        let half = scaling_fit(&synthetic(&eps, libm::sqrt), 2.0).unwrap();
        assert!((half.slope - 0.5).abs() < 1e-12);
        assert!((half.c_fit - 0.1).abs() < 1e-12);
        assert!(matches!(scaling_fit(&synthetic(&eps, |_| 0.0), 2.0), Err(Error::NoWegnerScaling(_))));
        assert!(scaling_fit(&synthetic(&eps[..3], |e| e), 2.0).is_err());

        let vol: Vec<WegnerRow> = [4usize, 8, 16]
            .iter()
            .map(|&n| WegnerRow { n_plus: n, box_length: n, mean: 0.3 * n as f64, ..synthetic(&[0.1], |e| e)[0].clone() })
            .collect();
        assert!((volume_scaling(&vol).unwrap().slope - 1.0).abs() < 1e-12);
        assert!(volume_scaling(&vol[..2]).is_err());
    }
}
