//! Coupling-constant distributions and random configurations.
//!
//! Sampling is counter based: the value at a site is a pure function of
//! `(seed, site offset, draw index)`, computed with integer mixing only. Growing
//! the site set therefore never changes values already drawn, and Monte-Carlo
//! samples can be evaluated in any order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{GroupElement, IndexSet};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream key from a parent key and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed ^ 0x5EED_0000_0000_0000).wrapping_add(tag.wrapping_mul(GOLDEN)))
}

fn site_key(seed: u64, site: &GroupElement) -> u64 {
    let mut h = mix64(seed.wrapping_add(site.dim() as u64).wrapping_mul(GOLDEN));
    for &c in site.coords() {
        h = mix64(h ^ (c as u64).wrapping_add(GOLDEN));
    }
    h
}

/// A deterministic stream of 64-bit words: `next = mix(key + counter·φ)`.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        CounterRng { key, counter: 0 }
    }

    pub fn for_site(seed: u64, site: &GroupElement) -> Self {
        Self::new(site_key(seed, site))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller).
    pub fn next_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1]
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    pub fn next_below(&mut self, bound: usize) -> usize {
        (self.next_f64() * bound as f64) as usize % bound.max(1)
    }
}

/// Compactly supported coupling distribution with a bounded density.
///
/// A uniform distribution with `lo == hi` is the degenerate point mass used to
/// switch disorder off; its density norms are infinite.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "DistributionRepr", into = "DistributionRepr")
)]
pub struct CouplingDistribution {
    shape: Shape,
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, std_dev: f64, lo: f64, hi: f64, norm: f64 },
    PiecewiseLinear { knots: Vec<(f64, f64)>, cumulative: Vec<f64> },
}

/// Serialized form: `{"kind":"uniform","lo":0.0,"hi":1.0}`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)
)]
pub enum DistributionRepr {
    Uniform {
        lo: f64,
        hi: f64,
    },
    TruncatedNormal {
        mean: f64,
        std_dev: f64,
        lo: f64,
        hi: f64,
    },
    #[cfg_attr(feature = "serde", serde(rename = "piecewise-linear-density", alias = "piecewise-linear"))]
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl TryFrom<DistributionRepr> for CouplingDistribution {
    type Error = Error;
    fn try_from(r: DistributionRepr) -> Result<Self> {
        match r {
            DistributionRepr::Uniform { lo, hi } => Self::uniform(lo, hi),
            DistributionRepr::TruncatedNormal { mean, std_dev, lo, hi } => {
                Self::truncated_normal(mean, std_dev, lo, hi)
            }
            DistributionRepr::PiecewiseLinear { knots } => Self::piecewise_linear(knots),
        }
    }
}

impl From<CouplingDistribution> for DistributionRepr {
    fn from(d: CouplingDistribution) -> Self {
        match d.shape {
            Shape::Uniform { lo, hi } => DistributionRepr::Uniform { lo, hi },
            Shape::TruncatedNormal { mean, std_dev, lo, hi, .. } => {
                DistributionRepr::TruncatedNormal { mean, std_dev, lo, hi }
            }
            Shape::PiecewiseLinear { knots, .. } => DistributionRepr::PiecewiseLinear { knots },
        }
    }
}

// `core::fmt::Display` is needed by serde's `try_from`.
impl core::fmt::Display for DistributionRepr {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{self:?}")
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidDistribution(format!("support [{lo}, {hi}] is not a compact interval")));
    }
    Ok(())
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// Composite Simpson rule with `panels` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (hi - lo) / panels as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

impl CouplingDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        Ok(CouplingDistribution { shape: Shape::Uniform { lo, hi } })
    }

    /// Point mass at `value` (zero-width uniform): no disorder.
    pub fn constant(value: f64) -> Result<Self> {
        Self::uniform(value, value)
    }

    pub fn truncated_normal(mean: f64, std_dev: f64, lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        if !(std_dev > 0.0 && std_dev.is_finite() && mean.is_finite()) || lo == hi {
            return Err(Error::InvalidDistribution("truncated normal needs std_dev > 0 and lo < hi".into()));
        }
        let norm = std_normal_cdf((hi - mean) / std_dev) - std_normal_cdf((lo - mean) / std_dev);
        if norm <= 0.0 {
            return Err(Error::InvalidDistribution("truncation window carries no normal mass".into()));
        }
        let d = CouplingDistribution { shape: Shape::TruncatedNormal { mean, std_dev, lo, hi, norm } };
        d.check_normalization(simpson(|x| d.density(x), lo, hi, 8192))?;
        Ok(d)
    }

    /// Density given by linear interpolation between `(x, f(x))` knots and
    /// zero outside `[x_first, x_last]`.
    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidDistribution("piecewise-linear density needs at least two knots".into()));
        }
        if knots.iter().any(|&(x, f)| !x.is_finite() || !f.is_finite() || f < 0.0) {
            return Err(Error::InvalidDistribution("knots must be finite with nonnegative density".into()));
        }
        if knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidDistribution("knot abscissae must be strictly increasing".into()));
        }
        let mut cumulative = Vec::with_capacity(knots.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in knots.windows(2) {
            acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
            cumulative.push(acc);
        }
        let d = CouplingDistribution { shape: Shape::PiecewiseLinear { knots, cumulative } };
        d.check_normalization(acc)?;
        Ok(d)
    }

    fn check_normalization(&self, mass: f64) -> Result<()> {
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("density integrates to {mass}, not 1")));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Uniform { lo, hi } | Shape::TruncatedNormal { lo, hi, .. } => (*lo, *hi),
            Shape::PiecewiseLinear { knots, .. } => (knots[0].0, knots[knots.len() - 1].0),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.support();
        lo == hi
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        lo <= x && x <= hi
    }

    /// Density value; infinite at the atom of a degenerate distribution.
    pub fn density(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return 0.0;
        }
        match &self.shape {
            Shape::Uniform { lo, hi } => {
                if lo == hi {
                    f64::INFINITY
                } else {
                    1.0 / (hi - lo)
                }
            }
            Shape::TruncatedNormal { mean, std_dev, norm, .. } => {
                std_normal_pdf((x - mean) / std_dev) / (std_dev * norm)
            }
            Shape::PiecewiseLinear { knots, .. } => {
                let k = knots.partition_point(|&(kx, _)| kx <= x).clamp(1, knots.len() - 1);
                let ((x0, f0), (x1, f1)) = (knots[k - 1], knots[k]);
                f0 + (f1 - f0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// `‖f‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            Shape::Uniform { .. } => self.density(self.support().0),
            Shape::TruncatedNormal { mean, lo, hi, .. } => self.density(mean.clamp(*lo, *hi)),
            Shape::PiecewiseLinear { knots, .. } => knots.iter().map(|k| k.1).fold(0.0, f64::max),
        }
    }

    /// Total variation of the density on ℝ, including the jumps at the ends
    /// of the support.
    pub fn bv_norm(&self) -> f64 {
        match &self.shape {
            Shape::Uniform { .. } => 2.0 * self.sup_norm(),
            Shape::TruncatedNormal { mean, lo, hi, .. } => {
                let peak = mean.clamp(*lo, *hi);
                let (fl, fp, fh) = (self.density(*lo), self.density(peak), self.density(*hi));
                fl + (fp - fl) + (fp - fh) + fh
            }
            Shape::PiecewiseLinear { knots, .. } => {
                let inner: f64 = knots.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum();
                knots[0].1 + inner + knots[knots.len() - 1].1
            }
        }
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        match &self.shape {
            Shape::Uniform { .. } => 0.5 * (lo + hi),
            _ => simpson(|x| x * self.density(x), lo, hi, 8192),
        }
    }

    /// Draws one value from the stream.
    pub fn sample(&self, rng: &mut CounterRng) -> f64 {
        match &self.shape {
            Shape::Uniform { lo, hi } => lo + (hi - lo) * rng.next_f64(),
            Shape::TruncatedNormal { mean, std_dev, lo, hi, norm } => {
                // Pick whichever rejection scheme accepts more often.
                let uniform_rate = 1.0 / ((hi - lo) * self.sup_norm());
                loop {
                    if *norm >= uniform_rate {
                        let x = mean + std_dev * rng.next_normal();
                        if *lo <= x && x <= *hi {
                            return x;
                        }
                    } else {
                        let x = lo + (hi - lo) * rng.next_f64();
                        if rng.next_f64() * self.sup_norm() <= self.density(x) {
                            return x;
                        }
                    }
                }
            }
            Shape::PiecewiseLinear { knots, cumulative } => {
                let target = rng.next_f64() * cumulative[cumulative.len() - 1];
                let k = cumulative.partition_point(|&c| c <= target).clamp(1, knots.len() - 1);
                let ((x0, f0), (x1, f1)) = (knots[k - 1], knots[k]);
                let h = x1 - x0;
                let m = target - cumulative[k - 1];
                let a = (f1 - f0) / (2.0 * h);
                // Solve f0·t + a·t² = m for t ∈ [0, h] in the cancellation-free form.
                let disc = libm::sqrt((f0 * f0 + 4.0 * a * m).max(0.0));
                let t = if f0 + disc > 0.0 { 2.0 * m / (f0 + disc) } else { 0.0 };
                x0 + t.clamp(0.0, h)
            }
        }
    }
}

/// Coupling constants `γ ↦ q_γ` (or `r_γ`) on a finite set of sites.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RandomConfig {
    values: BTreeMap<GroupElement, f64>,
    seed: Option<u64>,
}

impl RandomConfig {
    pub fn from_values(values: BTreeMap<GroupElement, f64>) -> Self {
        RandomConfig { values, seed: None }
    }

    pub fn constant(sites: &IndexSet, value: f64) -> Self {
        Self::from_values(sites.iter().map(|g| (g.clone(), value)).collect())
    }

    pub fn get(&self, site: &GroupElement) -> Option<f64> {
        self.values.get(site).copied()
    }

    pub fn values(&self) -> &BTreeMap<GroupElement, f64> {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Adds `t` to every coupling.
    pub fn offset_all(&self, t: f64) -> RandomConfig {
        RandomConfig {
            values: self.values.iter().map(|(g, v)| (g.clone(), v + t)).collect(),
            seed: self.seed,
        }
    }
}

/// I.i.d. draws, one per site, each a function of `(seed, site)` only.
pub fn sample_config(dist: &CouplingDistribution, sites: &IndexSet, seed: u64) -> RandomConfig {
    let values = sites
        .iter()
        .map(|g| {
            let mut rng = CounterRng::for_site(seed, g);
            (g.clone(), dist.sample(&mut rng))
        })
        .collect();
    RandomConfig { values, seed: Some(seed) }
}

/// `(γ·ω)_β = ω_{β−γ}`.
pub fn shift_config(config: &RandomConfig, by: &GroupElement) -> RandomConfig {
    RandomConfig {
        values: config.values.iter().map(|(g, v)| (g + by, *v)).collect(),
        seed: config.seed,
    }
}

/// `θ_γ^s(ω)`: `ω` with the coupling at `site` replaced by `value`.
///
/// Values outside the distribution support are accepted; the extremal
/// couplings used for spectral shift pairs sit on the boundary of the support.
pub fn substitute(config: &RandomConfig, site: &GroupElement, value: f64) -> RandomConfig {
    let mut out = config.clone();
    out.values.insert(site.clone(), value);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sites(n: i64) -> IndexSet {
        (0..n).map(|i| GroupElement::from([i])).collect()
    }

    #[test]
    fn sampling_is_splittable() {
        let d = CouplingDistribution::uniform(0.0, 1.0).unwrap();
        let a = sample_config(&d, &sites(3), 7);
        let b = sample_config(&d, &sites(4), 7);
        assert_eq!(a.len(), 3);
        for (g, v) in a.values() {
            assert!((0.0..=1.0).contains(v));
            assert_eq!(b.get(g), Some(*v));
        }
        assert_eq!(a, sample_config(&d, &sites(3), 7));
        assert_ne!(a, sample_config(&d, &sites(3), 8));
    }

    #[test]
    fn uniform_mean_law_of_large_numbers() {
        let d = CouplingDistribution::uniform(0.0, 1.0).unwrap();
        let c = sample_config(&d, &sites(100_000), 2024);
        let mean = c.values().values().sum::<f64>() / 1e5;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn shift_and_substitute() {
        let mut m = BTreeMap::new();
        m.insert(GroupElement::from([0]), 0.25);
        m.insert(GroupElement::from([1]), 0.75);
        let w = RandomConfig::from_values(m);
        let s = shift_config(&w, &GroupElement::from([1]));
        assert_eq!(s.get(&GroupElement::from([1])), Some(0.25));
        assert_eq!(s.get(&GroupElement::from([2])), Some(0.75));
        assert_eq!(shift_config(&w, &GroupElement::from([0])), w);
        assert_eq!(shift_config(&s, &GroupElement::from([-1])), w);

        let g0 = GroupElement::from([0]);
        let g1 = GroupElement::from([1]);
        assert_eq!(substitute(&w, &g0, 0.25), w);
        assert_eq!(substitute(&w, &g0, 0.0).get(&g0), Some(0.0));
        let ab = substitute(&substitute(&w, &g0, 0.1), &g1, 0.2);
        let ba = substitute(&substitute(&w, &g1, 0.2), &g0, 0.1);
        assert_eq!(ab, ba);
    }

    #[test]
    fn distribution_validation() {
        assert!(CouplingDistribution::uniform(1.0, 0.0).is_err());
        assert!(CouplingDistribution::uniform(0.0, f64::INFINITY).is_err());
        assert!(CouplingDistribution::piecewise_linear(vec![(0.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(CouplingDistribution::piecewise_linear(vec![(0.0, 1.0), (0.0, 1.0)]).is_err());
        assert!(CouplingDistribution::truncated_normal(0.0, 0.0, -1.0, 1.0).is_err());
        let d = CouplingDistribution::constant(0.5).unwrap();
        assert!(d.is_degenerate());
        let mut rng = CounterRng::new(1);
        assert_eq!(d.sample(&mut rng), 0.5);
    }

    #[test]
    fn norms() {
        let u = CouplingDistribution::uniform(-0.5, 0.5).unwrap();
        assert_eq!(u.sup_norm(), 1.0);
        assert_eq!(u.bv_norm(), 2.0);
        // Tent density on [0, 2] with peak 1 at x = 1.
        let tent = CouplingDistribution::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_eq!(tent.sup_norm(), 1.0);
        assert_eq!(tent.bv_norm(), 2.0);
        assert_eq!(tent.density(0.5), 0.5);
        // Step-free ramp with end jumps: f = x on [0, sqrt 2].
        let s2 = core::f64::consts::SQRT_2;
        let ramp = CouplingDistribution::piecewise_linear(vec![(0.0, 0.0), (s2, s2)]).unwrap();
        assert!((ramp.bv_norm() - 2.0 * s2).abs() < 1e-15);
        let tn = CouplingDistribution::truncated_normal(0.0, 1.0, -1.0, 1.0).unwrap();
        let z = std_normal_cdf(1.0) - std_normal_cdf(-1.0);
        assert!((tn.sup_norm() - std_normal_pdf(0.0) / z).abs() < 1e-14);
        // two end jumps plus rise to the peak and back
        assert!((tn.bv_norm() - 2.0 * tn.sup_norm()).abs() < 1e-14);
    }

    #[test]
    fn piecewise_and_truncated_sampling_moments() {
        let tent = CouplingDistribution::piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        let tn = CouplingDistribution::truncated_normal(0.3, 0.2, 0.0, 1.0).unwrap();
        for d in [tent, tn] {
            let c = sample_config(&d, &sites(50_000), 99);
            let (lo, hi) = d.support();
            assert!(c.values().values().all(|v| (lo..=hi).contains(v)));
            let mean = c.values().values().sum::<f64>() / 5e4;
            assert!((mean - d.mean()).abs() < 0.01, "{mean} vs {}", d.mean());
        }
    }
}
