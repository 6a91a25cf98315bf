//! Spectral shift functions of finite pairs, Krein's trace identity, the
//! invariance principle, Schatten quasi-norms and the effective perturbation
//! `g(H₂) − g(H₁)`.
//!
//! Convention: `ξ(E; H₂, H₁) = N_{H₁}(E) − N_{H₂}(E)` with strict counting
//! `N_H(E) = #{E_i < E}`, so `Tr φ(H₂) − Tr φ(H₁) = ∫ φ′ ξ` without a sign
//! correction. The counting functions are left-continuous, hence `ξ` is
//! constant on the half-open intervals `(b_i, b_{i+1}]`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::lattice::{Agglomerate, GroupElement, Lattice};
use crate::model::Model;
use crate::operators::{s_transform, symmetrize, Hamiltonian};
use crate::random::{derive_seed, substitute, CounterRng, RandomConfig};
use crate::spectral::symmetric_eigenvalues;
use crate::stats::{least_squares, pairwise_sum, sample_stats};
use crate::wegner::{wegner_constants, WegnerConstants};

/// Integer step function, zero outside `(b_0, b_m]`, equal to `values[i]` on
/// `(breakpoints[i], breakpoints[i+1]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepFunction {
    pub breakpoints: Vec<f64>,
    pub values: Vec<i64>,
}

impl StepFunction {
    pub fn zero() -> Self {
        StepFunction { breakpoints: Vec::new(), values: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    pub fn eval(&self, x: f64) -> i64 {
        // first breakpoint ≥ x closes the interval containing x
        let j = self.breakpoints.partition_point(|&b| b < x);
        if j == 0 || j == self.breakpoints.len() + 1 || j > self.values.len() {
            return 0;
        }
        self.values[j - 1]
    }

    pub fn max_abs(&self) -> i64 {
        self.values.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// `∫ |ξ|^s`.
    pub fn integral_abs_pow(&self, s: f64) -> f64 {
        let parts: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(i, v)| libm::pow(v.unsigned_abs() as f64, s) * (self.breakpoints[i + 1] - self.breakpoints[i]))
            .collect();
        pairwise_sum(&parts)
    }

    /// `∫ φ′ ξ`, exact given `φ` (an antiderivative of the integrand).
    pub fn integrate_derivative(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let parts: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(i, &v)| v as f64 * (phi(self.breakpoints[i + 1]) - phi(self.breakpoints[i])))
            .collect();
        pairwise_sum(&parts)
    }
}

/// `ξ(·; H₂, H₁)` from the two sorted spectra.
pub fn ssf_from_eigenvalues(e1: &[f64], e2: &[f64]) -> Result<StepFunction> {
    if e1.len() != e2.len() {
        return Err(Error::DimensionMismatch { expected: e1.len(), found: e2.len() });
    }
    let mut bps: Vec<f64> = e1.iter().chain(e2).copied().collect();
    if bps.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let at_most = |e: &[f64], x: f64| e.partition_point(|&y| y <= x) as i64;
    let raw: Vec<i64> = bps.windows(2).map(|w| at_most(e1, w[0]) - at_most(e2, w[0])).collect();
    // merge runs of equal value
    let mut breakpoints = Vec::new();
    let mut values: Vec<i64> = Vec::new();
    for (i, &v) in raw.iter().enumerate() {
        if values.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = bps[i + 1];
        } else {
            if breakpoints.is_empty() {
                breakpoints.push(bps[i]);
            }
            breakpoints.push(bps[i + 1]);
            values.push(v);
        }
    }
    while values.last() == Some(&0) {
        values.pop();
        breakpoints.pop();
    }
    while values.first() == Some(&0) {
        values.remove(0);
        breakpoints.remove(0);
    }
    if values.is_empty() {
        return Ok(StepFunction::zero());
    }
    Ok(StepFunction { breakpoints, values })
}

fn check_pair(h1: &Hamiltonian, h2: &Hamiltonian) -> Result<()> {
    if h1.dim() != h2.dim() {
        return Err(Error::DimensionMismatch { expected: h1.dim(), found: h2.dim() });
    }
    let scale = h1.measure().amax().max(1.0);
    if (h1.measure() - h2.measure()).amax() > 1e-12 * scale {
        return Err(Error::Incompatible("operators act on different vertex measures".into()));
    }
    Ok(())
}

pub fn counting_ssf(h1: &Hamiltonian, h2: &Hamiltonian) -> Result<StepFunction> {
    check_pair(h1, h2)?;
    ssf_from_eigenvalues(&symmetric_eigenvalues(&symmetrize(h1))?, &symmetric_eigenvalues(&symmetrize(h2))?)
}

/// `(B + 1)^{−k}` for symmetric `B > −1`.
pub fn resolvent_power(b: &DMatrix<f64>, k: u32) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let shifted = b + DMatrix::identity(n, n);
    let chol = Cholesky::new(shifted)
        .ok_or_else(|| Error::DomainTooSmall("(x+1)^-k needs the spectrum to lie above -1".into()))?;
    let r = chol.inverse();
    let mut result = DMatrix::identity(n, n);
    let mut base = r;
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    Ok((&result + result.transpose()) * 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    /// `Σ c_i xⁱ`, coefficients in ascending order.
    Polynomial(Vec<f64>),
    /// `(x + 1)^{−k}`.
    ResolventPower(u32),
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            TestFunction::ResolventPower(k) => libm::pow(x + 1.0, -(*k as f64)),
        }
    }

    /// `Tr φ(H)` through matrix arithmetic (no eigenvalues).
    pub fn trace(&self, h: &Hamiltonian) -> Result<f64> {
        let b = symmetrize(h);
        let n = b.nrows();
        Ok(match self {
            TestFunction::Polynomial(c) => {
                let mut p = DMatrix::<f64>::zeros(n, n);
                for &ci in c.iter().rev() {
                    p = &p * &b;
                    for i in 0..n {
                        p[(i, i)] += ci;
                    }
                }
                p.trace()
            }
            TestFunction::ResolventPower(k) => resolvent_power(&b, *k)?.trace(),
        })
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::Polynomial(c) => alloc::format!("polynomial{c:?}"),
            TestFunction::ResolventPower(k) => alloc::format!("(x+1)^-{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KreinReport {
    pub trace_difference: f64,
    pub ssf_integral: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `Tr φ(H₂) − Tr φ(H₁)` (matrix functions) with `∫ φ′ ξ` (step
/// function from the two spectra).
pub fn krein_check(h1: &Hamiltonian, h2: &Hamiltonian, phi: &TestFunction) -> Result<KreinReport> {
    check_pair(h1, h2)?;
    let t1 = phi.trace(h1)?;
    let t2 = phi.trace(h2)?;
    let xi = counting_ssf(h1, h2)?;
    let trace_difference = t2 - t1;
    let ssf_integral = xi.integrate_derivative(|x| phi.eval(x));
    let residual = (trace_difference - ssf_integral).abs();
    let tolerance = 1e-9 * (1.0 + t2.abs());
    Ok(KreinReport { trace_difference, ssf_integral, residual, tolerance, passed: residual <= tolerance })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub energy: f64,
    pub g_energy: f64,
    pub xi: i64,
    pub xi_g: i64,
    pub moduli_agree: bool,
    pub sign_flipped: bool,
}

/// `ξ(g(E); g(H₂), g(H₁))` against `ξ(E; H₂, H₁)` for `g(x) = (x+1)^{−k}`.
/// `g(H)` is formed as a matrix and diagonalized on its own.
pub fn invariance_principle_check(h1: &Hamiltonian, h2: &Hamiltonian, k: u32, energy: f64) -> Result<InvarianceReport> {
    check_pair(h1, h2)?;
    let b1 = symmetrize(h1);
    let b2 = symmetrize(h2);
    let e1 = symmetric_eigenvalues(&b1)?;
    let e2 = symmetric_eigenvalues(&b2)?;
    let nearest = e1.iter().chain(&e2).map(|e| (e - energy).abs()).fold(f64::INFINITY, f64::min);
    if nearest < 1e-10 {
        return Err(Error::NearEigenvalue { energy, distance: nearest });
    }
    let g1 = symmetric_eigenvalues(&resolvent_power(&b1, k)?)?;
    let g2 = symmetric_eigenvalues(&resolvent_power(&b2, k)?)?;
    let g = TestFunction::ResolventPower(k);
    let g_energy = g.eval(energy);
    // the image gap must stay above the rounding level of g(H)
    let g_nearest = g1.iter().chain(&g2).map(|e| (e - g_energy).abs()).fold(f64::INFINITY, f64::min);
    if g_nearest < 64.0 * f64::EPSILON {
        return Err(Error::NearEigenvalue { energy, distance: nearest });
    }
    let xi = ssf_from_eigenvalues(&e1, &e2)?.eval(energy);
    let xi_g = ssf_from_eigenvalues(&g1, &g2)?.eval(g_energy);
    Ok(InvarianceReport {
        energy,
        g_energy,
        xi,
        xi_g,
        moduli_agree: xi.abs() == xi_g.abs(),
        sign_flipped: xi_g == -xi,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchattenReport {
    pub alpha: f64,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub value: f64,
}

/// Singular values, nonincreasing. Computed as the nonnegative eigenvalues
/// of the symmetric embedding `[[0, A], [Aᵀ, 0]]`, which keeps small
/// singular values accurate to the level of `ε‖A‖`. Values at or below that
/// level are set to zero: for `α < 1` their powers `μᵅ` would otherwise turn
/// rounding noise into a visible contribution.
pub fn singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (r, c) = a.shape();
    let n = r + c;
    if r == 0 || c == 0 {
        return Ok(Vec::new());
    }
    let mut emb = DMatrix::zeros(n, n);
    emb.view_mut((0, r), (r, c)).copy_from(a);
    emb.view_mut((r, 0), (c, r)).copy_from(&a.transpose());
    let ev = symmetric_eigenvalues(&emb)?;
    let top = ev.last().copied().unwrap_or(0.0).max(0.0);
    let floor = 4.0 * n as f64 * f64::EPSILON * top;
    Ok(ev.iter().rev().take(r.min(c)).map(|&s| if s > floor { s } else { 0.0 }).collect())
}

fn quasinorm_from(sv: &[f64], alpha: f64) -> f64 {
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0.0;
    }
    // scaled to avoid under/overflow for small α
    let parts: Vec<f64> = sv.iter().map(|s| libm::pow(s / top, alpha)).collect();
    top * libm::pow(pairwise_sum(&parts), 1.0 / alpha)
}

/// `‖A‖_{J_α} = (Σ μ_nᵅ)^{1/α}`.
pub fn schatten_quasinorm(a: &DMatrix<f64>, alpha: f64) -> Result<SchattenReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("Schatten exponent must be positive".into()));
    }
    let sv = singular_values(a)?;
    let value = quasinorm_from(&sv, alpha);
    Ok(SchattenReport { alpha, singular_values: sv, value })
}

pub fn operator_norm(a: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyTally {
    pub name: &'static str,
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen (or relative defect for equalities).
    pub worst: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchattenLedger {
    pub properties: Vec<PropertyTally>,
}

impl SchattenLedger {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.violations == 0 && p.checks > 0)
    }

    pub fn violations(&self) -> usize {
        self.properties.iter().map(|p| p.violations).sum()
    }
}

pub const SCHATTEN_REL_TOL: f64 = 1e-9;
const SUITE_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

fn gaussian_matrix(rng: &mut CounterRng, n: usize, rank: usize) -> DMatrix<f64> {
    if rank >= n {
        return DMatrix::from_fn(n, n, |_, _| rng.next_normal());
    }
    let left = DMatrix::from_fn(n, rank, |_, _| rng.next_normal());
    let right = DMatrix::from_fn(rank, n, |_, _| rng.next_normal());
    left * right
}

struct Tally {
    inner: PropertyTally,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally { inner: PropertyTally { name, checks: 0, violations: 0, worst: 0.0 } }
    }

    fn le(&mut self, lhs: f64, rhs: f64) {
        self.inner.checks += 1;
        if rhs > 0.0 {
            self.inner.worst = self.inner.worst.max(lhs / rhs);
        }
        if lhs > rhs * (1.0 + SCHATTEN_REL_TOL) + 1e-300 {
            self.inner.violations += 1;
        }
    }

    fn eq(&mut self, lhs: f64, rhs: f64) {
        self.inner.checks += 1;
        let rel = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
        self.inner.worst = self.inner.worst.max(rel);
        if rel > SCHATTEN_REL_TOL {
            self.inner.violations += 1;
        }
    }
}

/// Randomized check of the quasi-norm calculus on `n × n` Gaussian matrices.
/// Every fourth trial uses low-rank factors so that rank-deficient operators
/// are exercised too.
pub fn schatten_property_suite(n: usize, trials: usize, seed: u64) -> Result<SchattenLedger> {
    if n == 0 || n > 32 {
        return Err(Error::InvalidArgument("suite dimension must be in 1..=32".into()));
    }
    let results = crate::exec::try_map_indexed(trials, |t| {
        let mut rng = CounterRng::new(derive_seed(seed, t as u64));
        let rank = if t % 4 == 3 { 1 + rng.next_below(n) } else { n };
        let a = gaussian_matrix(&mut rng, n, rank);
        let b = gaussian_matrix(&mut rng, n, n);
        let c = 4.0 * rng.next_normal();
        let sa = singular_values(&a)?;
        let sb = singular_values(&b)?;
        let s_sum = singular_values(&(&a + &b))?;
        let s_ab = singular_values(&(&a * &b))?;
        let s_ba = singular_values(&(&b * &a))?;
        let s_ca = singular_values(&(&a * c))?;
        let nb_op = sb[0];
        let q = |s: &[f64], al: f64| quasinorm_from(s, al);

        let mut tallies = [
            Tally::new("homogeneity"),
            Tally::new("quasi-triangle"),
            Tally::new("triangle"),
            Tally::new("holder"),
            Tally::new("ideal-left"),
            Tally::new("ideal-right"),
            Tally::new("monotonicity"),
            Tally::new("dominates-operator-norm"),
        ];
        for &al in &SUITE_ALPHAS {
            let na = q(&sa, al);
            let nb = q(&sb, al);
            tallies[0].eq(q(&s_ca, al), c.abs() * na);
            if al <= 1.0 {
                tallies[1].le(libm::pow(q(&s_sum, al), al), libm::pow(na, al) + libm::pow(nb, al));
            }
            if al >= 1.0 {
                tallies[2].le(q(&s_sum, al), na + nb);
            }
            for &be in &SUITE_ALPHAS {
                let ga = 1.0 / (1.0 / al + 1.0 / be);
                tallies[3].le(q(&s_ab, ga), na * q(&sb, be));
                if al < be {
                    tallies[6].le(q(&sa, be), na);
                }
            }
            tallies[4].le(q(&s_ab, al), na * nb_op);
            tallies[5].le(q(&s_ba, al), nb_op * na);
            tallies[7].le(sa[0], na);
        }
        Ok::<_, Error>(tallies.map(|t| t.inner))
    })?;
    let mut properties: Vec<PropertyTally> = Vec::new();
    for row in results {
        for (i, p) in row.into_iter().enumerate() {
            match properties.get_mut(i) {
                Some(acc) => {
                    acc.checks += p.checks;
                    acc.violations += p.violations;
                    acc.worst = acc.worst.max(p.worst);
                }
                None => properties.push(p),
            }
        }
    }
    Ok(SchattenLedger { properties })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperboundReport {
    pub constants: WegnerConstants,
    /// `‖g(H₂) − g(H₁)‖_{J_α}`.
    pub norm: f64,
    /// `(∫ |ξ(·; g(H₂), g(H₁))|^{1/α})^α`.
    pub lhs: f64,
    /// `‖g(H₂) − g(H₁)‖_{J_α}^α`.
    pub rhs: f64,
    pub holds: bool,
}

/// Bound of the SSF of `g(H₂), g(H₁)` by the effective perturbation, with
/// `α, k, g` the Wegner constants for `(p, d)`.
pub fn superbound_check(h1: &Hamiltonian, h2: &Hamiltonian, p: f64, d: usize) -> Result<SuperboundReport> {
    check_pair(h1, h2)?;
    let constants = wegner_constants(p, d)?;
    let b1 = symmetrize(h1);
    let b2 = symmetrize(h2);
    let g1 = resolvent_power(&b1, constants.k)?;
    let g2 = resolvent_power(&b2, constants.k)?;
    let g = |x: f64| constants.g(x);
    let mut ge1: Vec<f64> = symmetric_eigenvalues(&b1)?.into_iter().map(g).collect();
    let mut ge2: Vec<f64> = symmetric_eigenvalues(&b2)?.into_iter().map(g).collect();
    ge1.sort_by(f64::total_cmp);
    ge2.sort_by(f64::total_cmp);
    let xi = ssf_from_eigenvalues(&ge1, &ge2)?;
    let alpha = constants.alpha;
    let lhs = libm::pow(xi.integral_abs_pow(1.0 / alpha), alpha);
    let norm = schatten_quasinorm(&(g2 - g1), alpha)?.value;
    let rhs = libm::pow(norm, alpha);
    Ok(SuperboundReport { constants, norm, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-9) + 1e-300 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub box_length: usize,
    pub sample: usize,
    pub gamma: GroupElement,
    pub norm: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanTable {
    pub alpha: f64,
    pub rows: Vec<ScanRow>,
    /// Slope of `log mean norm` against `log |I|`; `None` when every norm
    /// vanishes or fewer than two box sizes are present.
    pub slope: Option<f64>,
}

/// The operator pair attached to site `γ` of configuration `ω`, both acting
/// on the same weighted space: extremal couplings `q_∓` for potentials;
/// `θ_γ^0(ω)` conjugated by `S` against `θ_γ^s(ω)` for metrics.
pub fn perturbation_pair(
    model: &Model,
    agg: &Agglomerate,
    config: &RandomConfig,
    gamma: &GroupElement,
    s: f64,
) -> Result<(Hamiltonian, Hamiltonian)> {
    let dist = model.distribution().ok_or(Error::WrongModel { expected: "random" })?;
    let (lo, hi) = dist.support();
    match model {
        Model::Rap { .. } => {
            let h1 = model.assemble(agg, &substitute(config, gamma, lo))?;
            let h2 = model.assemble(agg, &substitute(config, gamma, hi))?;
            Ok((h1, h2))
        }
        Model::Ram { .. } => {
            let h1 = model.assemble(agg, &substitute(config, gamma, 0.0))?;
            let h2 = model.assemble(agg, &substitute(config, gamma, s))?;
            let st = s_transform(h1.measure().as_slice(), h2.measure().as_slice())?;
            Ok((st.conjugate(&h1)?, h2))
        }
        Model::Periodic { .. } => Err(Error::WrongModel { expected: "random" }),
    }
}

const RAM_SUPPORT_PROBES: usize = 5;

/// Effective perturbation norms over boxes and samples. Each sample draws
/// `ω` and a uniformly random `γ ∈ I⁺`.
pub fn effective_perturbation_scan(
    model: &Model,
    lattice: &Lattice,
    p: f64,
    lengths: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<ScanTable> {
    let constants = wegner_constants(p, lattice.dim())?;
    let dist = model.distribution().ok_or(Error::WrongModel { expected: "random" })?.clone();
    let boxes = crate::lattice::folner_boxes(lattice, lengths)?;
    let mut rows = Vec::new();
    let mut logs = (Vec::new(), Vec::new());
    for (bi, (&l, cells)) in lengths.iter().zip(&boxes).enumerate() {
        let agg = lattice.agglomerate(cells)?;
        let sites: Vec<GroupElement> = model.extended_sites(cells)?.into_iter().collect();
        let box_seed = derive_seed(seed, bi as u64);
        let batch = crate::exec::try_map_indexed(n_samples, |k| {
            let cfg = model.sample(&agg, box_seed, k as u64)?;
            let mut rng = CounterRng::new(derive_seed(box_seed ^ 0x5ca1_ab1e, k as u64));
            let gamma = sites[rng.next_below(sites.len())].clone();
            let candidates: Vec<f64> = match model {
                Model::Ram { .. } => {
                    // s̃ maximizes over the support; probed on a uniform grid
                    let (lo, hi) = dist.support();
                    (0..RAM_SUPPORT_PROBES).map(|i| lo + (hi - lo) * i as f64 / (RAM_SUPPORT_PROBES - 1) as f64).collect()
                }
                _ => alloc::vec![0.0],
            };
            let mut best: Option<SuperboundReport> = None;
            for s in candidates {
                let (h1, h2) = perturbation_pair(model, &agg, &cfg, &gamma, s)?;
                let rep = superbound_check(&h1, &h2, p, lattice.dim())?;
                if best.as_ref().map_or(true, |b| rep.norm > b.norm) {
                    best = Some(rep);
                }
            }
            let rep = best.unwrap();
            Ok::<_, Error>(ScanRow { box_length: l, sample: k, gamma, norm: rep.norm, lhs: rep.lhs, rhs: rep.rhs })
        })?;
        let norms: Vec<f64> = batch.iter().map(|r| r.norm).collect();
        let mean = sample_stats(&norms).mean;
        if mean > 0.0 {
            logs.0.push(libm::log(cells.len() as f64));
            logs.1.push(libm::log(mean));
        }
        rows.extend(batch);
    }
    let slope = least_squares(&logs.0, &logs.1).map(|f| f.slope);
    Ok(ScanTable { alpha: constants.alpha, rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::ModelKind;
    use crate::random::CouplingDistribution;
    use alloc::vec;
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> Hamiltonian {
        Hamiltonian::with_unit_measure(DMatrix::from_diagonal(&DVector::from_column_slice(v)), ModelKind::Periodic)
            .unwrap()
    }

    #[test]
    fn rank_one_shift() {
        let xi = counting_ssf(&diag(&[0.0]), &diag(&[1.0])).unwrap();
        assert_eq!(xi.eval(0.0), 0);
        assert_eq!(xi.eval(0.5), 1);
        assert_eq!(xi.eval(1.0), 1);
        assert_eq!(xi.eval(1.0 + 1e-12), 0);
        assert_eq!(xi.eval(-3.0), 0);
        assert!(counting_ssf(&diag(&[0.0, 2.0]), &diag(&[0.0, 2.0])).unwrap().is_zero());
        assert!(counting_ssf(&diag(&[0.0]), &diag(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn krein_diag_examples() {
        let r = krein_check(&diag(&[0.0]), &diag(&[1.0]), &TestFunction::Polynomial(vec![0.0, 0.0, 1.0])).unwrap();
        assert_eq!(r.trace_difference, 1.0);
        assert_eq!(r.ssf_integral, 1.0);
        let lin = krein_check(&diag(&[0.0, 3.0]), &diag(&[1.0, 5.0]), &TestFunction::Polynomial(vec![2.0, 1.0])).unwrap();
        assert!((lin.ssf_integral - 3.0).abs() < 1e-15 && lin.passed);
    }

    #[test]
    fn resolvent_domain() {
        assert!(matches!(
            TestFunction::ResolventPower(2).trace(&diag(&[-2.0, 1.0])),
            Err(Error::DomainTooSmall(_))
        ));
        let t = TestFunction::ResolventPower(3).trace(&diag(&[0.0, 1.0])).unwrap();
        assert!((t - 1.125).abs() < 1e-15);
    }

    #[test]
    fn invariance_hand_example() {
        let r = invariance_principle_check(&diag(&[0.0]), &diag(&[1.0]), 1, 0.5).unwrap();
        assert_eq!(r.xi, 1);
        assert_eq!(r.xi_g, -1);
        assert!((r.g_energy - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.moduli_agree && r.sign_flipped);
        assert!(invariance_principle_check(&diag(&[0.0]), &diag(&[1.0]), 1, 1.0).is_err());
    }

    #[test]
    fn schatten_examples() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 4.0]));
        assert!((schatten_quasinorm(&a, 1.0).unwrap().value - 7.0).abs() < 1e-14);
        let e1 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let e2 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        let half = |m: &DMatrix<f64>| schatten_quasinorm(m, 0.5).unwrap().value;
        assert!((half(&(&e1 + &e2)) - 4.0).abs() < 1e-14);
        assert!((libm::sqrt(half(&(&e1 + &e2))) - (libm::sqrt(half(&e1)) + libm::sqrt(half(&e2)))).abs() < 1e-14);
        let rect = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
        assert_eq!(singular_values(&rect).unwrap().len(), 2);
        assert!((operator_norm(&rect).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn identity_saturates_equalities() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert!((schatten_quasinorm(&i, 0.5).unwrap().value - 16.0).abs() < 1e-12);
        assert!((schatten_quasinorm(&i, 2.0).unwrap().value - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_suite_passes() {
        let ledger = schatten_property_suite(6, 20, 1).unwrap();
        assert!(ledger.passed(), "{ledger:?}");
    }

    #[test]
    fn superbound_rank_one_is_tight() {
        let r = superbound_check(&diag(&[0.0]), &diag(&[1.0]), 2.0, 1).unwrap();
        assert_eq!(r.constants.k, 12);
        assert!(r.holds);
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        let z = superbound_check(&diag(&[0.5]), &diag(&[0.5]), 2.0, 1).unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn degenerate_scan_is_zero() {
        let lat = Lattice::builtin("chain").unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::constant(0.3).unwrap()).unwrap();
        let t = effective_perturbation_scan(&model, &lat, 2.0, &[4, 8], 3, 0).unwrap();
        assert!(t.rows.iter().all(|r| r.norm == 0.0));
        assert_eq!(t.slope, None);
    }
}
