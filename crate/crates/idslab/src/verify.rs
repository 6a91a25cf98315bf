//! The invariant suite behind `idslab verify`.
//!
//! `quick` runs every identity at reduced sample counts and finishes in a
//! few seconds. `full` runs the acceptance criteria at their stated sizes,
//! plus the structural checks.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use idslab_core::floquet::{band_structure, DEFAULT_FLAT_TOL};
use idslab_core::ids::{energy_grid, exhaustion_study, finite_volume_ids, jump_profile, mc_expected_ids};
use idslab_core::operators::assemble_laplacian;
use idslab_core::random::{derive_seed, shift_config, CounterRng};
use idslab_core::spectral::{
    conformal_derivative_check, coupling_finite_difference, eigensolve, hellmann_feynman, simple_indices,
};
use idslab_core::ssf::{
    effective_perturbation_scan, invariance_principle_check, krein_check, perturbation_pair,
    schatten_property_suite, superbound_check, TestFunction, SCHATTEN_REL_TOL,
};
use idslab_core::wegner::{scaling_fit, volume_scaling, wegner_scan, wegner_statistic};
use idslab_core::{
    Agglomerate, CouplingDistribution, Error, GroupElement, Hamiltonian, IndexSet, Lattice, Model, RandomConfig,
};
use serde::Serialize;

use crate::config::VerifyLevel;

/// Deliberate corruption used to show that the suite notices it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Assemble `−L + V` instead of `L + V` for the second operator of each
    /// trace-identity pair.
    LaplacianSign,
}

#[derive(Clone, Debug)]
pub struct Options {
    pub level: VerifyLevel,
    pub seed: u64,
    pub fault: Option<Fault>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Item {
    pub name: &'static str,
    /// Part of the acceptance criteria (as opposed to a structural check).
    pub criterion: bool,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
    /// Known shortfall with its explanation, printed next to a failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub known_deviation: Option<&'static str>,
}

impl Item {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let budget = self.budget_seconds.map_or(String::new(), |b| format!(" / {b} s"));
        let mut s = format!("{status}  {:<28} ({:.2} s{budget})  {}", self.name, self.seconds, self.detail);
        if let (false, Some(why)) = (self.passed, self.known_deviation) {
            s.push_str(&format!("  [known deviation: {why}]"));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Ledger {
    pub level: VerifyLevel,
    pub seed: u64,
    pub items: Vec<Item>,
}

#[derive(Serialize)]
pub struct LedgerReport<'a> {
    level: VerifyLevel,
    seed: u64,
    passed: usize,
    failed: usize,
    items: &'a [Item],
}

impl Ledger {
    pub fn failures(&self) -> usize {
        self.items.iter().filter(|i| !i.passed).count()
    }

    /// Failures without a recorded explanation.
    pub fn unexplained_failures(&self) -> usize {
        self.items.iter().filter(|i| !i.passed && i.known_deviation.is_none()).count()
    }

    pub fn summary_line(&self) -> String {
        format!(
            "verify {}: {} passed, {} failed ({} with known deviation)",
            match self.level {
                VerifyLevel::Quick => "quick",
                VerifyLevel::Full => "full",
            },
            self.items.len() - self.failures(),
            self.failures(),
            self.failures() - self.unexplained_failures()
        )
    }

    pub fn report(&self) -> LedgerReport<'_> {
        LedgerReport {
            level: self.level,
            seed: self.seed,
            passed: self.items.len() - self.failures(),
            failed: self.failures(),
            items: &self.items,
        }
    }
}

struct Check {
    passed: bool,
    detail: String,
}

type Outcome = Result<Check, Error>;

struct Ctx {
    full: bool,
    seed: u64,
    fault: Option<Fault>,
}

impl Ctx {
    fn rng(&self, tag: u64) -> CounterRng {
        CounterRng::new(derive_seed(self.seed, tag))
    }

    /// `quick` or `full` parameter.
    fn pick<T>(&self, quick: T, full: T) -> T {
        if self.full {
            full
        } else {
            quick
        }
    }
}

struct Spec {
    name: &'static str,
    criterion: bool,
    /// Runtime budget at `full` level.
    budget: Option<f64>,
    /// Skipped at `quick` level.
    full_only: bool,
    known_deviation: Option<&'static str>,
    run: fn(&Ctx) -> Outcome,
}

const WEGNER_DEVIATION: &str = "finite-size level structure at L=16 bends the eps-curve; slope stays above 1/p";
const UNIFORMITY_DEVIATION: &str = "Dirichlet lift of the spectral bottom suppresses the norm on small boxes; the norm saturates";

fn specs() -> Vec<Spec> {
    let c = |name, budget, run| Spec { name, criterion: true, budget: Some(budget), full_only: false, known_deviation: None, run };
    vec![
        Spec { name: "equivariance", criterion: false, budget: None, full_only: false, known_deviation: None, run: equivariance },
        c("conformal-scaling", 10.0, conformal_scaling),
        c("hellmann-feynman", 10.0, hellmann_feynman_fd),
        c("krein-identity", 10.0, krein_identity),
        c("invariance-principle", 10.0, invariance_principle),
        c("super-trace-bound", 30.0, super_trace_bound),
        c("schatten-calculus", 30.0, schatten_calculus),
        c("bloch-closed-form", 5.0, bloch_closed_form),
        c("flat-band-jump", 5.0, flat_band_jump),
        c("exhaustion", 10.0, exhaustion),
        Spec { name: "bloch-vs-exhaustion", criterion: false, budget: None, full_only: false, known_deviation: None, run: bloch_vs_exhaustion },
        Spec { known_deviation: Some(WEGNER_DEVIATION), full_only: true, ..c("wegner-eps-scaling", 300.0, wegner_eps_scaling) },
        Spec { full_only: true, ..c("wegner-volume-law", 300.0, wegner_volume_law) },
        c("regularization", 300.0, regularization),
        c("ram-zero-energy", 300.0, ram_zero_energy),
        Spec {
            known_deviation: Some(UNIFORMITY_DEVIATION),
            full_only: true,
            ..c("effective-perturbation", 120.0, effective_perturbation)
        },
    ]
}

fn execute(spec: &Spec, ctx: &Ctx) -> Item {
    let start = Instant::now();
    let out = (spec.run)(ctx);
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match out {
        Ok(c) => (c.passed, c.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let budget = if ctx.full { spec.budget } else { None };
    if let Some(b) = budget {
        if seconds > b {
            passed = false;
            detail.push_str(&format!("; over the {b} s budget"));
        }
    }
    Item {
        name: spec.name,
        criterion: spec.criterion,
        passed,
        detail,
        seconds,
        budget_seconds: budget,
        known_deviation: spec.known_deviation,
    }
}

/// Runs the suite, reporting each item as soon as it finishes.
pub fn run(opts: &Options, mut on_item: impl FnMut(&Item)) -> Ledger {
    let ctx = Ctx { full: opts.level == VerifyLevel::Full, seed: opts.seed, fault: opts.fault };
    let mut items = Vec::new();
    for spec in specs() {
        if spec.full_only && !ctx.full {
            continue;
        }
        let item = execute(&spec, &ctx);
        on_item(&item);
        items.push(item);
    }
    Ledger { level: opts.level, seed: opts.seed, items }
}

/// The acceptance criteria only, at full size.
pub fn run_criteria(seed: u64, mut on_item: impl FnMut(&Item)) -> Ledger {
    let ctx = Ctx { full: true, seed, fault: None };
    let mut items = Vec::new();
    for spec in specs().into_iter().filter(|s| s.criterion) {
        let item = execute(&spec, &ctx);
        on_item(&item);
        items.push(item);
    }
    Ledger { level: VerifyLevel::Full, seed, items }
}

fn lattice(name: &str) -> Lattice {
    Lattice::builtin(name).expect("builtin lattice")
}

fn uniform(lo: f64, hi: f64) -> CouplingDistribution {
    CouplingDistribution::uniform(lo, hi).expect("valid interval")
}

fn no_disorder() -> RandomConfig {
    RandomConfig::constant(&IndexSet::new(), 0.0)
}

fn tamper(ctx: &Ctx, agg: &Agglomerate, h: Hamiltonian) -> Result<Hamiltonian, Error> {
    match ctx.fault {
        None => Ok(h),
        Some(Fault::LaplacianSign) => {
            let lap = assemble_laplacian(agg);
            Hamiltonian::new(h.matrix() - lap.matrix() * 2.0, h.measure().clone(), h.kind())
        }
    }
}

fn equivariance(ctx: &Ctx) -> Outcome {
    let mut checks = 0;
    let mut worst_sa = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut mismatches = 0;
    let cases = [
        ("chain", false, 12usize),
        ("square", false, 4),
        ("pendant-pair", false, 5),
        ("pendant-pair", true, 5),
        ("chain", true, 12),
    ];
    let mut rng = ctx.rng(1);
    for (i, &(name, metric, len)) in cases.iter().enumerate() {
        let lat = lattice(name);
        let model = if metric {
            Model::cell_metric(&lat, uniform(-0.5, 0.5))?
        } else {
            Model::cell_alloy(&lat, uniform(0.0, 1.0))?
        };
        let agg = lat.box_agglomerate(len)?;
        for s in 0..ctx.pick(3, 12) {
            let cfg = model.sample(&agg, ctx.seed, (i * 100 + s) as u64)?;
            let by = GroupElement::new((0..lat.dim()).map(|_| rng.next_below(21) as i64 - 10).collect());
            let h = model.assemble(&agg, &cfg)?;
            let g = model.assemble(&agg.translate(&by)?, &shift_config(&cfg, &by))?;
            if h.matrix() != g.matrix() || h.measure() != g.measure() {
                mismatches += 1;
            }
            worst_sa = worst_sa.max(h.self_adjointness_defect());
            min_eig = min_eig.min(eigensolve(&h, false)?.eigenvalues()[0]);
            checks += 1;
        }
    }
    Ok(Check {
        passed: mismatches == 0 && worst_sa <= 1e-13 && min_eig >= -1e-10,
        detail: format!(
            "{checks} translated assemblies, {mismatches} mismatches; weighted symmetry defect {worst_sa:.1e}; min eigenvalue {min_eig:.2e}"
        ),
    })
}

fn conformal_scaling(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(2);
    // (lattice, large box for the exact law with n ≤ 200, small box for finite differences)
    let shapes = [("chain", 200usize, 24usize), ("square", 14, 5), ("pendant-pair", 66, 8)];
    let mut worst_scaling = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut fd_checks = 0;
    let instances = ctx.pick(3, 12);
    for i in 0..instances {
        let (name, big, small) = shapes[i % shapes.len()];
        let lat = lattice(name);
        let model = Model::cell_metric(&lat, uniform(-0.5, 0.5))?;
        let agg = lat.box_agglomerate(big)?;
        let cfg = model.sample(&agg, ctx.seed, i as u64)?;
        let base = eigensolve(&model.assemble(&agg, &cfg)?, false)?;
        let radius = base.eigenvalues().iter().fold(0.0f64, |m, e| m.max(e.abs()));
        for t in [-1.5 + 3.0 * rng.next_f64(), LN_2, -0.3] {
            let shifted = eigensolve(&model.assemble(&agg, &cfg.offset_all(t))?, false)?;
            let f = (-t).exp();
            for (s, e) in shifted.eigenvalues().iter().zip(base.eigenvalues()) {
                worst_scaling = worst_scaling.max((s - f * e).abs() / (f * radius));
            }
        }
        let agg = lat.box_agglomerate(small)?;
        let cfg = model.sample(&agg, ctx.seed, 1000 + i as u64)?;
        let spec = eigensolve(&model.assemble(&agg, &cfg)?, false)?;
        let simple = simple_indices(&spec);
        for idx in [simple.first(), simple.get(simple.len() / 2), simple.last()].into_iter().flatten() {
            let rep = conformal_derivative_check(&model, &agg, &cfg, *idx)?;
            worst_fd = worst_fd.max(rep.fd_residual / rep.fd_tolerance);
            worst_scaling = worst_scaling.max(rep.scaling.iter().map(|s| s.max_relative_error).fold(0.0, f64::max));
            fd_checks += 1;
        }
    }
    Ok(Check {
        passed: worst_scaling <= 1e-12 && worst_fd <= 1.0,
        detail: format!(
            "{instances} instances: max relative scaling error {worst_scaling:.1e} (tol 1e-12); {fd_checks} derivative sums, worst residual/tolerance {worst_fd:.2}"
        ),
    })
}

fn hellmann_feynman_fd(ctx: &Ctx) -> Outcome {
    let lat = lattice("chain");
    let model = Model::cell_alloy(&lat, uniform(0.0, 1.0))?;
    let mut rng = ctx.rng(3);
    let mut worst = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut compared = 0;
    let instances = ctx.pick(5, 20);
    for i in 0..instances {
        let agg = lat.box_agglomerate(8 + rng.next_below(9))?;
        let cfg = model.sample(&agg, ctx.seed, i as u64)?;
        let spec = eigensolve(&model.assemble(&agg, &cfg)?, false)?;
        for n in simple_indices(&spec) {
            let hf = hellmann_feynman(&model, &agg, &cfg, n)?;
            worst_sum = worst_sum.max((hf.sum - 1.0).abs());
            for (site, d) in &hf.derivatives {
                let fd = coupling_finite_difference(&model, &agg, &cfg, n, site, 1e-5)?;
                worst = worst.max((fd - d).abs());
                compared += 1;
            }
        }
    }
    Ok(Check {
        passed: worst <= 1e-6 && worst_sum <= 1e-9,
        detail: format!(
            "{instances} chains, {compared} derivatives: max |analytic - FD| {worst:.1e} (tol 1e-6); max |sum - 1| {worst_sum:.1e} (tol 1e-9)"
        ),
    })
}

/// A random pair of operators on a common weighted space.
fn random_pair(ctx: &Ctx, i: usize, rng: &mut CounterRng) -> Result<(Hamiltonian, Hamiltonian), Error> {
    let shapes = [("chain", 10usize), ("square", 3), ("pendant-pair", 4)];
    let (name, len) = shapes[i % shapes.len()];
    let lat = lattice(name);
    let agg = lat.box_agglomerate(len + rng.next_below(3))?;
    if i % 4 == 3 {
        // alloy-type metric pair, brought onto one space by S
        let model = Model::cell_metric(&lat, uniform(-0.5, 0.5))?;
        let cfg = model.sample(&agg, ctx.seed, i as u64)?;
        let sites: Vec<GroupElement> = model.extended_sites(&agg.index_set())?.into_iter().collect();
        let gamma = &sites[rng.next_below(sites.len())];
        return perturbation_pair(&model, &agg, &cfg, gamma, 0.5 * rng.next_f64() - 0.25);
    }
    let model = Model::cell_alloy(&lat, uniform(0.0, 1.0))?;
    let h1 = model.assemble(&agg, &model.sample(&agg, ctx.seed, 2 * i as u64)?)?;
    let h2 = model.assemble(&agg, &model.sample(&agg, ctx.seed, 2 * i as u64 + 1)?)?;
    Ok((h1, tamper(ctx, &agg, h2)?))
}

fn krein_identity(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(4);
    let pairs = ctx.pick(20, 100);
    let mut worst = 0.0f64;
    let mut failed = 0;
    let mut first_error = None;
    for i in 0..pairs {
        let (h1, h2) = random_pair(ctx, i, &mut rng)?;
        let k = 1 + rng.next_below(13) as u32;
        for phi in [TestFunction::Polynomial(vec![0.0, 0.0, 1.0]), TestFunction::ResolventPower(k)] {
            match krein_check(&h1, &h2, &phi) {
                Ok(r) => {
                    worst = worst.max(r.residual / r.tolerance);
                    failed += usize::from(!r.passed);
                }
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert(format!("; {}: {e}", phi.name()));
                }
            }
        }
    }
    Ok(Check {
        passed: failed == 0,
        detail: format!(
            "{pairs} pairs x 2 test functions: {failed} failed, worst residual/tolerance {worst:.2e} (tol 1e-9 relative){}",
            first_error.unwrap_or_default()
        ),
    })
}

fn count_below(e: &[f64], x: f64) -> i64 {
    e.iter().filter(|&&v| v < x).count() as i64
}

fn invariance_principle(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(5);
    let pairs = ctx.pick(10, 50);
    let per_pair = 20;
    let mut mismatches = 0;
    let mut nonzero = 0;
    for i in 0..pairs {
        let (h1, h2) = random_pair(ctx, i, &mut rng)?;
        let e1 = eigensolve(&h1, false)?;
        let e2 = eigensolve(&h2, false)?;
        let top = e1.eigenvalues().last().unwrap().max(*e2.eigenvalues().last().unwrap());
        let k = 1 + rng.next_below(13) as u32;
        let mut done = 0;
        let mut attempts = 0;
        while done < per_pair {
            attempts += 1;
            if attempts > 100 * per_pair {
                return Err(Error::InvalidArgument("could not draw energies away from the spectrum".into()));
            }
            let energy = -0.5 + (top + 1.0) * rng.next_f64();
            let r = match invariance_principle_check(&h1, &h2, k, energy) {
                Err(Error::NearEigenvalue { .. }) => continue,
                other => other?,
            };
            let direct = count_below(e1.eigenvalues(), energy) - count_below(e2.eigenvalues(), energy);
            if !(r.moduli_agree && r.sign_flipped && r.xi == direct) {
                mismatches += 1;
            }
            nonzero += usize::from(r.xi != 0);
            done += 1;
        }
    }
    Ok(Check {
        passed: mismatches == 0,
        detail: format!(
            "{pairs} pairs x {per_pair} energies: {mismatches} mismatches ({nonzero} with nonzero shift)"
        ),
    })
}

fn super_trace_bound(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(6);
    let shapes = [("chain", 12usize), ("square", 4), ("pendant-pair", 5)];
    let pairs = ctx.pick(10, 50);
    let mut violations = 0;
    let mut tightest = 0.0f64;
    for i in 0..pairs {
        let (name, len) = shapes[i % shapes.len()];
        let lat = lattice(name);
        let model = Model::cell_alloy(&lat, uniform(0.0, 1.0))?;
        let agg = lat.box_agglomerate(len)?;
        let cfg = model.sample(&agg, ctx.seed, i as u64)?;
        let sites: Vec<GroupElement> = model.extended_sites(&agg.index_set())?.into_iter().collect();
        let gamma = &sites[rng.next_below(sites.len())];
        let (h1, h2) = perturbation_pair(&model, &agg, &cfg, gamma, 0.0)?;
        let r = superbound_check(&h1, &h2, 2.0, lat.dim())?;
        violations += usize::from(!r.holds);
        if r.rhs > 0.0 {
            tightest = tightest.max(r.lhs / r.rhs);
        }
    }
    Ok(Check {
        passed: violations == 0,
        detail: format!("{pairs} single-site pairs at p=2: {violations} violations, max lhs/rhs {tightest:.4}"),
    })
}

fn schatten_calculus(ctx: &Ctx) -> Outcome {
    let trials = ctx.pick(100, 500);
    let ledger = schatten_property_suite(16, trials, derive_seed(ctx.seed, 7))?;
    let parts: Vec<String> = ledger.properties.iter().map(|p| format!("{} {}/{}", p.name, p.violations, p.checks)).collect();
    Ok(Check {
        passed: ledger.passed(),
        detail: format!("{trials} trials at {SCHATTEN_REL_TOL:e} relative: {}", parts.join(", ")),
    })
}

fn bloch_closed_form(_: &Ctx) -> Outcome {
    let lat = lattice("chain");
    let mut worst_mid = 0.0f64;
    let mut worst_law = 0.0f64;
    let mut passed = true;
    for g in [64usize, 256] {
        let bands = band_structure(&lat, &[0.0], g)?;
        let mid = (bands.bloch_ids(2.0) - 0.5).abs();
        worst_mid = worst_mid.max(mid);
        passed &= mid <= 2.0 / g as f64;
        for e in energy_grid(0.05, 3.95, 40) {
            let exact = (1.0 - e / 2.0).acos() / PI;
            let d = (bands.bloch_ids(e) - exact).abs();
            worst_law = worst_law.max(d * g as f64);
            passed &= d <= 2.0 / g as f64;
        }
    }
    Ok(Check {
        passed,
        detail: format!("|N(2) - 1/2| <= {worst_mid:.1e}; arccos law within {worst_law:.2}/G on 40 energies, G in {{64, 256}}"),
    })
}

fn flat_band_jump(_: &Ctx) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for g in [64usize, 256] {
        let pendant = band_structure(&lattice("pendant-pair"), &[0.0; 3], g)?;
        let flats = pendant.flat_bands(DEFAULT_FLAT_TOL);
        let width = flats.iter().find(|f| (f.energy - 1.0).abs() < 1e-9).map_or(f64::NAN, |f| f.width);
        let jump = pendant.bloch_ids(1.0 + 1e-6) - pendant.bloch_ids(1.0 - 1e-6);
        passed &= flats.len() == 1 && width < 1e-9 && jump == 1.0 / 3.0;

        // on a grid every band value is a step of height (multiplicity)/G;
        // a genuine jump does not shrink with G
        let chain = band_structure(&lattice("chain"), &[0.0], g)?;
        let chain_flats = chain.flat_bands(DEFAULT_FLAT_TOL).len();
        let chain_jump = energy_grid(0.0, 4.0, 401)
            .into_iter()
            .map(|e| chain.bloch_ids(e + 1e-6) - chain.bloch_ids(e - 1e-6))
            .fold(0.0, f64::max);
        passed &= chain_flats == 0 && chain_jump <= 2.0 / g as f64;
        parts.push(format!(
            "G={g}: pendant-pair {} flat band(s), width {width:.1e}, jump at E=1 {jump}; chain {chain_flats} flat bands, max step {chain_jump:.4}",
            flats.len()
        ));
    }
    Ok(Check { passed, detail: parts.join("; ") })
}

fn exhaustion(ctx: &Ctx) -> Outcome {
    let lat = lattice("chain");
    let model = Model::periodic(&lat);
    let mut parts = Vec::new();
    let mut passed = true;
    for l in ctx.pick(vec![8usize, 16], vec![8, 16, 32]) {
        let agg = lat.box_agglomerate(l)?;
        let n = finite_volume_ids(&model, &agg, &no_disorder(), &[2.0])?.values[0];
        let d = (n - 0.5).abs();
        passed &= d <= 2.0 / l as f64;
        parts.push(format!("L={l}: |N-1/2| = {d}"));
    }
    Ok(Check { passed, detail: parts.join(", ") })
}

fn bloch_vs_exhaustion(ctx: &Ctx) -> Outcome {
    let lat = lattice("chain");
    let g = 64;
    let lengths = ctx.pick(vec![8usize, 16], vec![8, 16, 32]);
    let energies = energy_grid(0.1, 3.9, 39);
    let t = exhaustion_study(&Model::periodic(&lat), &lat, &lengths, &energies, 1, ctx.seed, g)?;
    let mut passed = true;
    let mut parts = Vec::new();
    for &l in &lengths {
        let worst = t
            .rows
            .iter()
            .filter(|r| r.box_length == l)
            .filter_map(|r| r.deviation)
            .fold(0.0, f64::max);
        passed &= worst <= 2.0 / l as f64 + 2.0 / g as f64;
        parts.push(format!("L={l}: {worst:.4}"));
    }
    Ok(Check { passed, detail: format!("max |N^L - N_Bloch| on 39 energies (tol 2/L + 2/G): {}", parts.join(", ")) })
}

const WEGNER_EPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

fn wegner_eps_scaling(ctx: &Ctx) -> Outcome {
    let lat = lattice("chain");
    let model = Model::cell_alloy(&lat, uniform(0.0, 1.0))?;
    let table = wegner_scan(&model, &lat, 16, 2.0, &WEGNER_EPS, 4000, derive_seed(ctx.seed, 10), 2.0)?;
    let fit = scaling_fit(&table.rows, 2.0)?;
    let bounded = table
        .rows
        .iter()
        .all(|r| r.mean <= fit.c_fit * r.eps.sqrt() * r.n_plus as f64 * (1.0 + 1e-12));
    let means: Vec<String> = table.rows.iter().map(|r| format!("{:.4}", r.mean)).collect();
    Ok(Check {
        passed: fit.slope >= 0.9 && fit.c_fit.is_finite() && fit.c_fit > 0.0 && bounded,
        detail: format!(
            "slope {:.3} (need >= 0.9), C_fit {:.4} bounds all rows: {bounded}; means [{}]",
            fit.slope,
            fit.c_fit,
            means.join(", ")
        ),
    })
}

fn wegner_volume_law(ctx: &Ctx) -> Outcome {
    let lat = lattice("chain");
    let model = Model::cell_alloy(&lat, uniform(0.0, 1.0))?;
    let mut rows = Vec::new();
    for l in [8usize, 16, 32] {
        rows.push(wegner_statistic(&model, &lat, l, 2.0, 0.1, 2000, derive_seed(ctx.seed, 11), 2.0)?);
    }
    let fit = volume_scaling(&rows)?;
    let means: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.n_plus, r.mean)).collect();
    Ok(Check {
        passed: (0.8..=1.2).contains(&fit.slope),
        detail: format!("slope {:.3} (need [0.8, 1.2]) at E=2, eps=0.1; |I+|:mean [{}]", fit.slope, means.join(", ")),
    })
}

fn regularization(ctx: &Ctx) -> Outcome {
    let lat = lattice("pendant-pair");
    let energies = energy_grid(0.5, 1.5, 81);
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let agg = lat.box_agglomerate(16)?;
    let clean = Model::cell_alloy(&lat, CouplingDistribution::constant(0.0)?)?;
    let floor = jump_profile(&mc_expected_ids(&clean, &agg, &energies, 2, ctx.seed)?, &eps)?
        .iter()
        .map(|j| j.max_increment)
        .fold(f64::INFINITY, f64::min);
    let alloy = Model::cell_alloy(&lat, uniform(0.0, 1.0))?;
    let samples = ctx.pick(300, 2000);
    let curve = mc_expected_ids(&alloy, &agg, &energies, samples, derive_seed(ctx.seed, 12))?;
    let profile = jump_profile(&curve, &[0.025])?;
    let j = &profile[0];
    Ok(Check {
        passed: floor >= 0.3 && j.upper() < 0.15,
        detail: format!(
            "clean floor {floor:.4} (need >= 0.3); alloy ({samples} samples) eps=0.025: {:.4} + 2 stderr = {:.4} (need < 0.15)",
            j.max_increment,
            j.upper()
        ),
    })
}

fn ram_zero_energy(ctx: &Ctx) -> Outcome {
    let lat = lattice("pendant-pair");
    let model = Model::cell_metric(&lat, uniform(-0.5, 0.5))?;
    let mut refused = 0;
    let probes = [(0.1, 0.05), (0.45, 0.1), (0.0, 0.2), (1.9, 0.2)];
    for (e, eps) in probes {
        if let Err(Error::ZeroEnergyCaveat { .. }) = wegner_statistic(&model, &lat, 4, e, eps, 2, ctx.seed, 2.0) {
            refused += 1;
        }
    }
    let refusals_ok = refused == probes.len();
    if !ctx.full {
        return Ok(Check { passed: refusals_ok, detail: format!("{refused}/{} intervals outside [1/2, 2] refused", probes.len()) });
    }
    let table = wegner_scan(&model, &lat, 16, 1.0, &WEGNER_EPS, 2000, derive_seed(ctx.seed, 13), 2.0)?;
    let fit = scaling_fit(&table.rows, 2.0)?;
    Ok(Check {
        passed: refusals_ok && fit.slope >= 0.9,
        detail: format!(
            "{refused}/{} intervals outside [1/2, 2] refused; pendant-pair metric fit at E=1: slope {:.3} (need >= 0.9)",
            probes.len(),
            fit.slope
        ),
    })
}

fn effective_perturbation(ctx: &Ctx) -> Outcome {
    let lengths = [4usize, 8, 16];
    let chain = lattice("chain");
    let rap = effective_perturbation_scan(
        &Model::cell_alloy(&chain, uniform(0.0, 1.0))?,
        &chain,
        2.0,
        &lengths,
        64,
        derive_seed(ctx.seed, 14),
    )?;
    let pendant = lattice("pendant-pair");
    let ram = effective_perturbation_scan(
        &Model::cell_metric(&pendant, uniform(-0.5, 0.5))?,
        &pendant,
        2.0,
        &lengths,
        64,
        derive_seed(ctx.seed, 15),
    )?;
    let slope = |s: Option<f64>| s.unwrap_or(f64::NAN);
    let (a, b) = (slope(rap.slope), slope(ram.slope));
    let violations = rap.rows.iter().chain(&ram.rows).filter(|r| r.lhs > r.rhs).count();
    Ok(Check {
        passed: a <= 0.1 && b <= 0.1,
        detail: format!(
            "log-log slope over L in {{4, 8, 16}}: chain potential {a:.3}, pendant-pair metric {b:.3} (need <= 0.1); super-trace violations {violations}"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_sign_fault_is_caught() {
        let ctx = Ctx { full: false, seed: 1, fault: Some(Fault::LaplacianSign) };
        let c = krein_identity(&ctx).unwrap();
        assert!(!c.passed, "{}", c.detail);
        let clean = Ctx { fault: None, ..ctx };
        assert!(krein_identity(&clean).unwrap().passed);
    }
}
