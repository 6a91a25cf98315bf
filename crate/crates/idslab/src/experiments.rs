//! Runs a resolved configuration and collects its artifacts.

use idslab_core::floquet::{band_structure, DEFAULT_FLAT_TOL};
use idslab_core::ids::{exhaustion_study, jump_profile, mc_expected_ids, IdsCurve};
use idslab_core::ssf::effective_perturbation_scan;
use idslab_core::wegner::{
    scaling_fit, volume_scaling, wegner_bound_report, wegner_constants, wegner_scan, BoundReport, ScalingFit,
    VolumeFit, WegnerConstants, WegnerRow,
};
use idslab_core::{stats, Model, ModelKind};
use serde::Serialize;

use crate::config::{ExperimentKind, Format, Resolved};
use crate::output::{self, Artifacts};
use crate::verify;

/// A numerical failure with a short description of what was being computed.
#[derive(Debug, thiserror::Error)]
#[error("{context}: {source}")]
pub struct NumericError {
    pub context: String,
    #[source]
    pub source: idslab_core::Error,
}

trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, NumericError>;
}

impl<T> Context<T> for idslab_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, NumericError> {
        self.map_err(|source| NumericError { context: what(), source })
    }
}

pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: String,
    /// False when a verify run had failing items.
    pub passed: bool,
}

pub fn run(r: &Resolved, formats: &[Format]) -> Result<Outcome, NumericError> {
    let mut out = match r.kind {
        ExperimentKind::Ids => ids(r)?,
        ExperimentKind::Floquet => floquet(r)?,
        ExperimentKind::Wegner => wegner(r)?,
        ExperimentKind::Ssf => ssf(r)?,
        ExperimentKind::Exhaustion => exhaustion(r)?,
        ExperimentKind::Verify => verify_run(r),
    };
    let keep_csv = formats.contains(&Format::Csv);
    let keep_json = formats.contains(&Format::Json);
    let mut filtered = Artifacts::default();
    for name in out.artifacts.names() {
        let is_json = name.ends_with(".json");
        if (is_json && keep_json) || (!is_json && keep_csv) {
            filtered.add(name, out.artifacts.get(name).unwrap().to_vec());
        }
    }
    out.artifacts = filtered;
    Ok(out)
}

#[derive(Serialize)]
struct JumpJson {
    eps: f64,
    max_increment: f64,
    stderr: f64,
    at_energy: Option<f64>,
    resolution_limited: bool,
}

#[derive(Serialize)]
struct CurveSummary {
    box_l: Option<usize>,
    volume: f64,
    samples: usize,
    monotonicity_violation: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    jump_profile: Vec<JumpJson>,
}

#[derive(Serialize)]
struct IdsSummary {
    model: ModelKind,
    seed: u64,
    curves: Vec<CurveSummary>,
}

fn curve_summary(c: &IdsCurve, eps: &[f64]) -> Result<CurveSummary, NumericError> {
    let jumps = if eps.is_empty() { Vec::new() } else { jump_profile(c, eps).context(|| "jump profile".into())? };
    Ok(CurveSummary {
        box_l: c.meta.box_length,
        volume: c.meta.volume,
        samples: c.meta.samples,
        monotonicity_violation: c.monotonicity_violation(),
        jump_profile: jumps
            .into_iter()
            .map(|j| JumpJson {
                eps: j.eps,
                max_increment: j.max_increment,
                stderr: j.stderr,
                at_energy: j.at_energy.is_finite().then_some(j.at_energy),
                resolution_limited: j.resolution_limited,
            })
            .collect(),
    })
}

fn ids(r: &Resolved) -> Result<Outcome, NumericError> {
    let mut curves = Vec::new();
    for &l in &r.boxes {
        let agg = r.lattice.box_agglomerate(l).context(|| format!("box L={l}"))?;
        let c = mc_expected_ids(&r.model, &agg, &r.energies, r.samples, r.seed)
            .context(|| format!("expected IDS on box L={l}"))?;
        curves.push(c);
    }
    let summary = IdsSummary {
        model: r.model.kind(),
        seed: r.seed,
        curves: curves.iter().map(|c| curve_summary(c, &r.epsilons)).collect::<Result<_, _>>()?,
    };
    let mut a = Artifacts::default();
    a.add("ids.csv", output::ids_table(&curves, r.seed).to_bytes());
    a.add("ids_summary.json", output::json_bytes(&summary));
    let last = curves.last().expect("at least one box");
    Ok(Outcome {
        artifacts: a,
        summary: format!(
            "ids: {} box(es) x {} energies, {} sample(s); largest box N({}) = {}",
            curves.len(),
            r.energies.len(),
            r.samples,
            last.energies.last().unwrap(),
            last.values.last().unwrap()
        ),
        passed: true,
    })
}

#[derive(Serialize)]
struct FlatJson {
    band: usize,
    energy: f64,
    width: f64,
    jump: f64,
}

#[derive(Serialize)]
struct FloquetSummary {
    grid: usize,
    bands: usize,
    band_ranges: Vec<(f64, f64)>,
    flat_tolerance: f64,
    flat_bands: Vec<FlatJson>,
}

fn floquet(r: &Resolved) -> Result<Outcome, NumericError> {
    let Model::Periodic { v_per } = &r.model else { unreachable!("checked during validation") };
    let bands = band_structure(&r.lattice, v_per, r.grid).context(|| format!("band structure on a {}-point grid", r.grid))?;
    let flat = bands.flat_bands(DEFAULT_FLAT_TOL);
    let cell = bands.band_count() as f64;
    let summary = FloquetSummary {
        grid: r.grid,
        bands: bands.band_count(),
        band_ranges: (0..bands.band_count()).map(|n| bands.band_range(n)).collect(),
        flat_tolerance: DEFAULT_FLAT_TOL,
        flat_bands: flat
            .iter()
            .map(|f| FlatJson {
                band: f.band,
                energy: f.energy,
                width: f.width,
                jump: flat.iter().filter(|g| (g.energy - f.energy).abs() <= DEFAULT_FLAT_TOL).count() as f64 / cell,
            })
            .collect(),
    };
    let mut a = Artifacts::default();
    a.add("bands.csv", output::bands_table(&bands).to_bytes());
    if !r.energies.is_empty() {
        a.add("bloch_ids.csv", output::bloch_ids_table(&bands, &r.energies).to_bytes());
    }
    a.add("flat_bands.json", output::json_bytes(&summary));
    let flats: Vec<String> = flat.iter().map(|f| format!("E={}", f.energy)).collect();
    Ok(Outcome {
        artifacts: a,
        summary: format!(
            "floquet: {} band(s) on {} grid points; flat bands: {}",
            bands.band_count(),
            bands.thetas.len(),
            if flats.is_empty() { "none".to_string() } else { flats.join(", ") }
        ),
        passed: true,
    })
}

#[derive(Serialize)]
struct ScalingEntry {
    energy: f64,
    box_l: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<ScalingFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct VolumeEntry {
    energy: f64,
    eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<VolumeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct WegnerFits {
    p: f64,
    constants: WegnerConstants,
    scaling: Vec<ScalingEntry>,
    volume: Vec<VolumeEntry>,
}

fn wegner(r: &Resolved) -> Result<Outcome, NumericError> {
    let mut rows: Vec<WegnerRow> = Vec::new();
    for &e in &r.energies {
        for &l in &r.boxes {
            let t = wegner_scan(&r.model, &r.lattice, l, e, &r.epsilons, r.samples, r.seed, r.a)
                .context(|| format!("Wegner statistic at E={e}, L={l}"))?;
            rows.extend(t.rows);
        }
    }
    let mut scaling = Vec::new();
    if r.epsilons.len() >= 4 {
        for &e in &r.energies {
            for &l in &r.boxes {
                let sel: Vec<WegnerRow> =
                    rows.iter().filter(|w| w.energy == e && w.box_length == l).cloned().collect();
                let (fit, error) = split(scaling_fit(&sel, r.p));
                scaling.push(ScalingEntry { energy: e, box_l: l, fit, error });
            }
        }
    }
    let mut volume = Vec::new();
    if r.boxes.len() >= 3 {
        for &e in &r.energies {
            for &eps in &r.epsilons {
                let sel: Vec<WegnerRow> = rows.iter().filter(|w| w.energy == e && w.eps == eps).cloned().collect();
                let (fit, error) = split(volume_scaling(&sel));
                volume.push(VolumeEntry { energy: e, eps, fit, error });
            }
        }
    }
    let constants = wegner_constants(r.p, r.lattice.dim()).context(|| "Wegner constants".into())?;
    let fits = WegnerFits { p: r.p, constants, scaling, volume };
    let headline = fits
        .scaling
        .iter()
        .find_map(|s| s.fit.as_ref().map(|f| format!("; eps-slope {:.3} at E={}, L={}", f.slope, s.energy, s.box_l)))
        .unwrap_or_default();
    let mut a = Artifacts::default();
    a.add("wegner.csv", output::wegner_table(&rows).to_bytes());
    a.add("wegner_fit.json", output::json_bytes(&fits));
    Ok(Outcome {
        artifacts: a,
        summary: format!("wegner: {} row(s), {} sample(s) each{headline}", rows.len(), r.samples),
        passed: true,
    })
}

fn split<T>(r: idslab_core::Result<T>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

#[derive(Serialize)]
struct BoxNorms {
    box_l: usize,
    mean_norm: f64,
    stderr: f64,
    max_norm: f64,
}

#[derive(Serialize)]
struct ScanSummary {
    p: f64,
    constants: WegnerConstants,
    slope: Option<f64>,
    boxes: Vec<BoxNorms>,
    superbound_violations: usize,
    bounds: Vec<BoundReport>,
}

fn ssf(r: &Resolved) -> Result<Outcome, NumericError> {
    let scan = effective_perturbation_scan(&r.model, &r.lattice, r.p, &r.boxes, r.samples, r.seed)
        .context(|| "effective perturbation scan".into())?;
    let boxes = r
        .boxes
        .iter()
        .map(|&l| {
            let norms: Vec<f64> = scan.rows.iter().filter(|x| x.box_length == l).map(|x| x.norm).collect();
            let st = stats::sample_stats(&norms);
            BoxNorms { box_l: l, mean_norm: st.mean, stderr: st.stderr, max_norm: norms.iter().copied().fold(0.0, f64::max) }
        })
        .collect();
    let bounds = r
        .energies
        .iter()
        .map(|&e| wegner_bound_report(&r.model, r.p, r.lattice.dim(), e, r.a, &scan, None))
        .collect::<idslab_core::Result<Vec<_>>>()
        .context(|| "Wegner bound report".into())?;
    let summary = ScanSummary {
        p: r.p,
        constants: wegner_constants(r.p, r.lattice.dim()).context(|| "Wegner constants".into())?,
        slope: scan.slope,
        boxes,
        superbound_violations: scan.rows.iter().filter(|x| x.lhs > x.rhs).count(),
        bounds,
    };
    let mut a = Artifacts::default();
    a.add("scan.csv", output::scan_table(&scan).to_bytes());
    a.add("scan_fit.json", output::json_bytes(&summary));
    Ok(Outcome {
        artifacts: a,
        summary: format!(
            "ssf: {} pair(s), alpha = {}, log-log slope {}, super-trace violations {}",
            scan.rows.len(),
            scan.alpha,
            scan.slope.map_or("n/a".to_string(), |s| format!("{s:.3}")),
            summary.superbound_violations
        ),
        passed: true,
    })
}

fn exhaustion(r: &Resolved) -> Result<Outcome, NumericError> {
    let t = exhaustion_study(&r.model, &r.lattice, &r.boxes, &r.energies, r.samples, r.seed, r.grid)
        .context(|| "exhaustion study".into())?;
    let worst = t.rows.iter().filter_map(|x| x.deviation).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
    let mut a = Artifacts::default();
    a.add("exhaustion.csv", output::exhaustion_table(&t.rows).to_bytes());
    a.add("ids.csv", output::ids_table(&t.curves, r.seed).to_bytes());
    Ok(Outcome {
        artifacts: a,
        summary: format!(
            "exhaustion: {} box(es) x {} energies{}",
            r.boxes.len(),
            r.energies.len(),
            worst.map_or(String::new(), |w| format!("; max |N^L - N_Bloch| = {w}"))
        ),
        passed: true,
    })
}

fn verify_run(r: &Resolved) -> Outcome {
    let ledger = verify::run(&verify::Options { level: r.level, seed: r.seed, fault: None }, |_| {});
    let mut a = Artifacts::default();
    a.add("verify.json", output::json_bytes(&ledger.report()));
    Outcome {
        artifacts: a,
        summary: ledger.summary_line(),
        passed: ledger.failures() == 0,
    }
}

/// Operator of the first box for sample 0: `operator.txt` with `row col value`
/// triplets and `measure.csv`.
pub fn export_operator(r: &Resolved) -> Result<Artifacts, NumericError> {
    let l = r.boxes.first().copied().unwrap_or(1);
    let agg = r.lattice.box_agglomerate(l).context(|| format!("box L={l}"))?;
    let cfg = r.model.sample(&agg, r.seed, 0).context(|| "sampling".into())?;
    let h = r.model.assemble(&agg, &cfg).context(|| "assembly".into())?;
    let mut a = Artifacts::default();
    a.add("operator.txt", output::triplet_text(&h).into_bytes());
    a.add("measure.csv", output::measure_table(&h).to_bytes());
    Ok(a)
}
