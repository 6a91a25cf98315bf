//! JSON experiment configuration: parsing, validation and resolution into
//! core objects.

use std::path::{Path, PathBuf};

use idslab_core::lattice::LatticeSpec;
use idslab_core::operators::{MetricMode, SingleSiteDeformation, SingleSitePotential, SiteFunction};
use idslab_core::{CouplingDistribution, GroupElement, Lattice, Model};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSection>,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Periodic,
    Rap,
    Ram,
}

/// A builtin lattice name or an inline description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatticeRef {
    Builtin(String),
    Inline(LatticeSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "type")]
    pub kind: ModelType,
    pub lattice: LatticeRef,
    /// Periodic potential per cell vertex; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_per: Option<Vec<f64>>,
    /// Single-site potential (RAP) or deformation (RAM); the cell indicator
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_site: Option<SingleSiteSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_mode: Option<MetricMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleSiteSection {
    pub entries: Vec<SiteEntry>,
    /// Covering constant of the potential (RAP).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Lower bound of the deformation on its cell (RAM).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Divide the deformation by its periodic sum before use (RAM).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteEntry {
    pub offset: Vec<i64>,
    pub vertex: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    pub distribution: CouplingDistribution,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Ids,
    Floquet,
    Wegner,
    Ssf,
    Exhaustion,
    Verify,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Ids => "ids",
            ExperimentKind::Floquet => "floquet",
            ExperimentKind::Wegner => "wegner",
            ExperimentKind::Ssf => "ssf",
            ExperimentKind::Exhaustion => "exhaustion",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    #[default]
    Quick,
    Full,
}

/// Explicit energies or a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergySpec {
    List(Vec<f64>),
    Grid { from: f64, to: f64, count: usize },
}

impl EnergySpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EnergySpec::List(v) => v.clone(),
            EnergySpec::Grid { from, to, count } => idslab_core::ids::energy_grid(*from, *to, *count),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<EnergySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Torus grid points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Metric window `[1/a, a]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<VerifyLevel>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_directory(), formats: default_formats() }
    }
}

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_P: f64 = 2.0;
pub const DEFAULT_A: f64 = 2.0;

/// A schema or consistency violation, located by its JSON field path.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.to_string(), message: message.into() }
    }

    /// The offending field, if any.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            ConfigError::Io { .. } => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { "<root>".to_string() } else { path };
            ConfigError::Invalid { path, message: e.into_inner().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn seed(&self) -> u64 {
        self.disorder.as_ref().map_or(0, |d| d.seed)
    }

    /// Checks every cross-field constraint and builds the core objects.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let lattice = self.lattice()?;
        let model = self.model(&lattice)?;
        let ex = &self.experiment;
        let kind = ex.kind;
        let random = model.distribution().is_some();

        let boxes = match &ex.boxes {
            Some(b) => {
                if b.is_empty() {
                    return Err(ConfigError::at("experiment.boxes", "must not be empty"));
                }
                if b.iter().any(|&l| l == 0) {
                    return Err(ConfigError::at("experiment.boxes", "box lengths must be positive"));
                }
                if b.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(ConfigError::at("experiment.boxes", "box lengths must be strictly increasing"));
                }
                b.clone()
            }
            None => Vec::new(),
        };
        let energies = match &ex.energies {
            Some(spec) => {
                if let EnergySpec::Grid { from, to, count } = spec {
                    if *count == 0 || !(from <= to) {
                        return Err(ConfigError::at("experiment.energies", "grid needs from <= to and count >= 1"));
                    }
                }
                let e = spec.values();
                if e.is_empty() || e.iter().any(|x| !x.is_finite()) {
                    return Err(ConfigError::at("experiment.energies", "energies must be finite and non-empty"));
                }
                if e.windows(2).any(|w| w[0] > w[1]) {
                    return Err(ConfigError::at("experiment.energies", "energies must be sorted ascending"));
                }
                e
            }
            None => Vec::new(),
        };
        let epsilons = match &ex.epsilons {
            Some(e) => {
                if e.is_empty() || e.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                    return Err(ConfigError::at("experiment.epsilons", "half-widths must be positive and finite"));
                }
                if e.windows(2).any(|w| w[0] <= w[1]) {
                    return Err(ConfigError::at("experiment.epsilons", "half-widths must be strictly decreasing"));
                }
                e.clone()
            }
            None => Vec::new(),
        };
        if ex.samples == Some(0) {
            return Err(ConfigError::at("experiment.samples", "at least one sample is required"));
        }
        let samples = match (ex.samples, random) {
            (Some(s), _) => s,
            (None, false) => 1,
            (None, true) if matches!(kind, ExperimentKind::Floquet | ExperimentKind::Verify) => 1,
            (None, true) => return Err(ConfigError::at("experiment.samples", "required for random models")),
        };
        let grid = ex.grid.unwrap_or(DEFAULT_GRID);
        if grid == 0 {
            return Err(ConfigError::at("experiment.grid", "must be positive"));
        }
        let p = ex.p.unwrap_or(DEFAULT_P);
        if !(p > 1.0) {
            return Err(ConfigError::at("experiment.p", "must exceed 1 (use a large value for p = ∞)"));
        }
        let a = ex.a.unwrap_or(DEFAULT_A);
        if !(a > 1.0 && a.is_finite()) {
            return Err(ConfigError::at("experiment.a", "must exceed 1"));
        }

        let require = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::at(field, format!("required for {} experiments", kind.as_str())))
            }
        };
        let require_random = || {
            if random {
                Ok(())
            } else {
                Err(ConfigError::at("model.type", format!("{} experiments need a random model (rap or ram)", kind.as_str())))
            }
        };
        match kind {
            ExperimentKind::Ids | ExperimentKind::Exhaustion => {
                require(ex.boxes.is_some(), "experiment.boxes")?;
                require(ex.energies.is_some(), "experiment.energies")?;
            }
            ExperimentKind::Floquet => {
                if random {
                    return Err(ConfigError::at("model.type", "floquet experiments need a periodic model"));
                }
            }
            ExperimentKind::Wegner => {
                require_random()?;
                require(ex.boxes.is_some(), "experiment.boxes")?;
                require(ex.energies.is_some(), "experiment.energies")?;
                require(ex.epsilons.is_some(), "experiment.epsilons")?;
                if self.model.kind == ModelType::Ram {
                    for &e in &energies {
                        for &eps in &epsilons {
                            if e - eps < 1.0 / a || e + eps > a {
                                return Err(ConfigError::at(
                                    "experiment.epsilons",
                                    format!("[{}, {}] is not contained in [1/a, a] = [{}, {a}]", e - eps, e + eps, 1.0 / a),
                                ));
                            }
                        }
                    }
                }
            }
            ExperimentKind::Ssf => {
                require_random()?;
                require(ex.boxes.is_some(), "experiment.boxes")?;
            }
            ExperimentKind::Verify => {}
        }
        if kind == ExperimentKind::Exhaustion && matches!(self.model.kind, ModelType::Periodic) && lattice.dim() > 2 {
            return Err(ConfigError::at("model.lattice", "Bloch reference supports dimension <= 2"));
        }

        Ok(Resolved {
            kind,
            lattice,
            model,
            boxes,
            energies,
            epsilons,
            samples,
            grid,
            p,
            a,
            seed: self.seed(),
            level: ex.level.unwrap_or_default(),
        })
    }

    fn lattice(&self) -> Result<Lattice, ConfigError> {
        let spec = match &self.model.lattice {
            LatticeRef::Builtin(name) => LatticeSpec::builtin(name).ok_or_else(|| {
                ConfigError::at(
                    "model.lattice",
                    format!("unknown builtin lattice {name:?} (known: {})", LatticeSpec::BUILTIN_NAMES.join(", ")),
                )
            })?,
            LatticeRef::Inline(spec) => spec.clone(),
        };
        Lattice::new(spec).map_err(|e| ConfigError::at("model.lattice", e.to_string()))
    }

    fn model(&self, lattice: &Lattice) -> Result<Model, ConfigError> {
        let m = &self.model;
        let v_per = match &m.v_per {
            Some(v) if v.len() != lattice.cell_size() => {
                return Err(ConfigError::at(
                    "model.v_per",
                    format!("expected {} values (one per cell vertex), found {}", lattice.cell_size(), v.len()),
                ))
            }
            Some(v) if v.iter().any(|x| !x.is_finite()) => {
                return Err(ConfigError::at("model.v_per", "values must be finite"))
            }
            Some(v) => v.clone(),
            None => vec![0.0; lattice.cell_size()],
        };
        let distribution = match (&self.disorder, m.kind) {
            (_, ModelType::Periodic) => None,
            (Some(d), _) => Some(d.distribution.clone()),
            (None, _) => return Err(ConfigError::at("disorder", "required for rap and ram models")),
        };
        if m.kind != ModelType::Ram && m.metric_mode.is_some() {
            return Err(ConfigError::at("model.metric_mode", "only meaningful for ram models"));
        }
        let profile = match &m.single_site {
            Some(s) => {
                if s.entries.is_empty() {
                    return Err(ConfigError::at("model.single_site.entries", "must not be empty"));
                }
                SiteFunction::new(
                    lattice,
                    s.entries.iter().map(|e| (GroupElement::new(e.offset.clone()), e.vertex.as_str(), e.value)),
                )
                .map_err(|e| ConfigError::at("model.single_site.entries", e.to_string()))?
            }
            None => SiteFunction::cell_indicator(lattice, 1.0).expect("cell indicator"),
        };
        let model = match m.kind {
            ModelType::Periodic => {
                if m.single_site.is_some() {
                    return Err(ConfigError::at("model.single_site", "periodic models carry no single-site term"));
                }
                Model::Periodic { v_per }
            }
            ModelType::Rap => {
                let lambda = m.single_site.as_ref().and_then(|s| s.lambda).unwrap_or(1.0);
                if !(lambda > 0.0) {
                    return Err(ConfigError::at("model.single_site.lambda", "must be positive"));
                }
                let dist: CouplingDistribution = distribution.expect("checked above");
                if dist.support().0 < 0.0 {
                    return Err(ConfigError::at(
                        "disorder.distribution",
                        "alloy-type potential couplings must be nonnegative",
                    ));
                }
                Model::Rap { v_per, potential: SingleSitePotential { profile, lambda }, distribution: dist }
            }
            ModelType::Ram => {
                if m.v_per.is_some() {
                    return Err(ConfigError::at("model.v_per", "ram models carry no periodic potential"));
                }
                let s = m.single_site.as_ref();
                let kappa = s.and_then(|s| s.kappa).unwrap_or(1.0);
                if !(kappa > 0.0) {
                    return Err(ConfigError::at("model.single_site.kappa", "must be positive"));
                }
                let mut deformation = SingleSiteDeformation { profile, kappa };
                if s.is_some_and(|s| s.normalize) {
                    deformation = deformation.normalized();
                }
                deformation
                    .check_normalized(lattice)
                    .map_err(|e| ConfigError::at("model.single_site", format!("{e} (set \"normalize\": true)")))?;
                Model::Ram {
                    deformation,
                    distribution: distribution.expect("checked above"),
                    metric: m.metric_mode.unwrap_or_default(),
                }
            }
        };
        model.validate(lattice).map_err(|e| ConfigError::at("model", e.to_string()))?;
        Ok(model)
    }
}

/// A validated configuration with defaults filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub lattice: Lattice,
    pub model: Model,
    pub boxes: Vec<usize>,
    pub energies: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub grid: usize,
    pub p: f64,
    pub a: f64,
    pub seed: u64,
    pub level: VerifyLevel,
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEGNER: &str = r#"{
        "model": {"type": "rap", "lattice": "chain"},
        "disorder": {"distribution": {"kind": "uniform", "lo": 0.0, "hi": 1.0}, "seed": 3},
        "experiment": {"kind": "wegner", "boxes": [8, 16], "energies": [2.0],
                       "epsilons": [0.2, 0.1], "samples": 10}
    }"#;

    #[test]
    fn round_trip() {
        let cfg = ExperimentConfig::from_json(WEGNER).unwrap();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_json(), again.to_json());
        cfg.resolve().unwrap();
    }

    #[test]
    fn inline_lattice_and_grid_energies() {
        let text = r#"{
            "model": {"type": "periodic",
                      "lattice": {"dimension": 1, "cell_vertices": ["x"],
                                  "inter_edges": [{"from": "x", "to": "x", "offset": [1], "weight": 1.0}]},
                      "v_per": [0.5]},
            "experiment": {"kind": "ids", "boxes": [4], "energies": {"from": 0.0, "to": 4.0, "count": 5}}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let r = cfg.resolve().unwrap();
        assert_eq!(r.energies, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.samples, 1);
    }

    fn error_path(text: &str) -> String {
        match ExperimentConfig::from_json(text).and_then(|c| c.resolve().map(|_| ())) {
            Err(e) => e.path().unwrap().to_string(),
            Ok(()) => panic!("accepted: {text}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(error_path(&WEGNER.replace(r#""epsilons": [0.2, 0.1], "#, "")), "experiment.epsilons");
        assert_eq!(error_path(&WEGNER.replace("\"chain\"", "\"hexagon\"")), "model.lattice");
        assert_eq!(error_path(&WEGNER.replace("\"lo\": 0.0", "\"lo\": -1.0")), "disorder.distribution");
        assert_eq!(error_path(&WEGNER.replace("\"samples\": 10", "\"samples\": \"ten\"")), "experiment.samples");
        assert_eq!(error_path(&WEGNER.replace("\"seed\": 3", "\"seed\": 3, \"sead\": 1")), "disorder.sead");
        assert_eq!(error_path(&WEGNER.replace("[8, 16]", "[16, 8]")), "experiment.boxes");
        let ram = WEGNER.replace("\"rap\"", "\"ram\"").replace("\"lo\": 0.0, \"hi\": 1.0", "\"lo\": -0.5, \"hi\": 0.5");
        ExperimentConfig::from_json(&ram.replace("[2.0]", "[1.0]")).unwrap().resolve().unwrap();
        assert_eq!(error_path(&ram.replace("[2.0]", "[0.3]")), "experiment.epsilons");
    }

    #[test]
    fn ram_deformation_must_be_normalized() {
        let text = r#"{
            "model": {"type": "ram", "lattice": "chain",
                      "single_site": {"entries": [{"offset": [0], "vertex": "0", "value": 0.5},
                                                  {"offset": [1], "vertex": "0", "value": 0.25}]}},
            "disorder": {"distribution": {"kind": "uniform", "lo": -0.5, "hi": 0.5}},
            "experiment": {"kind": "ids", "boxes": [4], "energies": [1.0], "samples": 2}
        }"#;
        assert_eq!(error_path(text), "model.single_site");
        let fixed = text.replace("\"value\": 0.25}]", "\"value\": 0.25}], \"normalize\": true");
        ExperimentConfig::from_json(&fixed).unwrap().resolve().unwrap();
    }
}
