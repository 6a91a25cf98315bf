//! A model bundles everything needed to turn a random configuration on an
//! agglomerate into a [`Hamiltonian`].

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{Agglomerate, IndexSet, Lattice};
use crate::operators::{
    assemble_periodic, assemble_ram, assemble_rap, Hamiltonian, MetricMode, ModelKind, SingleSiteDeformation,
    SingleSitePotential, SiteFunction,
};
use crate::random::{derive_seed, sample_config, CouplingDistribution, RandomConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// `L + V_per`, no randomness.
    Periodic { v_per: Vec<f64> },
    /// `L + V_per + Σ q_γ v(·−γ)`, i.i.d. `q_γ ~ distribution`.
    Rap { v_per: Vec<f64>, potential: SingleSitePotential, distribution: CouplingDistribution },
    /// `a_ω⁻¹ L` on `ℓ²(a_ω)`, `a_ω = Σ e^{r_γ} u(·−γ)`, i.i.d. `r_γ ~ distribution`.
    Ram { deformation: SingleSiteDeformation, distribution: CouplingDistribution, metric: MetricMode },
}

impl Model {
    pub fn periodic(lattice: &Lattice) -> Model {
        Model::Periodic { v_per: alloc::vec![0.0; lattice.cell_size()] }
    }

    /// RAP with `v = λ·χ_cell` and no periodic potential.
    pub fn cell_alloy(lattice: &Lattice, distribution: CouplingDistribution) -> Result<Model> {
        Ok(Model::Rap {
            v_per: alloc::vec![0.0; lattice.cell_size()],
            potential: SingleSitePotential { profile: SiteFunction::cell_indicator(lattice, 1.0)?, lambda: 1.0 },
            distribution,
        })
    }

    /// RAM with `u = χ_cell` (already normalized).
    pub fn cell_metric(lattice: &Lattice, distribution: CouplingDistribution) -> Result<Model> {
        Ok(Model::Ram {
            deformation: SingleSiteDeformation { profile: SiteFunction::cell_indicator(lattice, 1.0)?, kappa: 1.0 },
            distribution,
            metric: MetricMode::MeasureOnly,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Periodic { .. } => ModelKind::Periodic,
            Model::Rap { .. } => ModelKind::Rap,
            Model::Ram { .. } => ModelKind::Ram,
        }
    }

    pub fn distribution(&self) -> Option<&CouplingDistribution> {
        match self {
            Model::Periodic { .. } => None,
            Model::Rap { distribution, .. } | Model::Ram { distribution, .. } => Some(distribution),
        }
    }

    pub fn single_site(&self) -> Option<&SiteFunction> {
        match self {
            Model::Periodic { .. } => None,
            Model::Rap { potential, .. } => Some(&potential.profile),
            Model::Ram { deformation, .. } => Some(&deformation.profile),
        }
    }

    /// The sites `I⁺` carrying coupling constants relevant to Λ(I); for the
    /// periodic model this is `I` itself.
    pub fn extended_sites(&self, cells: &IndexSet) -> Result<IndexSet> {
        match self.single_site() {
            Some(f) => f.extended_sites(cells),
            None => Ok(cells.clone()),
        }
    }

    /// Configuration for Monte-Carlo sample `index` of the stream `seed`.
    pub fn sample(&self, agg: &Agglomerate, seed: u64, index: u64) -> Result<RandomConfig> {
        let sites = self.extended_sites(&agg.index_set())?;
        Ok(match self.distribution() {
            Some(d) => sample_config(d, &sites, derive_seed(seed, index)),
            None => RandomConfig::constant(&IndexSet::new(), 0.0),
        })
    }

    pub fn assemble(&self, agg: &Agglomerate, config: &RandomConfig) -> Result<Hamiltonian> {
        match self {
            Model::Periodic { v_per } => assemble_periodic(agg, v_per),
            Model::Rap { v_per, potential, .. } => assemble_rap(agg, config, potential, v_per),
            Model::Ram { deformation, metric, .. } => assemble_ram(agg, config, deformation, *metric),
        }
    }

    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        match self {
            Model::Periodic { v_per } | Model::Rap { v_per, .. } => {
                if v_per.len() != lattice.cell_size() {
                    return Err(Error::DimensionMismatch { expected: lattice.cell_size(), found: v_per.len() });
                }
            }
            Model::Ram { deformation, .. } => deformation.check_normalized(lattice)?,
        }
        if let Model::Rap { distribution, .. } = self {
            if distribution.support().0 < 0.0 {
                return Err(Error::InvalidDistribution(
                    "alloy-type potential couplings must be nonnegative".to_string(),
                ));
            }
        }
        Ok(())
    }
}
