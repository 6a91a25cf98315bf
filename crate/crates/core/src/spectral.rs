//! Eigenvalues of finite Hamiltonians and first-order perturbation checks.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::{Agglomerate, GroupElement};
use crate::model::Model;
use crate::operators::{check_covering_condition, symmetrize, Hamiltonian};
use crate::random::{substitute, RandomConfig};

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Sorted eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut ev: Vec<f64> = symmetric_part(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Sorted eigenpairs of a real symmetric matrix; eigenvectors are columns.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_finite(m)?;
    let n = m.nrows();
    let max_abs = m.amax();
    let eig = SymmetricEigen::try_new(symmetric_part(m), f64::EPSILON, 10_000 + 100 * n)
        .ok_or(Error::EigenNonConvergence { n, max_abs })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Nondecreasing eigenvalues `E₁ ≤ … ≤ E_n` with optional eigenvectors,
/// orthonormal in `ℓ²(m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    eigenvectors: Option<DMatrix<f64>>,
    measure: DVector<f64>,
    degeneracy_tol: f64,
}

pub fn eigensolve(h: &Hamiltonian, want_vectors: bool) -> Result<Spectrum> {
    let b = symmetrize(h);
    let (eigenvalues, eigenvectors) = if want_vectors {
        let (vals, mut vecs) = symmetric_eigen(&b)?;
        for (r, m) in h.measure().iter().enumerate() {
            let s = 1.0 / libm::sqrt(*m);
            vecs.row_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        (vals, Some(vecs))
    } else {
        (symmetric_eigenvalues(&b)?, None)
    };
    Ok(Spectrum::from_parts(eigenvalues, eigenvectors, h.measure().clone()))
}

impl Spectrum {
    fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Option<DMatrix<f64>>, measure: DVector<f64>) -> Self {
        let diameter = match (eigenvalues.first(), eigenvalues.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        };
        let scale = if diameter > 0.0 { diameter } else { eigenvalues.iter().fold(1.0f64, |a, e| a.max(e.abs())) };
        Spectrum { eigenvalues, eigenvectors, measure, degeneracy_tol: 1e-8 * scale }
    }

    /// Spectrum from bare eigenvalues (sorted here), counting measure.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let n = eigenvalues.len();
        Self::from_parts(eigenvalues, None, DVector::from_element(n, 1.0))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvectors(&self) -> Option<&DMatrix<f64>> {
        self.eigenvectors.as_ref()
    }

    pub fn measure(&self) -> &DVector<f64> {
        &self.measure
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.degeneracy_tol
    }

    /// `gap_flags()[i]` marks `|E_{i+1} − E_i| < degeneracy_tol`.
    pub fn gap_flags(&self) -> Vec<bool> {
        self.eigenvalues.windows(2).map(|w| w[1] - w[0] < self.degeneracy_tol).collect()
    }

    pub fn is_simple(&self, index: usize) -> bool {
        self.nearest_gap(index) >= self.degeneracy_tol
    }

    fn nearest_gap(&self, index: usize) -> f64 {
        let e = &self.eigenvalues;
        let below = if index > 0 { e[index] - e[index - 1] } else { f64::INFINITY };
        let above = if index + 1 < e.len() { e[index + 1] - e[index] } else { f64::INFINITY };
        below.min(above)
    }

    fn require_simple(&self, index: usize) -> Result<()> {
        if index >= self.len() {
            return Err(Error::InvalidArgument(alloc::format!("eigenvalue index {index} out of range")));
        }
        if !self.is_simple(index) {
            return Err(Error::DegenerateEigenvalue { index, gap: self.nearest_gap(index) });
        }
        Ok(())
    }

    /// `#{i : E_i < E}`.
    pub fn count_below(&self, energy: f64) -> usize {
        self.eigenvalues.partition_point(|&e| e < energy)
    }

    /// `#{i : E − ε ≤ E_i ≤ E + ε}`.
    pub fn projection_trace(&self, energy: f64, eps: f64) -> usize {
        let lo = self.eigenvalues.partition_point(|&e| e < energy - eps);
        let hi = self.eigenvalues.partition_point(|&e| e <= energy + eps);
        hi.saturating_sub(lo)
    }

    /// `Σ_i φ(E_i)`.
    pub fn trace_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        crate::stats::pairwise_sum(&vals)
    }

    /// `⟨ψ_i, f ψ_i⟩_m` for a multiplication operator `f`.
    pub fn expectation(&self, index: usize, f: &[f64]) -> Result<f64> {
        let v = self
            .eigenvectors
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("spectrum was computed without eigenvectors".into()))?;
        Ok((0..self.measure.len()).map(|x| self.measure[x] * v[(x, index)] * v[(x, index)] * f[x]).sum())
    }

    /// `max_i ‖Hψ_i − E_iψ_i‖_m / (1 + |E_i|)`.
    pub fn max_residual(&self, h: &Hamiltonian) -> Option<f64> {
        let v = self.eigenvectors.as_ref()?;
        let mut worst = 0.0f64;
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            let psi = v.column(i);
            let r = h.matrix() * psi - psi * e;
            let norm = libm::sqrt(r.iter().zip(self.measure.iter()).map(|(x, m)| m * x * x).sum::<f64>());
            worst = worst.max(norm / (1.0 + e.abs()));
        }
        Some(worst)
    }

    /// `max_{i,j} |⟨ψ_i,ψ_j⟩_m − δ_ij|`.
    pub fn orthonormality_defect(&self) -> Option<f64> {
        let v = self.eigenvectors.as_ref()?;
        let mv = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| self.measure[r] * v[(r, c)]);
        let gram = v.transpose() * mv;
        Some((gram - DMatrix::identity(v.ncols(), v.ncols())).amax())
    }
}

/// Coupling derivatives of one eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct HellmannFeynman {
    pub index: usize,
    pub energy: f64,
    /// `∂E_n/∂q_γ = ⟨ψ_n, v(·−γ) ψ_n⟩` for every `γ ∈ I⁺`.
    pub derivatives: Vec<(GroupElement, f64)>,
    pub sum: f64,
    /// Coverage constant `λ`, when `v` satisfies the strong or weak covering
    /// condition; `sum ≥ λ` is then guaranteed.
    pub covering_lambda: Option<f64>,
}

impl HellmannFeynman {
    pub fn lower_bound_holds(&self) -> Option<bool> {
        self.covering_lambda.map(|l| self.sum >= l * (1.0 - 1e-12))
    }
}

/// Hellmann–Feynman derivatives of the simple eigenvalue `E_index` of an
/// alloy-type potential operator with respect to every coupling in `I⁺`.
pub fn hellmann_feynman(model: &Model, agg: &Agglomerate, config: &RandomConfig, index: usize) -> Result<HellmannFeynman> {
    let Model::Rap { potential, .. } = model else {
        return Err(Error::WrongModel { expected: "alloy-type potential" });
    };
    let spec = eigensolve(&model.assemble(agg, config)?, true)?;
    spec.require_simple(index)?;
    let mut derivatives = Vec::new();
    for site in potential.profile.extended_sites(&agg.index_set())? {
        let v = potential.profile.translate_on(agg, &site);
        let d = spec.expectation(index, &v)?;
        derivatives.push((site, d));
    }
    let sum = derivatives.iter().map(|(_, d)| d).sum();
    let cover = check_covering_condition(&potential.profile, potential.lambda);
    Ok(HellmannFeynman {
        index,
        energy: spec.eigenvalues()[index],
        derivatives,
        sum,
        covering_lambda: (cover.strong || cover.weak).then_some(potential.lambda),
    })
}

fn eigenvalue_at(model: &Model, agg: &Agglomerate, config: &RandomConfig, index: usize) -> Result<f64> {
    let ev = eigensolve(&model.assemble(agg, config)?, false)?;
    ev.eigenvalues()
        .get(index)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(alloc::format!("eigenvalue index {index} out of range")))
}

/// Central difference `(E_n(θ_γ^{c+h}ω) − E_n(θ_γ^{c−h}ω)) / 2h` by
/// reassembly and re-diagonalization.
pub fn coupling_finite_difference(
    model: &Model,
    agg: &Agglomerate,
    config: &RandomConfig,
    index: usize,
    site: &GroupElement,
    step: f64,
) -> Result<f64> {
    let c = config.get(site).ok_or_else(|| Error::MissingCoupling(site.clone()))?;
    let up = eigenvalue_at(model, agg, &substitute(config, site, c + step), index)?;
    let down = eigenvalue_at(model, agg, &substitute(config, site, c - step), index)?;
    Ok((up - down) / (2.0 * step))
}

/// One global shift `r ↦ r + t` of an alloy-type metric configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSample {
    pub shift: f64,
    /// `max_k |E_k(ω+t) − e^{-t}E_k(ω)| / (e^{-t} max_k |E_k(ω)|)`.
    pub max_relative_error: f64,
    pub energy_shifted: f64,
    pub energy_predicted: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformalReport {
    pub index: usize,
    pub energy: f64,
    pub scaling: Vec<ScalingSample>,
    /// `Σ_γ ∂E_n/∂r_γ` by central differences.
    pub fd_sum: f64,
    /// `|fd_sum + E_n|`.
    pub fd_residual: f64,
    pub fd_tolerance: f64,
}

impl ConformalReport {
    pub fn passed(&self, scaling_tol: f64) -> bool {
        self.fd_residual <= self.fd_tolerance && self.scaling.iter().all(|s| s.max_relative_error <= scaling_tol)
    }
}

pub const FD_STEP: f64 = 1e-5;

/// Checks `Σ_γ ∂E_n/∂r_γ = −E_n` for an alloy-type metric, both exactly
/// through `E_n(ω + t·1) = e^{-t}E_n(ω)` at `t = ±ln 2` and coordinatewise by
/// finite differences.
pub fn conformal_derivative_check(model: &Model, agg: &Agglomerate, config: &RandomConfig, index: usize) -> Result<ConformalReport> {
    if !matches!(model, Model::Ram { .. }) {
        return Err(Error::WrongModel { expected: "alloy-type metric" });
    }
    let base = eigensolve(&model.assemble(agg, config)?, false)?;
    base.require_simple(index)?;
    let energy = base.eigenvalues()[index];
    let radius = base.eigenvalues().iter().fold(0.0f64, |a, e| a.max(e.abs()));

    let mut scaling = Vec::new();
    for t in [core::f64::consts::LN_2, -core::f64::consts::LN_2] {
        let shifted = eigensolve(&model.assemble(agg, &config.offset_all(t))?, false)?;
        let factor = libm::exp(-t);
        let worst = shifted
            .eigenvalues()
            .iter()
            .zip(base.eigenvalues())
            .map(|(s, e)| (s - factor * e).abs())
            .fold(0.0, f64::max);
        scaling.push(ScalingSample {
            shift: t,
            max_relative_error: if radius > 0.0 { worst / (factor * radius) } else { worst },
            energy_shifted: shifted.eigenvalues()[index],
            energy_predicted: factor * energy,
        });
    }

    let sites: Vec<GroupElement> = model.extended_sites(&agg.index_set())?.into_iter().collect();
    let parts = sites
        .iter()
        .map(|s| coupling_finite_difference(model, agg, config, index, s, FD_STEP))
        .collect::<Result<Vec<_>>>()?;
    let fd_sum = crate::stats::pairwise_sum(&parts);
    Ok(ConformalReport {
        index,
        energy,
        scaling,
        fd_sum,
        fd_residual: (fd_sum + energy).abs(),
        fd_tolerance: 1e-6 * (1.0 + energy.abs()),
    })
}

/// Counting function values `N(E)` at each energy.
pub fn counts(spec: &Spectrum, energies: &[f64]) -> Vec<usize> {
    energies.iter().map(|&e| spec.count_below(e)).collect()
}

/// Indices whose eigenvalue is simple.
pub fn simple_indices(spec: &Spectrum) -> Vec<usize> {
    (0..spec.len()).filter(|&i| spec.is_simple(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::lattice::{Lattice, LatticeSpec};
    use crate::operators::{assemble_laplacian, ModelKind};
    use crate::random::{sample_config, CouplingDistribution};

    #[test]
    fn diagonal_is_sorted() {
        let h = Hamiltonian::with_unit_measure(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])), ModelKind::Periodic).unwrap();
        let s = eigensolve(&h, true).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 2.0, 3.0]);
        assert!(s.max_residual(&h).unwrap() < 1e-12);
    }

    #[test]
    fn dirichlet_chain_closed_form() {
        let agg = Lattice::builtin("chain").unwrap().box_agglomerate(3).unwrap();
        let s = eigensolve(&assemble_laplacian(&agg), false).unwrap();
        let r2 = core::f64::consts::SQRT_2;
        for (got, want) in s.eigenvalues().iter().zip([2.0 - r2, 2.0, 2.0 + r2]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert_eq!(s.count_below(2.0), 1);
        assert_eq!(s.count_below(-1.0), 0);
        assert_eq!(s.count_below(10.0), 3);
        assert_eq!(s.projection_trace(2.0, 10.0), 3);
        assert_eq!(s.projection_trace(1.0, 0.0), 0);
        assert_eq!(s.projection_trace(2.0, 0.0), 1);
    }

    #[test]
    fn pendant_flat_states_in_finite_box() {
        let agg = Lattice::builtin("pendant-pair").unwrap().box_agglomerate(7).unwrap();
        let s = eigensolve(&assemble_laplacian(&agg), false).unwrap();
        assert_eq!(s.projection_trace(1.0, 1e-9), 7);
    }

    #[test]
    fn hellmann_feynman_scalar() {
        let lat = Lattice::builtin("chain").unwrap();
        let agg = lat.box_agglomerate(1).unwrap();
        let model = Model::cell_alloy(&lat, CouplingDistribution::uniform(0.0, 1.0).unwrap()).unwrap();
        let cfg = RandomConfig::constant(&agg.index_set(), 0.3);
        let hf = hellmann_feynman(&model, &agg, &cfg, 0).unwrap();
        assert!((hf.sum - 1.0).abs() < 1e-15);
        assert_eq!(hf.lower_bound_holds(), Some(true));
    }

    #[test]
    fn hellmann_feynman_refuses_degenerate() {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let agg = lat.box_agglomerate(3).unwrap();
        let model = Model::Rap {
            v_per: vec![0.0; 3],
            potential: crate::operators::SingleSitePotential {
                profile: crate::operators::SiteFunction::new(&lat, [(GroupElement::from([0]), "b", 1.0)]).unwrap(),
                lambda: 1.0,
            },
            distribution: CouplingDistribution::uniform(0.0, 1.0).unwrap(),
        };
        let cfg = RandomConfig::constant(&agg.index_set(), 0.5);
        let s = eigensolve(&model.assemble(&agg, &cfg).unwrap(), false).unwrap();
        let flat = s.eigenvalues().iter().position(|e| (e - 1.0).abs() < 1e-9).unwrap();
        assert!(matches!(hellmann_feynman(&model, &agg, &cfg, flat), Err(Error::DegenerateEigenvalue { .. })));
    }

    #[test]
    fn conformal_halving_and_zero_mode() {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let agg = lat.box_agglomerate(4).unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let cfg = sample_config(model.distribution().unwrap(), &agg.index_set(), 11);
        let r = conformal_derivative_check(&model, &agg, &cfg, 0).unwrap();
        assert!((r.scaling[0].energy_shifted - 0.5 * r.energy).abs() < 1e-13);
        assert!(r.passed(1e-12), "{r:?}");

        // A finite cell graph with no bonds leaving it: Neumann-like, E₀ = 0.
        let spec = LatticeSpec {
            dimension: 1,
            cell_vertices: vec!["x".into(), "y".into()],
            intra_edges: vec![crate::lattice::IntraEdge { a: "x".into(), b: "y".into(), weight: 1.0 }],
            inter_edges: vec![],
        };
        let lat = Lattice::new(spec).unwrap();
        let agg = lat.box_agglomerate(1).unwrap();
        let model = Model::cell_metric(&lat, CouplingDistribution::uniform(-0.5, 0.5).unwrap()).unwrap();
        let cfg = RandomConfig::constant(&agg.index_set(), 0.2);
        let r = conformal_derivative_check(&model, &agg, &cfg, 0).unwrap();
        assert!(r.energy.abs() < 1e-14 && r.fd_sum.abs() < 1e-9);
    }
}
