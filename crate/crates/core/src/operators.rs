//! Finite-volume Hamiltonians with Dirichlet boundary conditions.
//!
//! A [`Hamiltonian`] is a real matrix `H` together with a positive vertex
//! measure `m`; `H` is self-adjoint for `⟨φ,ψ⟩ = Σ m(x) φ(x) ψ(x)`.
//!
//! The Dirichlet Laplacian keeps the full lattice degree on the diagonal and
//! drops every bond that leaves Λ(I). Alloy-type potentials add a diagonal
//! `V_per + Σ q_γ v(·−γ)`. Alloy-type metrics act conformally: the random
//! factor `a_ω = Σ e^{r_γ} u(·−γ)` becomes the vertex measure and
//! `H = a_ω⁻¹ L`. A global shift `r ↦ r + t` then scales every eigenvalue by
//! exactly `e^{-t}`, and the multiplication operator `S = (a₁/a₂)^{1/2}` is
//! unitary from `ℓ²(a₁)` to `ℓ²(a₂)`. (On a manifold the density exponent is
//! `d/4`; on a graph the volume density is `a_ω` itself, hence `1/2`.)

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{Agglomerate, GroupElement, IndexSet, Lattice};
use crate::random::RandomConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum ModelKind {
    Periodic,
    Rap,
    Ram,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Periodic => "periodic",
            ModelKind::Rap => "rap",
            ModelKind::Ram => "ram",
        }
    }
}

/// How the conformal factor of an alloy-type metric enters the operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum MetricMode {
    /// `m = a_ω`, edge weights untouched.
    #[default]
    MeasureOnly,
    /// `m = a_ω` and every bond additionally weighted by
    /// `((a_x + a_y)/2)^{1 − 2/d}`, the graph analogue of the conformal weight
    /// of the Dirichlet form. Global scaling then gives `e^{-2t/d}`.
    MeasureAndEdges,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: DMatrix<f64>,
    measure: DVector<f64>,
    kind: ModelKind,
}

impl Hamiltonian {
    /// Builds a Hamiltonian from raw parts; the measure must be positive.
    pub fn new(matrix: DMatrix<f64>, measure: DVector<f64>, kind: ModelKind) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != measure.len() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: measure.len() });
        }
        if let Some((index, &value)) = measure.iter().enumerate().find(|(_, &m)| !(m > 0.0 && m.is_finite())) {
            return Err(Error::NonPositiveMeasure { index, value });
        }
        Ok(Hamiltonian { matrix, measure, kind })
    }

    /// Hamiltonian with counting measure.
    pub fn with_unit_measure(matrix: DMatrix<f64>, kind: ModelKind) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::from_element(n, 1.0), kind)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn measure(&self) -> &DVector<f64> {
        &self.measure
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// `vol Λ = Σ m(x)`.
    pub fn volume(&self) -> f64 {
        crate::stats::pairwise_sum(self.measure.as_slice())
    }

    /// `max |m(x)H(x,y) − m(y)H(y,x)|`.
    pub fn self_adjointness_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                let d = self.measure[i] * self.matrix[(i, j)] - self.measure[j] * self.matrix[(j, i)];
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// `H + diag(values)` (multiplication operators commute with the measure).
    pub fn add_diagonal(&self, values: &[f64]) -> Result<Hamiltonian> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: values.len() });
        }
        let mut out = self.clone();
        for (i, v) in values.iter().enumerate() {
            out.matrix[(i, i)] += v;
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Hamiltonian {
        Hamiltonian { matrix: &self.matrix * factor, measure: self.measure.clone(), kind: self.kind }
    }
}

/// Finitely supported function on the periodic graph, keyed by
/// `(cell offset, cell-local vertex)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteFunction {
    dim: usize,
    cell_size: usize,
    values: BTreeMap<(GroupElement, usize), f64>,
}

impl SiteFunction {
    /// Builds from `(offset, vertex label, value)` entries; values must be ≥ 0
    /// and at least one must be positive.
    pub fn new<'a>(lattice: &Lattice, entries: impl IntoIterator<Item = (GroupElement, &'a str, f64)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (offset, label, value) in entries {
            lattice.check_element(&offset)?;
            let local = lattice
                .local_index(label)
                .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown cell vertex `{label}`")))?;
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "single site values must be finite and nonnegative, got {value}"
                )));
            }
            if value > 0.0 {
                *values.entry((offset, local)).or_insert(0.0) += value;
            }
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("single site function vanishes identically".into()));
        }
        Ok(SiteFunction { dim: lattice.dim(), cell_size: lattice.cell_size(), values })
    }

    /// The characteristic function of cell 0 scaled by `value`.
    pub fn cell_indicator(lattice: &Lattice, value: f64) -> Result<Self> {
        let zero = GroupElement::zero(lattice.dim());
        let labels: Vec<_> = lattice.spec().cell_vertices.clone();
        Self::new(lattice, labels.iter().map(|l| (zero.clone(), l.as_str(), value)))
    }

    pub fn value(&self, offset: &GroupElement, local: usize) -> f64 {
        self.values.get(&(offset.clone(), local)).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&GroupElement, usize, f64)> {
        self.values.iter().map(|((g, l), v)| (g, *l, *v))
    }

    /// Cell offsets on which the function is nonzero.
    pub fn support_offsets(&self) -> BTreeSet<GroupElement> {
        self.values.keys().map(|(g, _)| g.clone()).collect()
    }

    /// `Σ_γ f(γ⁻¹ x)` evaluated at each vertex of one periodicity cell.
    pub fn periodic_sum(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cell_size];
        for ((_, l), v) in &self.values {
            sums[*l] += v;
        }
        sums
    }

    /// Values on cell 0.
    pub fn cell_values(&self) -> Vec<f64> {
        let zero = GroupElement::zero(self.dim);
        (0..self.cell_size).map(|l| self.value(&zero, l)).collect()
    }

    /// `I⁺` for this single-site function.
    pub fn extended_sites(&self, cells: &IndexSet) -> Result<IndexSet> {
        crate::lattice::support_extension(cells, &self.support_offsets())
    }

    /// The translate `f(·−γ)` restricted to the agglomerate, as a vertex vector.
    pub fn translate_on(&self, agg: &Agglomerate, site: &GroupElement) -> Vec<f64> {
        let mut out = vec![0.0; agg.len()];
        for ((offset, local), v) in &self.values {
            if let Some(i) = agg.vertex_index(&(site + offset), *local) {
                out[i] += v;
            }
        }
        out
    }

    pub fn scaled_per_vertex(&self, factors: &[f64]) -> SiteFunction {
        SiteFunction {
            dim: self.dim,
            cell_size: self.cell_size,
            values: self.values.iter().map(|((g, l), v)| ((g.clone(), *l), v * factors[*l])).collect(),
        }
    }
}

/// Single site potential `v ≥ 0` with coverage constant `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleSitePotential {
    pub profile: SiteFunction,
    pub lambda: f64,
}

/// Single site deformation `u ≥ 0` with coverage constant `κ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleSiteDeformation {
    pub profile: SiteFunction,
    pub kappa: f64,
}

impl SingleSiteDeformation {
    /// Rescales `u` so that `Σ_γ u(γ⁻¹x) ≡ 1`. The coverage constant is
    /// rescaled by the largest periodic sum, which keeps `u ≥ κ χ_cell` true.
    pub fn normalized(&self) -> SingleSiteDeformation {
        let sums = self.profile.periodic_sum();
        let factors: Vec<f64> = sums.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 1.0 }).collect();
        let largest = sums.iter().copied().fold(0.0, f64::max);
        SingleSiteDeformation { profile: self.profile.scaled_per_vertex(&factors), kappa: self.kappa / largest }
    }

    pub fn check_normalized(&self, lattice: &Lattice) -> Result<()> {
        for (l, s) in self.profile.periodic_sum().iter().enumerate() {
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::UnnormalizedDeformation { vertex: lattice.label(l).to_string(), sum: *s });
            }
        }
        Ok(())
    }
}

/// Dirichlet graph Laplacian `D − A` on Λ(I), counting measure.
pub fn assemble_laplacian(agg: &Agglomerate) -> Hamiltonian {
    let n = agg.len();
    let mut m = DMatrix::from_diagonal(&DVector::from_vec(agg.degrees()));
    for e in agg.edges() {
        m[(e.i, e.j)] -= e.weight;
        m[(e.j, e.i)] -= e.weight;
    }
    Hamiltonian { matrix: m, measure: DVector::from_element(n, 1.0), kind: ModelKind::Periodic }
}

fn check_v_per(agg: &Agglomerate, v_per: &[f64]) -> Result<()> {
    if v_per.len() != agg.lattice().cell_size() {
        return Err(Error::DimensionMismatch { expected: agg.lattice().cell_size(), found: v_per.len() });
    }
    if v_per.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("periodic potential must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Periodic operator `L + V_per` on Λ(I).
pub fn assemble_periodic(agg: &Agglomerate, v_per: &[f64]) -> Result<Hamiltonian> {
    check_v_per(agg, v_per)?;
    let mut h = assemble_laplacian(agg);
    for i in 0..agg.len() {
        h.matrix[(i, i)] += v_per[agg.vertex(i).1];
    }
    Ok(h)
}

/// The random potential `V_ω(x) = V_per(x) + Σ_{γ∈I⁺} q_γ v(x−γ)` on Λ(I).
pub fn rap_potential(
    agg: &Agglomerate,
    config: &RandomConfig,
    potential: &SingleSitePotential,
    v_per: &[f64],
) -> Result<Vec<f64>> {
    check_v_per(agg, v_per)?;
    let mut out: Vec<f64> = (0..agg.len()).map(|i| v_per[agg.vertex(i).1]).collect();
    for site in potential.profile.extended_sites(&agg.index_set())? {
        let q = config.get(&site).ok_or_else(|| Error::MissingCoupling(site.clone()))?;
        if q < 0.0 || !q.is_finite() {
            return Err(Error::NegativeCoupling { site, value: q });
        }
        for (offset, local, v) in potential.profile.entries() {
            if let Some(i) = agg.vertex_index(&(&site + offset), local) {
                out[i] += q * v;
            }
        }
    }
    Ok(out)
}

/// Alloy-type potential operator `L + V_ω`, counting measure.
pub fn assemble_rap(
    agg: &Agglomerate,
    config: &RandomConfig,
    potential: &SingleSitePotential,
    v_per: &[f64],
) -> Result<Hamiltonian> {
    let v = rap_potential(agg, config, potential, v_per)?;
    let mut h = assemble_laplacian(agg);
    for (i, vi) in v.iter().enumerate() {
        h.matrix[(i, i)] += vi;
    }
    h.kind = ModelKind::Rap;
    Ok(h)
}

/// Conformal factor `a_ω(x) = Σ_{γ∈I⁺} e^{r_γ} u(x−γ)` on Λ(I).
pub fn conformal_factor(agg: &Agglomerate, config: &RandomConfig, deformation: &SingleSiteDeformation) -> Result<Vec<f64>> {
    deformation.check_normalized(agg.lattice())?;
    let mut a = vec![0.0; agg.len()];
    for site in deformation.profile.extended_sites(&agg.index_set())? {
        let r = config.get(&site).ok_or_else(|| Error::MissingCoupling(site.clone()))?;
        let weight = libm::exp(r);
        for (offset, local, u) in deformation.profile.entries() {
            if let Some(i) = agg.vertex_index(&(&site + offset), local) {
                a[i] += weight * u;
            }
        }
    }
    Ok(a)
}

/// Alloy-type metric operator `a_ω⁻¹ L` on `ℓ²(a_ω)`.
pub fn assemble_ram(
    agg: &Agglomerate,
    config: &RandomConfig,
    deformation: &SingleSiteDeformation,
    mode: MetricMode,
) -> Result<Hamiltonian> {
    let a = conformal_factor(agg, config, deformation)?;
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(Error::NonPositiveMeasure { index, value });
    }
    let mut l = match mode {
        MetricMode::MeasureOnly => assemble_laplacian(agg).matrix,
        MetricMode::MeasureAndEdges => {
            let power = 1.0 - 2.0 / agg.lattice().dim() as f64;
            let degrees = agg.degrees();
            // Bonds leaving Λ(I) only see the factor at their inner endpoint.
            let mut diag: Vec<f64> = (0..agg.len()).map(|i| degrees[i] * libm::pow(a[i], power)).collect();
            let mut m = DMatrix::zeros(agg.len(), agg.len());
            for e in agg.edges() {
                let w = e.weight * libm::pow(0.5 * (a[e.i] + a[e.j]), power);
                diag[e.i] += w - e.weight * libm::pow(a[e.i], power);
                diag[e.j] += w - e.weight * libm::pow(a[e.j], power);
                m[(e.i, e.j)] -= w;
                m[(e.j, e.i)] -= w;
            }
            for (i, d) in diag.iter().enumerate() {
                m[(i, i)] += d;
            }
            m
        }
    };
    for (i, ai) in a.iter().enumerate() {
        let inv = 1.0 / ai;
        l.row_mut(i).iter_mut().for_each(|x| *x *= inv);
    }
    Ok(Hamiltonian { matrix: l, measure: DVector::from_vec(a), kind: ModelKind::Ram })
}

/// The unitary multiplication operator `S = diag((a₁/a₂)^{1/2})` from
/// `ℓ²(a₁)` to `ℓ²(a₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureTransform {
    factors: DVector<f64>,
    source: DVector<f64>,
    target: DVector<f64>,
}

pub fn s_transform(source: &[f64], target: &[f64]) -> Result<MeasureTransform> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: source.len(), found: target.len() });
    }
    for (index, &value) in source.iter().chain(target).enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositiveMeasure { index: index % source.len().max(1), value });
        }
    }
    Ok(MeasureTransform {
        factors: DVector::from_iterator(source.len(), source.iter().zip(target).map(|(a, b)| libm::sqrt(a / b))),
        source: DVector::from_column_slice(source),
        target: DVector::from_column_slice(target),
    })
}

impl MeasureTransform {
    pub fn factors(&self) -> &DVector<f64> {
        &self.factors
    }

    pub fn apply(&self, phi: &DVector<f64>) -> DVector<f64> {
        phi.component_mul(&self.factors)
    }

    /// `S H S⁻¹`, self-adjoint in `ℓ²(a₂)`. `H` must live on `ℓ²(a₁)`.
    pub fn conjugate(&self, h: &Hamiltonian) -> Result<Hamiltonian> {
        if h.dim() != self.factors.len() {
            return Err(Error::DimensionMismatch { expected: self.factors.len(), found: h.dim() });
        }
        let rel = (h.measure() - &self.source).amax() / self.source.amax();
        if rel > 1e-12 {
            return Err(Error::Incompatible("operator does not act on the source measure of S".into()));
        }
        let n = h.dim();
        let m = DMatrix::from_fn(n, n, |i, j| self.factors[i] * h.matrix()[(i, j)] / self.factors[j]);
        Ok(Hamiltonian { matrix: m, measure: self.target.clone(), kind: h.kind() })
    }
}

/// Outcome of the coverage conditions for a single-site function.
#[derive(Clone, Debug, PartialEq)]
pub struct CoveringReport {
    /// `f ≥ c·χ_cell` on cell 0.
    pub strong: bool,
    /// `Σ_γ f(γ⁻¹x) ≥ c` on one periodicity cell.
    pub weak: bool,
    pub min_cell_value: f64,
    pub min_periodic_sum: f64,
}

pub fn check_covering_condition(profile: &SiteFunction, constant: f64) -> CoveringReport {
    let min_cell_value = profile.cell_values().into_iter().fold(f64::INFINITY, f64::min);
    let min_periodic_sum = profile.periodic_sum().into_iter().fold(f64::INFINITY, f64::min);
    CoveringReport {
        strong: min_cell_value >= constant,
        weak: min_periodic_sum >= constant,
        min_cell_value,
        min_periodic_sum,
    }
}

/// `M^{1/2} H M^{-1/2}`: an ordinary symmetric matrix with the spectrum of `H`.
pub fn symmetrize(h: &Hamiltonian) -> DMatrix<f64> {
    let n = h.dim();
    let s: Vec<f64> = h.measure().iter().map(|&m| libm::sqrt(m)).collect();
    if h.measure().iter().all(|&m| m == 1.0) {
        return h.matrix().clone();
    }
    DMatrix::from_fn(n, n, |i, j| s[i] * h.matrix()[(i, j)] / s[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::box_set;

    fn chain(l: usize) -> Agglomerate {
        Lattice::builtin("chain").unwrap().box_agglomerate(l).unwrap()
    }

    fn cell_potential(lat: &Lattice) -> SingleSitePotential {
        SingleSitePotential { profile: SiteFunction::cell_indicator(lat, 1.0).unwrap(), lambda: 1.0 }
    }

    #[test]
    fn dirichlet_chain_laplacian() {
        let h = assemble_laplacian(&chain(3));
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        assert_eq!(h.matrix(), &expect);
        assert_eq!(assemble_laplacian(&chain(1)).matrix(), &DMatrix::from_element(1, 1, 2.0));
    }

    #[test]
    fn rap_single_cell() {
        let agg = chain(1);
        let v = cell_potential(agg.lattice());
        let cfg = RandomConfig::constant(&agg.index_set(), 3.0);
        let h = assemble_rap(&agg, &cfg, &v, &[1.0]).unwrap();
        assert_eq!(h.matrix()[(0, 0)], 6.0);
        let zero = RandomConfig::constant(&agg.index_set(), 0.0);
        let h0 = assemble_rap(&chain(1), &zero, &v, &[0.0]).unwrap();
        assert_eq!(h0.matrix(), assemble_laplacian(&chain(1)).matrix());
    }

    #[test]
    fn rap_errors() {
        let agg = chain(3);
        let v = cell_potential(agg.lattice());
        let partial = RandomConfig::constant(&box_set(1, 2), 0.5);
        assert!(matches!(assemble_rap(&agg, &partial, &v, &[0.0]), Err(Error::MissingCoupling(_))));
        let neg = RandomConfig::constant(&box_set(1, 3), -0.5);
        assert!(matches!(assemble_rap(&agg, &neg, &v, &[0.0]), Err(Error::NegativeCoupling { .. })));
    }

    #[test]
    fn ram_hand_example() {
        let agg = chain(3);
        let u = SingleSiteDeformation { profile: SiteFunction::cell_indicator(agg.lattice(), 1.0).unwrap(), kappa: 1.0 };
        let mut vals = BTreeMap::new();
        vals.insert(GroupElement::from([0]), libm::log(2.0));
        vals.insert(GroupElement::from([1]), 0.0);
        vals.insert(GroupElement::from([2]), 0.0);
        let h = assemble_ram(&agg, &RandomConfig::from_values(vals), &u, MetricMode::MeasureOnly).unwrap();
        assert!((h.measure()[0] - 2.0).abs() < 1e-15);
        assert!((h.matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((h.matrix()[(0, 1)] + 0.5).abs() < 1e-15);
        assert_eq!(h.matrix()[(0, 2)], 0.0);
        assert!(h.self_adjointness_defect() < 1e-13);
    }

    #[test]
    fn ram_rejects_unnormalized() {
        let agg = chain(2);
        let u = SingleSiteDeformation { profile: SiteFunction::cell_indicator(agg.lattice(), 2.0).unwrap(), kappa: 1.0 };
        let cfg = RandomConfig::constant(&agg.index_set(), 0.0);
        assert!(matches!(
            assemble_ram(&agg, &cfg, &u, MetricMode::MeasureOnly),
            Err(Error::UnnormalizedDeformation { .. })
        ));
        let h = assemble_ram(&agg, &cfg, &u.normalized(), MetricMode::MeasureOnly).unwrap();
        assert_eq!(h.matrix(), assemble_laplacian(&agg).matrix());
    }

    #[test]
    fn s_transform_scalar() {
        let s = s_transform(&[4.0], &[1.0]).unwrap();
        assert_eq!(s.factors()[0], 2.0);
        let id = s_transform(&[1.5, 2.0], &[1.5, 2.0]).unwrap();
        assert_eq!(id.factors().as_slice(), &[1.0, 1.0]);
        assert!(s_transform(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn covering_examples() {
        let chain = Lattice::builtin("chain").unwrap();
        let v = SiteFunction::cell_indicator(&chain, 1.0).unwrap();
        assert!(check_covering_condition(&v, 1.0).strong);

        let pp = Lattice::builtin("pendant-pair").unwrap();
        let z = GroupElement::from([0]);
        let v = SiteFunction::new(&pp, [(z.clone(), "p1", 1.0), (z.clone(), "p2", 1.0)]).unwrap();
        let r = check_covering_condition(&v, 0.5);
        assert!(!r.strong && !r.weak);

        let v = SiteFunction::new(&chain, [(z, "0", 0.5), (GroupElement::from([1]), "0", 0.5)]).unwrap();
        let r = check_covering_condition(&v, 1.0);
        assert!(r.weak && !r.strong);
    }

    #[test]
    fn symmetrize_unit_measure_is_identity() {
        let h = assemble_laplacian(&chain(4));
        assert_eq!(&symmetrize(&h), h.matrix());
    }
}
