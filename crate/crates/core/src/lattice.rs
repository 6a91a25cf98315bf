//! Periodic lattice geometry.
//!
//! A [`LatticeSpec`] describes one fundamental cell (a finite weighted graph)
//! together with edge templates that connect cell `0` to the cell at some
//! nonzero offset in ℤᵈ. Translating the templates by every group element
//! produces the infinite periodic graph. An [`Agglomerate`] is the finite
//! subgraph spanned by the cells of an index set `I ⊂ ℤᵈ`; vertices are
//! numbered lexicographically by `(cell offset, vertex position in the cell)`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

/// An element of the covering group Γ = ℤᵈ, stored as its offset vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(transparent))]
pub struct GroupElement(Vec<i64>);

impl GroupElement {
    pub fn new(offset: Vec<i64>) -> Self {
        GroupElement(offset)
    }

    pub fn zero(dim: usize) -> Self {
        GroupElement(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    fn zip_with(&self, other: &GroupElement, f: impl Fn(i64, i64) -> i64) -> GroupElement {
        assert_eq!(self.dim(), other.dim(), "group elements of different dimension");
        GroupElement(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }
}

impl From<Vec<i64>> for GroupElement {
    fn from(v: Vec<i64>) -> Self {
        GroupElement(v)
    }
}

impl From<&[i64]> for GroupElement {
    fn from(v: &[i64]) -> Self {
        GroupElement(v.to_vec())
    }
}

impl<const N: usize> From<[i64; N]> for GroupElement {
    fn from(v: [i64; N]) -> Self {
        GroupElement(v.to_vec())
    }
}

impl Add for &GroupElement {
    type Output = GroupElement;
    fn add(self, rhs: &GroupElement) -> GroupElement {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &GroupElement {
    type Output = GroupElement;
    fn sub(self, rhs: &GroupElement) -> GroupElement {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &GroupElement {
    type Output = GroupElement;
    fn neg(self) -> GroupElement {
        GroupElement(self.0.iter().map(|&a| -a).collect())
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Finite set of group elements, kept sorted for deterministic iteration.
pub type IndexSet = BTreeSet<GroupElement>;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntraEdge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

/// Edge template from `from` in cell 0 to `to` in the cell at `offset`.
/// The reversed template is implied and must not be listed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterEdge {
    pub from: String,
    pub to: String,
    pub offset: Vec<i64>,
    pub weight: f64,
}

/// Declarative description of a ℤᵈ-periodic weighted graph.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatticeSpec {
    pub dimension: usize,
    pub cell_vertices: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub intra_edges: Vec<IntraEdge>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub inter_edges: Vec<InterEdge>,
}

impl LatticeSpec {
    /// ℤ¹ path: one vertex per cell, nearest-neighbour unit bonds.
    pub fn chain() -> Self {
        LatticeSpec {
            dimension: 1,
            cell_vertices: vec!["0".to_string()],
            intra_edges: Vec::new(),
            inter_edges: vec![InterEdge {
                from: "0".to_string(),
                to: "0".to_string(),
                offset: vec![1],
                weight: 1.0,
            }],
        }
    }

    /// ℤ² square lattice: one vertex per cell, unit bonds along both axes.
    pub fn square() -> Self {
        let bond = |offset: Vec<i64>| InterEdge {
            from: "0".to_string(),
            to: "0".to_string(),
            offset,
            weight: 1.0,
        };
        LatticeSpec {
            dimension: 2,
            cell_vertices: vec!["0".to_string()],
            intra_edges: Vec::new(),
            inter_edges: vec![bond(vec![1, 0]), bond(vec![0, 1])],
        }
    }

    /// Comb on ℤ¹: a backbone vertex `b` carrying two pendant vertices `p1`,
    /// `p2`. The antisymmetric pendant state is a compactly supported
    /// eigenfunction at energy 1, producing a flat band.
    pub fn pendant_pair() -> Self {
        let s = |x: &str| x.to_string();
        LatticeSpec {
            dimension: 1,
            cell_vertices: vec![s("b"), s("p1"), s("p2")],
            intra_edges: vec![
                IntraEdge { a: s("b"), b: s("p1"), weight: 1.0 },
                IntraEdge { a: s("b"), b: s("p2"), weight: 1.0 },
            ],
            inter_edges: vec![InterEdge { from: s("b"), to: s("b"), offset: vec![1], weight: 1.0 }],
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "chain" => Some(Self::chain()),
            "square" => Some(Self::square()),
            "pendant-pair" => Some(Self::pendant_pair()),
            _ => None,
        }
    }

    pub const BUILTIN_NAMES: [&'static str; 3] = ["chain", "square", "pendant-pair"];
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LocalEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct LocalTemplate {
    pub from: usize,
    pub to: usize,
    pub offset: GroupElement,
    pub weight: f64,
}

/// A validated [`LatticeSpec`] with labels resolved to cell-local indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    spec: LatticeSpec,
    labels: BTreeMap<String, usize>,
    intra: Vec<LocalEdge>,
    inter: Vec<LocalTemplate>,
    degrees: Vec<f64>,
}

impl Lattice {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        if spec.dimension == 0 {
            return Err(Error::InvalidLattice("dimension must be positive".into()));
        }
        if spec.cell_vertices.is_empty() {
            return Err(Error::InvalidLattice("cell has no vertices".into()));
        }
        let mut labels = BTreeMap::new();
        for (i, l) in spec.cell_vertices.iter().enumerate() {
            if labels.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidLattice(format!("duplicate vertex label `{l}`")));
            }
        }
        let lookup = |l: &str| {
            labels
                .get(l)
                .copied()
                .ok_or_else(|| Error::InvalidLattice(format!("edge references unknown vertex `{l}`")))
        };
        let check_weight = |w: f64| {
            if w > 0.0 && w.is_finite() {
                Ok(w)
            } else {
                Err(Error::InvalidLattice(format!("edge weight {w} is not strictly positive")))
            }
        };

        let nc = spec.cell_vertices.len();
        let mut degrees = vec![0.0; nc];
        let mut intra = Vec::with_capacity(spec.intra_edges.len());
        for e in &spec.intra_edges {
            let (a, b, weight) = (lookup(&e.a)?, lookup(&e.b)?, check_weight(e.weight)?);
            if a == b {
                return Err(Error::InvalidLattice(format!("self-loop at `{}` with zero offset", e.a)));
            }
            degrees[a] += weight;
            degrees[b] += weight;
            intra.push(LocalEdge { a, b, weight });
        }
        let mut inter = Vec::with_capacity(spec.inter_edges.len());
        for e in &spec.inter_edges {
            let (from, to, weight) = (lookup(&e.from)?, lookup(&e.to)?, check_weight(e.weight)?);
            if e.offset.len() != spec.dimension {
                return Err(Error::DimensionMismatch { expected: spec.dimension, found: e.offset.len() });
            }
            let offset = GroupElement::from(e.offset.clone());
            if offset.is_zero() {
                return Err(Error::InvalidLattice(format!(
                    "inter-cell template `{}`→`{}` has zero offset; list it as an intra-cell edge",
                    e.from, e.to
                )));
            }
            degrees[from] += weight;
            degrees[to] += weight;
            inter.push(LocalTemplate { from, to, offset, weight });
        }
        Ok(Lattice { spec, labels, intra, inter, degrees })
    }

    pub fn builtin(name: &str) -> Option<Self> {
        LatticeSpec::builtin(name).map(|s| Lattice::new(s).expect("builtin lattices are valid"))
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension
    }

    /// Number of vertices in the fundamental cell.
    pub fn cell_size(&self) -> usize {
        self.spec.cell_vertices.len()
    }

    pub fn label(&self, local: usize) -> &str {
        &self.spec.cell_vertices[local]
    }

    pub fn local_index(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    /// Weighted degree of each cell vertex in the infinite lattice.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub(crate) fn intra_edges(&self) -> &[LocalEdge] {
        &self.intra
    }

    pub(crate) fn templates(&self) -> &[LocalTemplate] {
        &self.inter
    }

    /// Offsets of neighbouring cells (both orientations of every template).
    pub fn neighbour_offsets(&self) -> BTreeSet<GroupElement> {
        self.inter.iter().flat_map(|t| [t.offset.clone(), -&t.offset]).collect()
    }

    pub fn check_element(&self, g: &GroupElement) -> Result<()> {
        if g.dim() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), found: g.dim() })
        }
    }

    pub fn agglomerate(&self, cells: &IndexSet) -> Result<Agglomerate> {
        build_agglomerate(self, cells)
    }

    /// Agglomerate of the box `{0..L-1}ᵈ`.
    pub fn box_agglomerate(&self, length: usize) -> Result<Agglomerate> {
        if length == 0 {
            return Err(Error::InvalidArgument("box length must be positive".into()));
        }
        build_agglomerate(self, &box_set(self.dim(), length))
    }
}

/// A weighted edge between two agglomerate vertices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Finite union Λ(I) of translated fundamental cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Agglomerate {
    lattice: Lattice,
    cells: Vec<GroupElement>,
    cell_pos: BTreeMap<GroupElement, usize>,
    edges: Vec<Edge>,
}

pub fn build_agglomerate(lattice: &Lattice, cells: &IndexSet) -> Result<Agglomerate> {
    if cells.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    for g in cells {
        lattice.check_element(g)?;
    }
    let cells: Vec<GroupElement> = cells.iter().cloned().collect();
    let cell_pos: BTreeMap<GroupElement, usize> =
        cells.iter().enumerate().map(|(i, g)| (g.clone(), i)).collect();
    let nc = lattice.cell_size();
    let mut edges = Vec::new();
    for (pos, g) in cells.iter().enumerate() {
        for e in lattice.intra_edges() {
            edges.push(Edge { i: pos * nc + e.a, j: pos * nc + e.b, weight: e.weight });
        }
        for t in lattice.templates() {
            if let Some(&other) = cell_pos.get(&(g + &t.offset)) {
                edges.push(Edge { i: pos * nc + t.from, j: other * nc + t.to, weight: t.weight });
            }
        }
    }
    Ok(Agglomerate { lattice: lattice.clone(), cells, cell_pos, edges })
}

impl Agglomerate {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Number of vertices, `|I| · |cell|`.
    pub fn len(&self) -> usize {
        self.cells.len() * self.lattice.cell_size()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// The index set `I`, sorted.
    pub fn cells(&self) -> &[GroupElement] {
        &self.cells
    }

    pub fn index_set(&self) -> IndexSet {
        self.cells.iter().cloned().collect()
    }

    pub fn contains_cell(&self, g: &GroupElement) -> bool {
        self.cell_pos.contains_key(g)
    }

    /// Interior edges (both endpoints inside Λ(I)).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_index(&self, cell: &GroupElement, local: usize) -> Option<usize> {
        if local >= self.lattice.cell_size() {
            return None;
        }
        self.cell_pos.get(cell).map(|&p| p * self.lattice.cell_size() + local)
    }

    pub fn vertex_index_by_label(&self, cell: &GroupElement, label: &str) -> Option<usize> {
        self.vertex_index(cell, self.lattice.local_index(label)?)
    }

    /// Inverse of [`Agglomerate::vertex_index`]: `(cell, local vertex)`.
    pub fn vertex(&self, index: usize) -> (&GroupElement, usize) {
        let nc = self.lattice.cell_size();
        (&self.cells[index / nc], index % nc)
    }

    /// Full-lattice degree of every vertex, including edges that leave Λ(I).
    pub fn degrees(&self) -> Vec<f64> {
        let d = self.lattice.degrees();
        (0..self.len()).map(|i| d[i % d.len()]).collect()
    }

    /// The agglomerate of the translated index set `γ·I`.
    pub fn translate(&self, by: &GroupElement) -> Result<Agglomerate> {
        self.lattice.check_element(by)?;
        build_agglomerate(&self.lattice, &translate_set(&self.index_set(), by))
    }
}

pub fn translate_set(set: &IndexSet, by: &GroupElement) -> IndexSet {
    set.iter().map(|g| g + by).collect()
}

/// The box `{0..L-1}ᵈ`.
pub fn box_set(dim: usize, length: usize) -> IndexSet {
    let total = length.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            let mut c = vec![0i64; dim];
            for slot in c.iter_mut().rev() {
                *slot = (k % length) as i64;
                k /= length;
            }
            GroupElement(c)
        })
        .collect()
}

/// Axis-aligned Følner boxes `I_L = {0..L-1}ᵈ` for strictly increasing `L`.
pub fn folner_boxes(lattice: &Lattice, lengths: &[usize]) -> Result<Vec<IndexSet>> {
    if lengths.iter().any(|&l| l == 0) {
        return Err(Error::InvalidArgument("box lengths must be positive".into()));
    }
    if lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("box lengths must be strictly increasing".into()));
    }
    Ok(lengths.iter().map(|&l| box_set(lattice.dim(), l)).collect())
}

/// Elements of `set` adjacent (through some edge template) to the complement.
pub fn boundary(lattice: &Lattice, set: &IndexSet) -> IndexSet {
    let nbrs = lattice.neighbour_offsets();
    set.iter()
        .filter(|g| nbrs.iter().any(|o| !set.contains(&(*g + o))))
        .cloned()
        .collect()
}

pub fn boundary_fraction(lattice: &Lattice, set: &IndexSet) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    boundary(lattice, set).len() as f64 / set.len() as f64
}

/// `I⁺ = { γ : (γ + supp) ∩ I ≠ ∅ }`, the sites whose single-site function
/// touches `I`.
pub fn support_extension(set: &IndexSet, support: &BTreeSet<GroupElement>) -> Result<IndexSet> {
    let mut dims = set.iter().chain(support.iter()).map(|g| g.dim());
    if let Some(d) = dims.next() {
        if let Some(bad) = dims.find(|&x| x != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad });
        }
    }
    Ok(set.iter().flat_map(|i| support.iter().map(move |s| i - s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&[i64]]) -> IndexSet {
        items.iter().map(|c| GroupElement::from(*c)).collect()
    }

    #[test]
    fn chain_path_of_three() {
        let lat = Lattice::builtin("chain").unwrap();
        let agg = lat.agglomerate(&set(&[&[0], &[1], &[2]])).unwrap();
        assert_eq!(agg.len(), 3);
        assert_eq!(agg.edges().len(), 2);
        assert_eq!(agg.degrees(), vec![2.0; 3]);
    }

    #[test]
    fn pendant_pair_two_cells() {
        let lat = Lattice::builtin("pendant-pair").unwrap();
        let agg = lat.agglomerate(&set(&[&[0], &[1]])).unwrap();
        assert_eq!(agg.len(), 6);
        assert_eq!(agg.edges().len(), 5);
        assert_eq!(lat.degrees(), &[4.0, 1.0, 1.0]);
        assert_eq!(agg.vertex_index_by_label(&GroupElement::from([1]), "p2"), Some(5));
    }

    #[test]
    fn translate_is_isomorphic() {
        let lat = Lattice::builtin("chain").unwrap();
        let a = lat.agglomerate(&set(&[&[0]])).unwrap();
        let b = a.translate(&GroupElement::from([5])).unwrap();
        assert_eq!(b.cells(), &[GroupElement::from([5])]);
        assert_eq!(a.edges(), b.edges());
    }

    #[test]
    fn agglomerate_errors() {
        let lat = Lattice::builtin("square").unwrap();
        assert_eq!(lat.agglomerate(&IndexSet::new()), Err(Error::EmptyIndexSet));
        assert!(matches!(
            lat.agglomerate(&set(&[&[0]])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = LatticeSpec::chain();
        spec.inter_edges[0].weight = 0.0;
        assert!(Lattice::new(spec).is_err());
        let mut spec = LatticeSpec::chain();
        spec.inter_edges[0].to = "x".into();
        assert!(Lattice::new(spec).is_err());
        let mut spec = LatticeSpec::chain();
        spec.inter_edges[0].offset = vec![0];
        assert!(Lattice::new(spec).is_err());
        let mut spec = LatticeSpec::pendant_pair();
        spec.intra_edges[0].b = "b".into();
        assert!(Lattice::new(spec).is_err());
    }

    #[test]
    fn folner_boxes_and_boundary() {
        let chain = Lattice::builtin("chain").unwrap();
        let boxes = folner_boxes(&chain, &[2, 4]).unwrap();
        assert_eq!(boxes[0], set(&[&[0], &[1]]));
        assert_eq!(boxes[1].len(), 4);
        let big = box_set(1, 100);
        assert_eq!(boundary_fraction(&chain, &big), 2.0 / 100.0);
        let sq = Lattice::builtin("square").unwrap();
        assert_eq!(folner_boxes(&sq, &[3]).unwrap()[0].len(), 9);
        assert!(folner_boxes(&chain, &[0, 2]).is_err());
        assert!(folner_boxes(&chain, &[4, 4]).is_err());
    }

    #[test]
    fn support_extension_examples() {
        let i = set(&[&[0], &[1], &[2]]);
        assert_eq!(support_extension(&i, &set(&[&[0]])).unwrap(), i);
        assert_eq!(
            support_extension(&i, &set(&[&[0], &[1]])).unwrap(),
            set(&[&[-1], &[0], &[1], &[2]])
        );
        assert!(support_extension(&IndexSet::new(), &set(&[&[0]])).unwrap().is_empty());
        assert!(support_extension(&i, &set(&[&[0, 0]])).is_err());
    }
}
