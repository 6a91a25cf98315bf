//! Floquet–Bloch analysis of the periodic operator `L + V_per`.
//!
//! For quasi-momentum `θ ∈ [0, 2π)ᵈ` the twisted operator `H^θ` acts on one
//! cell, each edge template `(a → b, offset)` contributing
//! `−w·e^{iθ·offset}` at `(a, b)`. Band functions `E_n(θ)` are sampled on the
//! uniform grid `{2πj/G}ᵈ`, which is the quadrature rule for the Haar measure
//! of the dual torus; the Bloch IDS is then
//! `N(E) = |cell|⁻¹ Σ_n |{θ : E_n(θ) < E}| / Gᵈ`.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::lattice::Lattice;

#[derive(Clone, Debug, PartialEq)]
pub struct BlochMatrix {
    pub theta: Vec<f64>,
    pub matrix: DMatrix<Complex<f64>>,
}

impl BlochMatrix {
    /// `max |H(x,y) − conj H(y,x)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.matrix;
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let z = m[(i, j)] - m[(j, i)].conj();
                worst = worst.max(libm::hypot(z.re, z.im));
            }
        }
        worst
    }

    pub fn max_imaginary(&self) -> f64 {
        self.matrix.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Sorted eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite);
        }
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

pub fn twisted_hamiltonian(lattice: &Lattice, v_per: &[f64], theta: &[f64]) -> Result<BlochMatrix> {
    if theta.len() != lattice.dim() {
        return Err(Error::DimensionMismatch { expected: lattice.dim(), found: theta.len() });
    }
    if v_per.len() != lattice.cell_size() {
        return Err(Error::DimensionMismatch { expected: lattice.cell_size(), found: v_per.len() });
    }
    let n = lattice.cell_size();
    let mut m = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    for (i, (d, v)) in lattice.degrees().iter().zip(v_per).enumerate() {
        m[(i, i)] = Complex::new(d + v, 0.0);
    }
    for e in lattice.intra_edges() {
        m[(e.a, e.b)] -= Complex::new(e.weight, 0.0);
        m[(e.b, e.a)] -= Complex::new(e.weight, 0.0);
    }
    for t in lattice.templates() {
        let phase: f64 = t.offset.coords().iter().zip(theta).map(|(&k, th)| k as f64 * th).sum();
        let z = Complex::new(t.weight * libm::cos(phase), t.weight * libm::sin(phase));
        m[(t.from, t.to)] -= z;
        m[(t.to, t.from)] -= z.conj();
    }
    Ok(BlochMatrix { theta: theta.to_vec(), matrix: m })
}

/// `{2πj/G}ᵈ` in lexicographic order.
pub fn torus_grid(dim: usize, points: usize) -> Vec<Vec<f64>> {
    let total = points.pow(dim as u32);
    let step = 2.0 * core::f64::consts::PI / points as f64;
    (0..total)
        .map(|mut k| {
            let mut th = alloc::vec![0.0; dim];
            for slot in th.iter_mut().rev() {
                *slot = (k % points) as f64 * step;
                k /= points;
            }
            th
        })
        .collect()
}

/// Band functions on a uniform torus grid; `bands[k]` holds the sorted
/// eigenvalues at `thetas[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandStructure {
    pub grid_points: usize,
    pub thetas: Vec<Vec<f64>>,
    pub bands: Vec<Vec<f64>>,
}

/// A band whose width is below tolerance; `band` counts from 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatBand {
    pub band: usize,
    pub energy: f64,
    pub width: f64,
}

pub const DEFAULT_FLAT_TOL: f64 = 1e-9;

pub fn band_structure(lattice: &Lattice, v_per: &[f64], grid_points: usize) -> Result<BandStructure> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument("band structure needs at least 2 grid points per axis".into()));
    }
    let thetas = torus_grid(lattice.dim(), grid_points);
    let bands = crate::exec::try_map_indexed(thetas.len(), |k| {
        twisted_hamiltonian(lattice, v_per, &thetas[k])?.eigenvalues()
    })?;
    Ok(BandStructure { grid_points, thetas, bands })
}

impl BandStructure {
    pub fn band_count(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    /// Values of band `n` (0-based) across the grid.
    pub fn band(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        self.bands.iter().map(move |b| b[n])
    }

    /// `(min, max)` of band `n` (0-based).
    pub fn band_range(&self, n: usize) -> (f64, f64) {
        self.band(n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)))
    }

    /// Quadrature Bloch IDS `N(E)`.
    pub fn bloch_ids(&self, energy: f64) -> f64 {
        let below: usize = self.bands.iter().map(|b| b.partition_point(|&e| e < energy)).sum();
        below as f64 / (self.bands.len() * self.band_count()) as f64
    }

    /// Bands with `max_θ E_n − min_θ E_n < tol`; by the periodic theory these
    /// are exactly the ℓ²-eigenvalues of the periodic operator, i.e. the
    /// discontinuities of the IDS.
    pub fn flat_bands(&self, tol: f64) -> Vec<FlatBand> {
        (0..self.band_count())
            .filter_map(|n| {
                let (lo, hi) = self.band_range(n);
                (hi - lo < tol).then_some(FlatBand { band: n + 1, energy: 0.5 * (lo + hi), width: hi - lo })
            })
            .collect()
    }
}

pub fn bloch_ids(bands: &BandStructure, energy: f64) -> f64 {
    bands.bloch_ids(energy)
}

pub fn flat_band_detect(bands: &BandStructure, tol: f64) -> Vec<FlatBand> {
    bands.flat_bands(tol)
}
