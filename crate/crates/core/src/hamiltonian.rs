//! Sector-restricted Hamiltonians.
//!
//! All entries are linear frequencies in MHz. A hopping `(a, b, t)` stands for
//! `t a_a^dag a_b + conj(t) a_b^dag a_a`; the open-boundary bonds carry
//! `t = -amplitude`.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{hop_element, Sector};
use crate::lattice::{bond_amplitude, site_sign, Axis, Corner, Lattice, Variant};
use crate::solver::LinearOperator;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hopping {
    pub a: usize,
    pub b: usize,
    pub amplitude: C64,
}

/// Flux twist `theta` inserted at the links touching one corner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxSpec {
    pub corner: Corner,
    pub theta: f64,
}

/// A point on the pump path: inter-cell hopping `j` (ceiling `j_max`) and
/// staggered potential `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPoint {
    pub j: f64,
    pub j_max: f64,
    pub h: f64,
    pub variant: Variant,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HamiltonianTerms {
    pub hoppings: Vec<Hopping>,
    pub potentials: Vec<f64>,
    corner_links: Option<[usize; 4]>,
}

impl HamiltonianTerms {
    pub fn empty(n_sites: usize) -> Self {
        Self {
            hoppings: Vec::new(),
            potentials: vec![0.0; n_sites],
            corner_links: None,
        }
    }

    /// Superlattice hopping with open boundaries.
    pub fn obc(lattice: &Lattice, j: f64, j_max: f64) -> Result<Self> {
        let mut terms = Self::empty(lattice.n_sites());
        for bond in lattice.bonds() {
            let amp = bond_amplitude(bond, j, j_max)?;
            terms.hoppings.push(Hopping {
                a: bond.a,
                b: bond.b,
                amplitude: C64::new(-amp, 0.0),
            });
        }
        Ok(terms)
    }

    /// Open-boundary hopping plus the staggered potential at `point`.
    pub fn at_point(lattice: &Lattice, point: &PathPoint) -> Result<Self> {
        let mut terms = Self::obc(lattice, point.j, point.j_max)?;
        terms.add_onsite(lattice, point.h, point.variant);
        Ok(terms)
    }

    pub fn n_sites(&self) -> usize {
        self.potentials.len()
    }

    pub fn has_corner_links(&self) -> bool {
        self.corner_links.is_some()
    }

    pub fn add_onsite(&mut self, lattice: &Lattice, h: f64, variant: Variant) {
        for (s, p) in self.potentials.iter_mut().enumerate() {
            *p += h * site_sign(lattice, s, variant);
        }
    }

    /// Adds the four corner-connecting links with amplitude `sign * j`,
    /// optionally twisted by `flux`.
    pub fn add_corner_links(
        &mut self,
        lattice: &Lattice,
        j: f64,
        sign: f64,
        flux: Option<FluxSpec>,
    ) -> Result<()> {
        if j < 0.0 {
            return Err(Error::Domain(format!("corner-link strength {j} < 0")));
        }
        if sign.abs() != 1.0 {
            return Err(Error::Domain(format!("corner-link sign must be +-1, got {sign}")));
        }
        let start = self.hoppings.len();
        for link in lattice.corner_links() {
            self.hoppings.push(Hopping {
                a: link.a,
                b: link.b,
                amplitude: C64::new(sign * j, 0.0),
            });
        }
        self.corner_links = Some([start, start + 1, start + 2, start + 3]);
        if let Some(flux) = flux {
            self.twist_corner(lattice, flux)?;
        }
        Ok(())
    }

    /// Applies `exp(-i theta n_c) H^C exp(i theta n_c)` to the corner links:
    /// creation at the twisted corner picks up `exp(-i theta)`.
    pub fn twist_corner(&mut self, lattice: &Lattice, flux: FluxSpec) -> Result<()> {
        let links = self.corner_links.ok_or_else(|| {
            Error::Usage("flux twist requires corner links to be present".into())
        })?;
        let c = lattice.corner_site(flux.corner);
        let phase = C64::from_polar(1.0, -flux.theta);
        for &k in &links {
            let hop = &mut self.hoppings[k];
            if hop.a == c {
                hop.amplitude *= phase;
            } else if hop.b == c {
                hop.amplitude *= phase.conj();
            }
        }
        Ok(())
    }

    pub fn add_disorder(&mut self, xi: &[f64], w: f64) -> Result<()> {
        if xi.len() != self.n_sites() {
            return Err(Error::Usage(format!(
                "disorder vector has {} entries for {} sites",
                xi.len(),
                self.n_sites()
            )));
        }
        if let Some(bad) = xi.iter().find(|x| x.abs() > 1.0 || !x.is_finite()) {
            return Err(Error::Domain(format!("disorder sample {bad} outside [-1, 1]")));
        }
        if w < 0.0 {
            return Err(Error::Domain(format!("disorder strength {w} < 0")));
        }
        for (p, x) in self.potentials.iter_mut().zip(xi) {
            *p += w * x;
        }
        Ok(())
    }

    /// Gauge with a pi flux through every elementary square: y-axis bonds
    /// (and y-type corner links) in odd columns change sign. This turns the
    /// free-fermion version of the model into the quadrupole (BBH) lattice.
    pub fn thread_plaquette_flux(&mut self, lattice: &Lattice) {
        let mut y_links = Vec::new();
        for b in lattice.bonds() {
            if b.axis == Axis::Y {
                y_links.push((b.a, b.b));
            }
        }
        if self.corner_links.is_some() {
            for b in lattice.corner_links() {
                if b.axis == Axis::Y {
                    y_links.push((b.a, b.b));
                }
            }
        }
        for hop in &mut self.hoppings {
            let is_y = y_links
                .iter()
                .any(|&(a, b)| (a, b) == (hop.a, hop.b) || (b, a) == (hop.a, hop.b));
            let (i, _) = lattice.coords(hop.a);
            let (ib, _) = lattice.coords(hop.b);
            if is_y && i == ib && i % 2 == 1 {
                hop.amplitude = -hop.amplitude;
            }
        }
    }

    /// One-particle matrix `M[a][b] = t`, `M[b][a] = conj(t)`, `M[s][s] = potential`.
    pub fn single_particle_matrix(&self) -> DMatrix<C64> {
        let n = self.n_sites();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for (s, p) in self.potentials.iter().enumerate() {
            m[(s, s)] += C64::new(*p, 0.0);
        }
        for hop in &self.hoppings {
            m[(hop.a, hop.b)] += hop.amplitude;
            m[(hop.b, hop.a)] += hop.amplitude.conj();
        }
        m
    }

    /// Compressed-row matrix of these terms on `sector`.
    pub fn assemble(&self, sector: &Sector) -> SparseOperator {
        assert_eq!(sector.n_sites(), self.n_sites(), "sector/lattice size mismatch");
        let dim = sector.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        let mut row: Vec<(usize, C64)> = Vec::with_capacity(2 * self.hoppings.len() + 1);
        row_ptr.push(0);
        for &bits in sector.states() {
            row.clear();
            let me = sector.rank(bits);
            let diag = diagonal_energy(bits, &self.potentials);
            if diag != 0.0 {
                row.push((me, C64::new(diag, 0.0)));
            }
            for hop in &self.hoppings {
                // <bits| t a_a^dag a_b |c>: c has the boson on b instead of a
                if let Some(c) = hop_element(bits, hop.a, hop.b) {
                    row.push((sector.rank(c), hop.amplitude));
                }
                if let Some(c) = hop_element(bits, hop.b, hop.a) {
                    row.push((sector.rank(c), hop.amplitude.conj()));
                }
            }
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let (c, mut v) = row[k];
                k += 1;
                while k < row.len() && row[k].0 == c {
                    v += row[k].1;
                    k += 1;
                }
                if v != ZERO {
                    cols.push(c as u32);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            dim,
            row_ptr,
            cols,
            values,
        }
    }
}

#[inline]
fn diagonal_energy(mut bits: u64, potentials: &[f64]) -> f64 {
    let mut e = 0.0;
    while bits != 0 {
        e += potentials[bits.trailing_zeros() as usize];
        bits &= bits - 1;
    }
    e
}

/// Options for the free-fermion surrogate matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateOptions {
    pub corner_links: bool,
    pub corner_sign: f64,
    pub flux: Option<FluxSpec>,
    pub plaquette_flux: bool,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            corner_links: true,
            corner_sign: -1.0,
            flux: None,
            plaquette_flux: true,
        }
    }
}

/// Single-particle matrix of the pump Hamiltonian at `point`.
pub fn single_particle_matrix(
    lattice: &Lattice,
    point: &PathPoint,
    disorder: Option<(&[f64], f64)>,
    opts: &SurrogateOptions,
) -> Result<DMatrix<C64>> {
    let mut terms = HamiltonianTerms::at_point(lattice, point)?;
    if opts.corner_links {
        terms.add_corner_links(lattice, point.j, opts.corner_sign, opts.flux)?;
    } else if opts.flux.is_some() {
        return Err(Error::Usage("flux twist requires corner links".into()));
    }
    if opts.plaquette_flux {
        terms.thread_plaquette_flux(lattice);
    }
    if let Some((xi, w)) = disorder {
        terms.add_disorder(xi, w)?;
    }
    Ok(terms.single_particle_matrix())
}

/// Hermitian operator in compressed-row form with sorted, unique columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<C64>,
}

impl SparseOperator {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.values[range])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&(c as u32)) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    /// Largest deviation `|H[r,c] - conj(H[c,r])|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Matrix-market style coordinate dump with 1-based indices.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.dim, self.dim, self.nnz())?;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                writeln!(
                    w,
                    "{} {} {} {}",
                    r + 1,
                    c + 1,
                    crate::output::format_sig(v.re),
                    crate::output::format_sig(v.im)
                )?;
            }
        }
        Ok(())
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        }
    }
}

/// Sum of term groups `sum_g c_g H_g` sharing one sparsity pattern, so that
/// time-dependent coefficients can be swapped without reassembly.
#[derive(Clone, Debug)]
pub struct ParametricOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    groups: Vec<u8>,
    units: Vec<C64>,
    diagonals: Vec<Vec<f64>>,
}

impl ParametricOperator {
    pub fn new(groups: &[HamiltonianTerms], sector: &Sector) -> Self {
        assert!(groups.len() < 256);
        let dim = sector.len();
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut group_ids = Vec::new();
        let mut units = Vec::new();
        let diagonals = groups
            .iter()
            .map(|g| {
                sector
                    .states()
                    .iter()
                    .map(|&b| diagonal_energy(b, &g.potentials))
                    .collect()
            })
            .collect();
        let mut row: Vec<(usize, u8, C64)> = Vec::new();
        for &bits in sector.states() {
            row.clear();
            for (g, terms) in groups.iter().enumerate() {
                for hop in &terms.hoppings {
                    if let Some(c) = hop_element(bits, hop.a, hop.b) {
                        row.push((sector.rank(c), g as u8, hop.amplitude));
                    }
                    if let Some(c) = hop_element(bits, hop.b, hop.a) {
                        row.push((sector.rank(c), g as u8, hop.amplitude.conj()));
                    }
                }
            }
            row.sort_by_key(|&(c, g, _)| (c, g));
            let mut k = 0;
            while k < row.len() {
                let (c, g, mut v) = row[k];
                k += 1;
                while k < row.len() && row[k].0 == c && row[k].1 == g {
                    v += row[k].2;
                    k += 1;
                }
                cols.push(c as u32);
                group_ids.push(g);
                units.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            groups: group_ids,
            units,
            diagonals,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.diagonals.len()
    }

    /// The operator with group coefficients `coeffs`.
    pub fn frame(&self, coeffs: &[f64]) -> OperatorFrame<'_> {
        assert_eq!(coeffs.len(), self.n_groups());
        let mut diag = vec![0.0; self.dim];
        for (c, d) in coeffs.iter().zip(&self.diagonals) {
            if *c != 0.0 {
                for (out, v) in diag.iter_mut().zip(d) {
                    *out += c * v;
                }
            }
        }
        OperatorFrame {
            op: self,
            coeffs: coeffs.to_vec(),
            diag,
        }
    }
}

pub struct OperatorFrame<'a> {
    op: &'a ParametricOperator,
    coeffs: Vec<f64>,
    diag: Vec<f64>,
}

impl OperatorFrame<'_> {
    /// Expectation value `<x|H|x>` for a normalised `x`.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        let mut y = vec![ZERO; x.len()];
        self.apply(x, &mut y);
        crate::fock::dot(x, &y).re
    }
}

impl LinearOperator for OperatorFrame<'_> {
    fn dim(&self) -> usize {
        self.op.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let op = self.op;
        let coeffs = &self.coeffs;
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = x[r] * self.diag[r];
            for k in op.row_ptr[r]..op.row_ptr[r + 1] {
                let c = coeffs[op.groups[k] as usize];
                acc += op.units[k] * x[op.cols[k] as usize] * c;
            }
            *out = acc;
        }
    }
}

/// Wraps a phase into `[0, 2 pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}
