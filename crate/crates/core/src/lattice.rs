//! Square superlattice geometry.
//!
//! Sites are indexed `s = i + n_side * j` with `i` the column (x) and `j` the
//! row (y), both 0-based. Bonds alternate between intra-cell and inter-cell
//! along each axis, starting with an intra-cell bond at the lattice edge, so
//! the lattice decomposes into `(n_side/2)^2` decoupled 2x2 plaquettes when
//! only intra-cell bonds are switched on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest side length whose site count still fits a 64-bit occupation mask.
pub const MAX_SIDE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Charge transported towards the diagonal corners c1 and c3.
    Diag,
    /// Charge transported towards the left corners c1 and c2.
    Nondiag,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Diag => "diag",
            Variant::Nondiag => "nondiag",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diag" => Ok(Variant::Diag),
            "nondiag" => Ok(Variant::Nondiag),
            other => Err(Error::Config(format!(
                "unknown pump variant `{other}` (expected `diag` or `nondiag`)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondClass {
    Intra,
    Inter,
    CornerLink,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub axis: Axis,
    pub class: BondClass,
}

/// The four lattice corners, labelled counterclockwise from the origin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    C1,
    C2,
    C3,
    C4,
}

impl Corner {
    pub const ALL: [Corner; 4] = [Corner::C1, Corner::C2, Corner::C3, Corner::C4];

    /// Zero-based position in [`Corner::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based label as used in printed output (`c1`..`c4`).
    pub fn label(self) -> usize {
        self.index() + 1
    }

    pub fn from_label(label: usize) -> Result<Self> {
        match label {
            1..=4 => Ok(Corner::ALL[label - 1]),
            _ => Err(Error::Domain(format!(
                "corner label must be in 1..=4, got {label}"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Lattice {
    n_side: usize,
    bonds: Vec<Bond>,
    corners: [usize; 4],
}

impl Lattice {
    pub fn new(n_side: usize) -> Result<Self> {
        if n_side < 2 || n_side % 2 != 0 || n_side > MAX_SIDE {
            return Err(Error::Config(format!(
                "lattice side must be even and in 2..={MAX_SIDE}, got {n_side}"
            )));
        }
        let site = |i: usize, j: usize| i + n_side * j;
        let class_of = |lower: usize| {
            if lower % 2 == 0 {
                BondClass::Intra
            } else {
                BondClass::Inter
            }
        };
        let mut bonds = Vec::with_capacity(2 * n_side * (n_side - 1));
        for j in 0..n_side {
            for i in 0..n_side {
                if i + 1 < n_side {
                    bonds.push(Bond {
                        a: site(i, j),
                        b: site(i + 1, j),
                        axis: Axis::X,
                        class: class_of(i),
                    });
                }
                if j + 1 < n_side {
                    bonds.push(Bond {
                        a: site(i, j),
                        b: site(i, j + 1),
                        axis: Axis::Y,
                        class: class_of(j),
                    });
                }
            }
        }
        let last = n_side - 1;
        let corners = [site(0, 0), site(0, last), site(last, last), site(last, 0)];
        Ok(Self {
            n_side,
            bonds,
            corners,
        })
    }

    pub fn n_side(&self) -> usize {
        self.n_side
    }

    pub fn n_sites(&self) -> usize {
        self.n_side * self.n_side
    }

    pub fn site(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n_side && j < self.n_side);
        i + self.n_side * j
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s % self.n_side, s / self.n_side)
    }

    /// Centred coordinates `(i - D, j - D)` with `D = (n_side - 1) / 2`.
    pub fn centred_coords(&self, s: usize) -> (f64, f64) {
        let d = (self.n_side as f64 - 1.0) / 2.0;
        let (i, j) = self.coords(s);
        (i as f64 - d, j as f64 - d)
    }

    /// Open-boundary bonds, ordered by site then axis.
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn corner_site(&self, corner: Corner) -> usize {
        self.corners[corner.index()]
    }

    pub fn corner_sites(&self) -> [usize; 4] {
        self.corners
    }

    /// The four links closing the corners into a ring, c1-c2, c2-c3, c3-c4, c4-c1.
    pub fn corner_links(&self) -> [Bond; 4] {
        let c = self.corners;
        let link = |a: usize, b: usize, axis: Axis| Bond {
            a,
            b,
            axis,
            class: BondClass::CornerLink,
        };
        [
            link(c[0], c[1], Axis::Y),
            link(c[1], c[2], Axis::X),
            link(c[2], c[3], Axis::Y),
            link(c[3], c[0], Axis::X),
        ]
    }

    /// Counterclockwise quarter turn `(i, j) -> (j, n-1-i)`; maps c1 to c2, c2 to c3, and so on.
    pub fn rotate_c4(&self, s: usize) -> usize {
        let (i, j) = self.coords(s);
        self.site(j, self.n_side - 1 - i)
    }

    /// Reflection `j -> n-1-j`.
    pub fn reflect_y(&self, s: usize) -> usize {
        let (i, j) = self.coords(s);
        self.site(i, self.n_side - 1 - j)
    }

    /// Sites of the 2x2 plaquette with cell coordinates `(ci, cj)`, in site order.
    pub fn plaquette_sites(&self, ci: usize, cj: usize) -> [usize; 4] {
        let (i, j) = (2 * ci, 2 * cj);
        [
            self.site(i, j),
            self.site(i + 1, j),
            self.site(i, j + 1),
            self.site(i + 1, j + 1),
        ]
    }

    /// The site adjacent to `corner` along the y axis.
    pub fn y_neighbour_of_corner(&self, corner: Corner) -> usize {
        let (i, j) = self.coords(self.corner_site(corner));
        let jn = if j == 0 { 1 } else { j - 1 };
        self.site(i, jn)
    }
}

/// Hopping magnitude of a bond for inter-cell strength `j` and ceiling `j_max`.
pub fn bond_amplitude(bond: &Bond, j: f64, j_max: f64) -> Result<f64> {
    if !(0.0..=j_max).contains(&j) {
        return Err(Error::Domain(format!(
            "hopping J = {j} MHz outside [0, {j_max}] MHz"
        )));
    }
    Ok(match bond.class {
        BondClass::Intra => j_max - j,
        BondClass::Inter | BondClass::CornerLink => j,
    })
}

/// Sign multiplying `h` in the on-site term `h * sign(s) * n_s`.
///
/// For `h > 0` the diagonal pattern lowers sites with even `i + j`, which
/// includes c1 and c3; the non-diagonal pattern lowers even columns, which
/// include c1 and c2.
pub fn site_sign(lattice: &Lattice, s: usize, variant: Variant) -> f64 {
    let (i, j) = lattice.coords(s);
    let even = match variant {
        Variant::Diag => (i + j) % 2 == 0,
        Variant::Nondiag => i % 2 == 0,
    };
    if even {
        -1.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bond_counts() {
        for (n, expected) in [(2, 4), (4, 24), (6, 60), (8, 112)] {
            let lat = Lattice::new(n).unwrap();
            assert_eq!(lat.bonds().len(), expected);
            assert_eq!(lat.n_sites(), n * n);
        }
    }

    #[test]
    fn rejects_bad_sides() {
        for n in [0, 1, 3, 5, 10] {
            assert!(matches!(Lattice::new(n), Err(Error::Config(_))));
        }
    }

    #[test]
    fn site_mapping_is_bijective() {
        let lat = Lattice::new(6).unwrap();
        let mut seen = vec![false; lat.n_sites()];
        for j in 0..6 {
            for i in 0..6 {
                let s = lat.site(i, j);
                assert_eq!(lat.coords(s), (i, j));
                assert!(!seen[s]);
                seen[s] = true;
            }
        }
    }

    #[test]
    fn centred_coordinates_span_half_integers() {
        let lat = Lattice::new(4).unwrap();
        assert_eq!(lat.centred_coords(0), (-1.5, -1.5));
        assert_eq!(lat.centred_coords(15), (1.5, 1.5));
    }

    #[test]
    fn amplitudes_at_schedule_points() {
        let lat = Lattice::new(4).unwrap();
        let intra = lat.bonds()[0];
        assert_eq!(intra.class, BondClass::Intra);
        let inter = *lat
            .bonds()
            .iter()
            .find(|b| b.class == BondClass::Inter)
            .unwrap();
        assert_eq!(bond_amplitude(&intra, 0.0, 3.0).unwrap(), 3.0);
        assert_eq!(bond_amplitude(&inter, 0.0, 3.0).unwrap(), 0.0);
        assert_eq!(bond_amplitude(&intra, 1.5, 3.0).unwrap(), 1.5);
        assert!(matches!(
            bond_amplitude(&intra, 3.5, 3.0),
            Err(Error::Domain(_))
        ));
        assert!(bond_amplitude(&intra, -0.1, 3.0).is_err());
    }

    #[test]
    fn staggering_follows_column_parity() {
        let lat = Lattice::new(4).unwrap();
        // x bond between (1,0) and (2,0) is inter-cell
        let b = lat
            .bonds()
            .iter()
            .find(|b| b.a == lat.site(1, 0) && b.b == lat.site(2, 0))
            .unwrap();
        assert_eq!(b.class, BondClass::Inter);
        let b = lat
            .bonds()
            .iter()
            .find(|b| b.a == lat.site(3, 2) && b.b == lat.site(3, 3))
            .unwrap();
        assert_eq!((b.axis, b.class), (Axis::Y, BondClass::Intra));
    }

    #[test]
    fn site_signs() {
        let lat = Lattice::new(4).unwrap();
        assert_eq!(site_sign(&lat, lat.site(0, 0), Variant::Diag), -1.0);
        assert_eq!(site_sign(&lat, lat.site(0, 3), Variant::Diag), 1.0);
        assert_eq!(site_sign(&lat, lat.site(0, 2), Variant::Nondiag), -1.0);
        for v in [Variant::Diag, Variant::Nondiag] {
            let total: f64 = (0..16).map(|s| site_sign(&lat, s, v)).sum();
            assert_eq!(total, 0.0);
        }
    }

    #[test]
    fn corner_sign_memberships() {
        let lat = Lattice::new(4).unwrap();
        let sign = |c: Corner, v| site_sign(&lat, lat.corner_site(c), v);
        assert_eq!(sign(Corner::C1, Variant::Diag), -1.0);
        assert_eq!(sign(Corner::C3, Variant::Diag), -1.0);
        assert_eq!(sign(Corner::C2, Variant::Diag), 1.0);
        assert_eq!(sign(Corner::C4, Variant::Diag), 1.0);
        assert_eq!(sign(Corner::C1, Variant::Nondiag), -1.0);
        assert_eq!(sign(Corner::C2, Variant::Nondiag), -1.0);
        assert_eq!(sign(Corner::C3, Variant::Nondiag), 1.0);
        assert_eq!(sign(Corner::C4, Variant::Nondiag), 1.0);
    }

    #[test]
    fn rotation_preserves_bond_classes_and_cycles_corners() {
        for n in [2, 4, 6] {
            let lat = Lattice::new(n).unwrap();
            let classes: std::collections::HashMap<(usize, usize), BondClass> = lat
                .bonds()
                .iter()
                .map(|b| ((b.a.min(b.b), b.a.max(b.b)), b.class))
                .collect();
            for b in lat.bonds() {
                let (ra, rb) = (lat.rotate_c4(b.a), lat.rotate_c4(b.b));
                assert_eq!(classes[&(ra.min(rb), ra.max(rb))], b.class);
            }
            for (k, c) in Corner::ALL.iter().enumerate() {
                let next = Corner::ALL[(k + 1) % 4];
                assert_eq!(lat.rotate_c4(lat.corner_site(*c)), lat.corner_site(next));
            }
        }
    }

    #[test]
    fn corner_links_form_a_ring() {
        let lat = Lattice::new(4).unwrap();
        let links = lat.corner_links();
        for k in 0..4 {
            assert_eq!(links[k].b, links[(k + 1) % 4].a);
            assert_eq!(links[k].class, BondClass::CornerLink);
        }
        assert_eq!(links[0].a, 0);
        assert_eq!(links[0].b, 12);
    }
}
