//! Integer-lattice geometry: sites of `Z^d` with `l1` norm, the regions
//! used throughout (balls, spheres, nonnegative-orthant shells), and
//! signed coordinate permutations.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::{Error, Result};

pub type Coord = i64;

/// A point of `Z^d`. Ordering is lexicographic on coordinates, which is
/// the deterministic enumeration and tie-breaking order used everywhere.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub SmallVec<[Coord; 4]>);

impl std::fmt::Debug for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

impl Site {
    pub fn new(coords: impl Into<SmallVec<[Coord; 4]>>) -> Self {
        Site(coords.into())
    }

    pub fn zero(d: usize) -> Self {
        Site(std::iter::repeat(0).take(d).collect())
    }

    /// The i-th coordinate vector `xi_i` (0-based axis index).
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut s = Self::zero(d);
        s.0[axis] = 1;
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `l1` norm: sum of absolute coordinates.
    pub fn norm(&self) -> u64 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn is_nonneg(&self) -> bool {
        self.0.iter().all(|&c| c >= 0)
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: Coord) -> Site {
        Site(self.0.iter().map(|c| c * k).collect())
    }

    pub fn distance(&self, other: &Site) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).unsigned_abs())
            .sum()
    }
}

pub fn l1_norm(x: &Site) -> u64 {
    x.norm()
}

/// A finite subset of the lattice with an exact membership test and
/// deterministic (lexicographic) enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// `B(x, R) = { y : |y - x| <= R }`
    Ball { center: Site, radius: u64 },
    /// `D_L(z) = { w : |w - z| = L }`
    Sphere { center: Site, radius: u64 },
    /// `Delta_m`: nonnegative coordinates, norm exactly `m`.
    OrthantShell { d: usize, m: u64 },
    /// `R_m`: nonnegative coordinates, norm at most `m`.
    OrthantBall { d: usize, m: u64 },
    Explicit(Vec<Site>),
}

impl Region {
    pub fn contains(&self, x: &Site) -> bool {
        match self {
            Region::Ball { center, radius } => x.distance(center) <= *radius,
            Region::Sphere { center, radius } => x.distance(center) == *radius,
            Region::OrthantShell { d, m } => x.dim() == *d && x.is_nonneg() && x.norm() == *m,
            Region::OrthantBall { d, m } => x.dim() == *d && x.is_nonneg() && x.norm() <= *m,
            Region::Explicit(v) => v.contains(x),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { center, .. } | Region::Sphere { center, .. } => center.dim(),
            Region::OrthantShell { d, .. } | Region::OrthantBall { d, .. } => *d,
            Region::Explicit(v) => v.first().map_or(0, Site::dim),
        }
    }
}

/// Exact member list, each member once, in lexicographic order.
pub fn enumerate(region: &Region) -> Result<Vec<Site>> {
    let out = match region {
        Region::Ball { center, radius } => {
            let mut v = signed_norm_sites(center.dim(), *radius, false)?;
            for s in &mut v {
                *s = s.add(center);
            }
            v
        }
        Region::Sphere { center, radius } => {
            let mut v = signed_norm_sites(center.dim(), *radius, true)?;
            for s in &mut v {
                *s = s.add(center);
            }
            v
        }
        Region::OrthantShell { d, m } => orthant_sites(*d, *m, true),
        Region::OrthantBall { d, m } => orthant_sites(*d, *m, false),
        Region::Explicit(v) => {
            let mut v = v.clone();
            v.sort();
            v.dedup();
            v
        }
    };
    Ok(out)
}

fn signed_norm_sites(d: usize, radius: u64, exact: bool) -> Result<Vec<Site>> {
    if d < 2 {
        return Err(Error::BadDimension(d));
    }
    let mut out = Vec::new();
    let mut coords: SmallVec<[Coord; 4]> = SmallVec::new();
    rec_signed(d, radius as i64, exact, &mut coords, &mut out);
    Ok(out)
}

fn rec_signed(d: usize, budget: i64, exact: bool, coords: &mut SmallVec<[Coord; 4]>, out: &mut Vec<Site>) {
    if coords.len() == d {
        if !exact || budget == 0 {
            out.push(Site(coords.clone()));
        }
        return;
    }
    // Last coordinate must absorb the whole remaining budget in exact mode.
    if exact && coords.len() == d - 1 {
        if budget == 0 {
            coords.push(0);
            out.push(Site(coords.clone()));
            coords.pop();
        } else {
            coords.push(-budget);
            out.push(Site(coords.clone()));
            coords.pop();
            coords.push(budget);
            out.push(Site(coords.clone()));
            coords.pop();
        }
        return;
    }
    for c in -budget..=budget {
        coords.push(c);
        rec_signed(d, budget - c.abs(), exact, coords, out);
        coords.pop();
    }
}

fn orthant_sites(d: usize, m: u64, exact: bool) -> Vec<Site> {
    let mut out = Vec::new();
    let mut coords: SmallVec<[Coord; 4]> = SmallVec::new();
    rec_orthant(d, m as i64, exact, &mut coords, &mut out);
    out
}

fn rec_orthant(d: usize, budget: i64, exact: bool, coords: &mut SmallVec<[Coord; 4]>, out: &mut Vec<Site>) {
    if coords.len() == d {
        if !exact || budget == 0 {
            out.push(Site(coords.clone()));
        }
        return;
    }
    if exact && coords.len() == d - 1 {
        coords.push(budget);
        out.push(Site(coords.clone()));
        coords.pop();
        return;
    }
    for c in 0..=budget {
        coords.push(c);
        rec_orthant(d, budget - c, exact, coords, out);
        coords.pop();
    }
}

/// A signed coordinate permutation `g`: `(g x)_i = sign_i * x_{perm_i}`.
/// These generate the symmetry group of the model (coordinate permutations
/// and reflections in the coordinate hyperplanes).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    negate: Vec<bool>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, negate: Vec<bool>) -> Result<Self> {
        let d = perm.len();
        if negate.len() != d {
            return Err(Error::BadPermutation(format!(
                "axis list has length {d} but sign list has length {}",
                negate.len()
            )));
        }
        let mut seen = vec![false; d];
        for &p in &perm {
            if p >= d || seen[p] {
                return Err(Error::BadPermutation(format!("axis indices {perm:?} are not a permutation")));
            }
            seen[p] = true;
        }
        Ok(SignedPermutation { perm, negate })
    }

    pub fn identity(d: usize) -> Self {
        SignedPermutation {
            perm: (0..d).collect(),
            negate: vec![false; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn is_identity(&self) -> bool {
        self.negate.iter().all(|&n| !n) && self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn apply(&self, x: &Site) -> Site {
        Site(
            self.perm
                .iter()
                .zip(&self.negate)
                .map(|(&p, &n)| if n { -x.0[p] } else { x.0[p] })
                .collect(),
        )
    }

    /// `self . other` (apply `other` first).
    pub fn compose(&self, other: &SignedPermutation) -> SignedPermutation {
        let perm = self.perm.iter().map(|&p| other.perm[p]).collect();
        let negate = self
            .perm
            .iter()
            .zip(&self.negate)
            .map(|(&p, &n)| n ^ other.negate[p])
            .collect();
        SignedPermutation { perm, negate }
    }

    pub fn inverse(&self) -> SignedPermutation {
        let d = self.dim();
        let mut perm = vec![0; d];
        let mut negate = vec![false; d];
        for i in 0..d {
            perm[self.perm[i]] = i;
            negate[self.perm[i]] = self.negate[i];
        }
        SignedPermutation { perm, negate }
    }
}

pub fn symmetry_apply(g: &SignedPermutation, x: &Site) -> Result<Site> {
    if g.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: x.dim(),
        });
    }
    Ok(g.apply(x))
}
