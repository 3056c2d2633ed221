//! Reproducible randomness for one replicate: a per-site uniform mark
//! (shared across all Bernoulli parameters, giving the monotone coupling)
//! and an independent simple-random-walk stream per site.
//!
//! Every draw is derived from the master seed through a counter-based key
//! `(master_seed, replicate, purpose, site)`, so outputs are bit-identical
//! regardless of query order or parallelism.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::lattice::{Site, SignedPermutation};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub master_seed: u64,
    pub dimension: usize,
    /// Window radius `W` in lattice units; the realized instance lives on
    /// `B(0, W)`.
    pub window: u32,
    /// Horizon `H`: walks are truncated after `H` steps.
    pub horizon: u32,
    pub replicate: u64,
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::BadDimension(self.dimension));
        }
        Ok(())
    }
}

const PURPOSE_MARK: u64 = 0x4d41524b; // "MARK"
const PURPOSE_WALK: u64 = 0x57414c4b; // "WALK"

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn substream_key(spec: &FieldSpec, purpose: u64, site: &Site) -> [u8; 32] {
    let mut state = spec.master_seed;
    let mut h = splitmix64(&mut state);
    for v in [spec.replicate, purpose, spec.dimension as u64] {
        state ^= v.wrapping_mul(0x2545f4914f6cdd1d);
        h ^= splitmix64(&mut state);
    }
    for &c in &site.0 {
        state ^= (c as u64).wrapping_mul(0xff51afd7ed558ccd);
        h ^= splitmix64(&mut state);
    }
    state ^= h;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

fn unit_f64(v: u64) -> f64 {
    (v >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn draw_below(rng: &mut ChaCha8Rng, m: u32) -> u32 {
    let zone = (u32::MAX - (u32::MAX % m)) as u64;
    loop {
        let v = rng.next_u32();
        if (v as u64) < zone {
            return v % m;
        }
    }
}

/// One replicate of the probability space: marks and walk streams, possibly
/// viewed through a signed permutation (see [`RandomField::symmetry_conjugate`]).
#[derive(Clone, Debug)]
pub struct RandomField {
    spec: FieldSpec,
    transform: SignedPermutation,
    inverse: SignedPermutation,
}

impl RandomField {
    pub fn new(spec: FieldSpec) -> Result<Self> {
        spec.validate()?;
        let id = SignedPermutation::identity(spec.dimension);
        Ok(RandomField {
            spec,
            transform: id.clone(),
            inverse: id,
        })
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    pub fn window(&self) -> u32 {
        self.spec.window
    }

    pub fn horizon(&self) -> u64 {
        self.spec.horizon as u64
    }

    /// Uniform mark `U(x) in [0, 1)`.
    pub fn mark(&self, x: &Site) -> f64 {
        let base = self.inverse.apply(x);
        let mut rng = ChaCha8Rng::from_seed(substream_key(&self.spec, PURPOSE_MARK, &base));
        unit_f64(rng.next_u64())
    }

    /// Iterator over the walk positions `S_1(x), S_2(x), ...` (the start
    /// `S_0(x) = x` is not yielded). Unbounded; callers enforce the horizon.
    pub fn walk_steps<'a>(&'a self, x: &Site) -> WalkIter<'a> {
        let base = self.inverse.apply(x);
        let rng = ChaCha8Rng::from_seed(substream_key(&self.spec, PURPOSE_WALK, &base));
        WalkIter {
            rng,
            pos: base,
            transform: &self.transform,
        }
    }

    /// Walk prefix `[S_0(x), ..., S_k(x)]`. Rejects `k > H`.
    pub fn walk_prefix(&self, x: &Site, k: u64) -> Result<Vec<Site>> {
        if k > self.horizon() {
            return Err(Error::HorizonExceeded {
                requested: k,
                horizon: self.horizon(),
            });
        }
        let mut path = Vec::with_capacity(k as usize + 1);
        path.push(x.clone());
        path.extend(self.walk_steps(x).take(k as usize));
        Ok(path)
    }

    /// A field whose mark at `g.x` equals this field's mark at `x`, and whose
    /// walk from `g.x` is the `g`-image of this field's walk from `x`.
    pub fn symmetry_conjugate(&self, g: &SignedPermutation) -> Result<RandomField> {
        if g.dim() != self.spec.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.spec.dimension,
                got: g.dim(),
            });
        }
        let transform = g.compose(&self.transform);
        let inverse = transform.inverse();
        Ok(RandomField {
            spec: self.spec.clone(),
            transform,
            inverse,
        })
    }

    /// Realize the Bernoulli(`r`) configuration from the marks. The origin
    /// is forced occupied (the `<omega>` convention).
    pub fn config_at(&self, r: f64) -> Result<crate::passage::Config> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::BadProbability(r));
        }
        Ok(crate::passage::Config::new(r))
    }
}

pub struct WalkIter<'a> {
    rng: ChaCha8Rng,
    pos: Site,
    transform: &'a SignedPermutation,
}

impl Iterator for WalkIter<'_> {
    type Item = Site;

    fn next(&mut self) -> Option<Site> {
        let d = self.pos.dim();
        let dir = draw_below(&mut self.rng, 2 * d as u32) as usize;
        let axis = dir / 2;
        let delta = if dir % 2 == 0 { 1 } else { -1 };
        self.pos.0[axis] += delta;
        if self.transform.is_identity() {
            Some(self.pos.clone())
        } else {
            Some(self.transform.apply(&self.pos))
        }
    }
}
