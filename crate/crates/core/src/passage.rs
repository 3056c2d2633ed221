//! Exact first-passage computation on one realized, window/horizon-truncated
//! instance.
//!
//! The engine is a label-setting (Dijkstra-style) sweep: finalizing a site
//! `u` with label `t(u)` scans the walk started at `u` once, relaxing
//! `t(v) <- min(t(v), t(u) + k)` for every site `v` the walk visits at step
//! `k` within the horizon. Edge weights are the hitting times `tau(u, v)`,
//! supported only on visited sites, so the graph is generated lazily.
//!
//! Tie-breaking is deterministic: among equal-time relaxations the
//! predecessor finalized earliest wins, and simultaneous finalizations are
//! ordered lexicographically by site. This fixes one geodesic per instance.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::field::RandomField;
use crate::lattice::{enumerate, Region, Site};
use crate::{Error, Result};

/// A passage or hitting time: finite, or the distinguished value standing
/// for "infinite / not reached within the horizon". `Censored` orders above
/// every finite time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PassageTime {
    Finite(u64),
    Censored,
}

impl PassageTime {
    pub fn finite(self) -> Option<u64> {
        match self {
            PassageTime::Finite(t) => Some(t),
            PassageTime::Censored => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, PassageTime::Censored)
    }
}

impl serde::Serialize for PassageTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PassageTime::Finite(t) => s.serialize_u64(*t),
            PassageTime::Censored => s.serialize_str("CENSORED"),
        }
    }
}

impl<'de> serde::Deserialize<'de> for PassageTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(t) => Ok(PassageTime::Finite(t)),
            Raw::S(s) if s == "CENSORED" => Ok(PassageTime::Censored),
            Raw::S(s) => Err(serde::de::Error::custom(format!("bad passage time {s:?}"))),
        }
    }
}

/// An initial configuration over the window: Bernoulli(`r`) occupancy derived
/// from the field's marks, with the origin forced occupied (the `<omega>`
/// convention) and optional forced `(z, s)` overrides. Later overrides take
/// precedence, and any override beats the origin convention.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Config {
    pub r: f64,
    pub overrides: Vec<(Site, bool)>,
}

impl Config {
    pub fn new(r: f64) -> Self {
        Config {
            r,
            overrides: Vec::new(),
        }
    }

    pub fn with_override(mut self, z: Site, s: bool) -> Self {
        self.overrides.push((z, s));
        self
    }

    pub fn occupied(&self, field: &RandomField, x: &Site) -> bool {
        if let Some((_, s)) = self.overrides.iter().rev().find(|(z, _)| z == x) {
            return *s;
        }
        if x.is_zero() {
            return true;
        }
        field.mark(x) < self.r
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PassageResult {
    pub value: PassageTime,
    /// The chosen geodesic `gamma_O`: distinct sites, first = source,
    /// last = target. Empty when censored.
    pub geodesic: Vec<Site>,
    /// `tau` along consecutive geodesic pairs; sums to `value`.
    pub hop_times: Vec<u64>,
    /// Set when the value is unreached within the horizon or exceeds
    /// `H - margin`.
    pub censored: bool,
    pub window: u32,
    pub horizon: u64,
}

/// First time the walk from `x` visits `v`, up to `h` steps.
pub fn hitting_time(field: &RandomField, x: &Site, v: &Site, h: u64) -> PassageTime {
    if x == v {
        return PassageTime::Finite(0);
    }
    for (k, pos) in field.walk_steps(x).take(h as usize).enumerate() {
        if &pos == v {
            return PassageTime::Finite(k as u64 + 1);
        }
    }
    PassageTime::Censored
}

const UNSET: u32 = u32::MAX;
const NO_PRED: u32 = u32::MAX;

/// Reusable dense scratch for sweeps. Arrays are generation-stamped so a new
/// sweep costs O(touched sites), not O(window volume).
pub struct Sweeper {
    d: usize,
    radius: i64,
    side: i64,
    center: Site,
    dist: Vec<u32>,
    stamp: Vec<u32>,
    pred: Vec<u32>,
    epoch: u32,
    heap: BinaryHeap<Reverse<(u32, u32)>>,
    finalized: Vec<u32>,
}

enum Mode {
    /// Stop when the first member of the (sorted) target index set finalizes.
    Targets(Vec<u32>),
    /// Finalize every label `<= t`.
    Time(u64),
}

impl Default for Sweeper {
    fn default() -> Self {
        Self::new()
    }
}

impl Sweeper {
    pub fn new() -> Self {
        Sweeper {
            d: 0,
            radius: -1,
            side: 0,
            center: Site::new(vec![]),
            dist: Vec::new(),
            stamp: Vec::new(),
            pred: Vec::new(),
            epoch: 0,
            heap: BinaryHeap::new(),
            finalized: Vec::new(),
        }
    }

    fn ensure(&mut self, d: usize, center: &Site, radius: u32) -> Result<()> {
        let r = radius as i64;
        let side = 2 * r + 1;
        let size = (side as u128).checked_pow(d as u32).ok_or(Error::InfeasibleWindow {
            radius,
            dimension: d,
        })?;
        if size > (1u128 << 31) {
            return Err(Error::InfeasibleWindow {
                radius,
                dimension: d,
            });
        }
        let size = size as usize;
        if self.d != d || self.radius != r {
            self.d = d;
            self.radius = r;
            self.side = side;
            self.dist = vec![UNSET; size];
            self.stamp = vec![0; size];
            self.pred = vec![NO_PRED; size];
            self.epoch = 0;
        }
        self.center = center.clone();
        self.epoch += 1;
        if self.epoch == u32::MAX {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        self.heap.clear();
        self.finalized.clear();
        Ok(())
    }

    fn index(&self, x: &Site) -> Option<u32> {
        let mut idx: i64 = 0;
        let mut l1: i64 = 0;
        for (c, o) in x.0.iter().zip(&self.center.0) {
            let rel = c - o + self.radius;
            if rel < 0 || rel >= self.side {
                return None;
            }
            l1 += (c - o).abs();
            idx = idx * self.side + rel;
        }
        // the window is the l1 ball, not the enclosing box
        if l1 > self.radius {
            return None;
        }
        Some(idx as u32)
    }

    fn site_of(&self, mut idx: u32) -> Site {
        let mut coords = vec![0i64; self.d];
        for i in (0..self.d).rev() {
            let rel = idx as i64 % self.side;
            coords[i] = rel - self.radius + self.center.0[i];
            idx = (idx as i64 / self.side) as u32;
        }
        Site::new(coords)
    }

    fn live(&self, idx: u32) -> bool {
        self.stamp[idx as usize] == self.epoch
    }

    fn relax(&mut self, idx: u32, nd: u32, pred: u32) {
        let i = idx as usize;
        if !self.live(idx) {
            self.stamp[i] = self.epoch;
            self.dist[i] = nd;
            self.pred[i] = pred;
            self.heap.push(Reverse((nd, idx)));
        } else if nd < self.dist[i] {
            self.dist[i] = nd;
            self.pred[i] = pred;
            self.heap.push(Reverse((nd, idx)));
        }
    }

    /// Label of a site after the latest sweep (finalized sites only; a
    /// finalized distance carries the high tag bit).
    pub fn label(&self, x: &Site) -> Option<u64> {
        let idx = self.index(x)?;
        if self.live(idx) && self.dist[idx as usize] & FINAL_BIT != 0 {
            Some((self.dist[idx as usize] & !FINAL_BIT) as u64)
        } else {
            None
        }
    }

    fn path_to(&self, idx: u32) -> (Vec<Site>, Vec<u64>) {
        let mut chain = Vec::new();
        let mut cur = idx;
        loop {
            chain.push(cur);
            let p = self.pred[cur as usize];
            if p == NO_PRED {
                break;
            }
            cur = p;
        }
        chain.reverse();
        let sites: Vec<Site> = chain.iter().map(|&i| self.site_of(i)).collect();
        let hops: Vec<u64> = chain
            .windows(2)
            .map(|w| {
                ((self.dist[w[1] as usize] & !FINAL_BIT) - (self.dist[w[0] as usize] & !FINAL_BIT))
                    as u64
            })
            .collect();
        (sites, hops)
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        field: &RandomField,
        config: &Config,
        source: &Site,
        window_center: &Site,
        window_radius: u32,
        mode: &Mode,
        scan_limit: u64,
    ) -> Result<Option<(u32, u32)>> {
        self.ensure(field.dimension(), window_center, window_radius)?;
        let src = self.index(source).ok_or_else(|| {
            Error::OutsideWindow(source.to_string(), window_radius)
        })?;
        let time_bound = match mode {
            Mode::Targets(_) => scan_limit,
            Mode::Time(t) => (*t).min(scan_limit),
        };
        let mut tentative_best: u64 = u64::MAX;
        self.relax(src, 0, NO_PRED);
        let mut reached = None;
        while let Some(Reverse((dv, vi))) = self.heap.pop() {
            let i = vi as usize;
            if !self.live(vi) || self.dist[i] & FINAL_BIT != 0 || self.dist[i] != dv {
                continue;
            }
            if dv as u64 > time_bound {
                break;
            }
            self.dist[i] = dv | FINAL_BIT;
            self.finalized.push(vi);
            if let Mode::Targets(ts) = mode {
                if ts.binary_search(&vi).is_ok() {
                    reached = Some((vi, dv));
                    break;
                }
            }
            let u = self.site_of(vi);
            if !config.occupied(field, &u) {
                continue;
            }
            let budget = time_bound.min(tentative_best).saturating_sub(dv as u64);
            if budget == 0 {
                continue;
            }
            for (k, pos) in field.walk_steps(&u).take(budget as usize).enumerate() {
                if let Some(wi) = self.index(&pos) {
                    if self.dist[wi as usize] & FINAL_BIT != 0 && self.live(wi) {
                        continue;
                    }
                    let nd = dv + k as u32 + 1;
                    self.relax(wi, nd, vi);
                    if let Mode::Targets(ts) = mode {
                        if ts.binary_search(&wi).is_ok() && (nd as u64) < tentative_best {
                            tentative_best = nd as u64;
                        }
                    }
                }
            }
        }
        Ok(reached)
    }

    /// Exact first passage from `source` to the lexicographically-least
    /// argmin of `targets`, with adaptive scan capping (exact: an omitted
    /// edge always has weight strictly above the returned value).
    fn passage_to_targets(
        &mut self,
        field: &RandomField,
        config: &Config,
        source: &Site,
        targets: &[Site],
        margin: u64,
    ) -> Result<PassageResult> {
        let h = field.horizon();
        let w = field.window();
        let origin = Site::zero(field.dimension());
        let min_dist = targets.iter().map(|t| t.distance(source)).min().unwrap();
        let mut cap = (2 * min_dist).max(64).min(h);
        let target_idx = {
            self.ensure(field.dimension(), &origin, w)?;
            let mut v: Vec<u32> = targets
                .iter()
                .map(|t| {
                    self.index(t)
                        .ok_or_else(|| Error::OutsideWindow(t.to_string(), w))
                })
                .collect::<Result<_>>()?;
            v.sort_unstable();
            v.dedup();
            v
        };
        // Source identical to a target: zero-time passage.
        if targets.iter().any(|t| t == source) {
            return Ok(PassageResult {
                value: PassageTime::Finite(0),
                geodesic: vec![source.clone()],
                hop_times: vec![],
                censored: false,
                window: w,
                horizon: h,
            });
        }
        if !config.occupied(field, source) {
            return Err(Error::UnoccupiedSource);
        }
        loop {
            let mode = Mode::Targets(target_idx.clone());
            let reached = self.run(field, config, source, &origin, w, &mode, cap)?;
            if let Some((ti, dv)) = reached {
                let (geodesic, hop_times) = self.path_to(ti);
                let value = dv as u64;
                return Ok(PassageResult {
                    value: PassageTime::Finite(value),
                    geodesic,
                    hop_times,
                    censored: value > h.saturating_sub(margin),
                    window: w,
                    horizon: h,
                });
            }
            if cap >= h {
                return Ok(PassageResult {
                    value: PassageTime::Censored,
                    geodesic: vec![],
                    hop_times: vec![],
                    censored: true,
                    window: w,
                    horizon: h,
                });
            }
            cap = (cap * 2).min(h);
        }
    }

    /// Exact minimum over all relay chains from `source` to `target`,
    /// restricted to the window and horizon-truncated hitting times.
    pub fn first_passage(
        &mut self,
        field: &RandomField,
        config: &Config,
        source: &Site,
        target: &Site,
    ) -> Result<PassageResult> {
        self.first_passage_with_margin(field, config, source, target, field.horizon() / 4)
    }

    pub fn first_passage_with_margin(
        &mut self,
        field: &RandomField,
        config: &Config,
        source: &Site,
        target: &Site,
        margin: u64,
    ) -> Result<PassageResult> {
        self.passage_to_targets(field, config, source, std::slice::from_ref(target), margin)
    }

    /// `T(x, Gamma) = min over y in Gamma of T(x, y)`; the geodesic ends at
    /// the argmin (lexicographic tie-break).
    pub fn first_passage_to_set(
        &mut self,
        field: &RandomField,
        config: &Config,
        source: &Site,
        region: &Region,
    ) -> Result<PassageResult> {
        let w = field.window();
        let origin = Site::zero(field.dimension());
        let members: Vec<Site> = enumerate(region)?
            .into_iter()
            .filter(|s| s.distance(&origin) <= w as u64)
            .collect();
        if members.is_empty() {
            return Err(Error::EmptyTargetSet);
        }
        self.passage_to_targets(field, config, source, &members, field.horizon() / 4)
    }

    /// Passage time with `omega(z)` forced to `s`, sharing this field's walks.
    pub fn forced_passage(
        &mut self,
        field: &RandomField,
        config: &Config,
        z: &Site,
        s: bool,
        source: &Site,
        target: &Site,
    ) -> Result<PassageResult> {
        let forced = config.clone().with_override(z.clone(), s);
        self.first_passage(field, &forced, source, target)
    }

    /// `U_z^s(y, N) = T(0, y, <omega_z^s>, S) * 1{T <= N}`; zero when the
    /// passage exceeds `N` or is censored.
    pub fn truncated_passage(
        &mut self,
        field: &RandomField,
        config: &Config,
        z: &Site,
        s: bool,
        y: &Site,
        n: u64,
    ) -> Result<u64> {
        let origin = Site::zero(field.dimension());
        let cfg = config
            .clone()
            .with_override(z.clone(), s)
            .with_override(origin.clone(), true);
        let res = self.first_passage_with_margin(field, &cfg, &origin, y, 0)?;
        Ok(match res.value {
            PassageTime::Finite(t) if t <= n => t,
            _ => 0,
        })
    }

    /// Finalize all labels `<= t` from `source` within the ball of radius
    /// `window_radius` around `window_center`. Labels are then readable via
    /// [`Sweeper::label`] and [`Sweeper::finalized_sites`]. Requires `source`
    /// occupied; otherwise only the source itself is labeled.
    #[allow(clippy::too_many_arguments)]
    pub fn sweep_labels(
        &mut self,
        field: &RandomField,
        config: &Config,
        source: &Site,
        window_center: &Site,
        window_radius: u32,
        t: u64,
    ) -> Result<()> {
        if t > field.horizon() {
            return Err(Error::HorizonExceeded {
                requested: t,
                horizon: field.horizon(),
            });
        }
        self.run(
            field,
            config,
            source,
            window_center,
            window_radius,
            &Mode::Time(t),
            t,
        )?;
        Ok(())
    }

    /// Finalized sites of the latest sweep in finalization order, with labels.
    pub fn finalized_sites(&self) -> impl Iterator<Item = (Site, u64)> + '_ {
        self.finalized.iter().map(|&i| {
            (
                self.site_of(i),
                (self.dist[i as usize] & !FINAL_BIT) as u64,
            )
        })
    }

    /// Whether `T(z, D_L(z)) = L` on this realization, i.e. a time-tight
    /// relay chain from `z` reaches the radius-`L` sphere. Tight chains never
    /// leave `B(z, L)`, so the check is exact on that window. Returns `false`
    /// when `z` is unoccupied (all its hitting times are infinite).
    pub fn sphere_reach_is_tight(
        &mut self,
        field: &RandomField,
        config: &Config,
        z: &Site,
        l: u32,
    ) -> Result<bool> {
        if !config.occupied(field, z) {
            return Ok(false);
        }
        self.run(
            field,
            config,
            z,
            z,
            l,
            &Mode::Time(l as u64),
            l as u64,
        )?;
        for &i in &self.finalized {
            let lab = (self.dist[i as usize] & !FINAL_BIT) as u64;
            if lab == l as u64 && self.site_of(i).distance(z) == l as u64 {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

const FINAL_BIT: u32 = 1 << 31;

/// Interior-site annotations of a geodesic: predecessor, successor, and the
/// first point after `z` at distance `> L` (falling back to `z + 3L xi_1`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicNode {
    pub site: Site,
    pub prev: Site,
    pub next: Site,
    pub far_next: Site,
}

pub fn geodesic_structure(result: &PassageResult, l: u64) -> Result<Vec<GeodesicNode>> {
    if result.censored || result.value.is_censored() {
        return Err(Error::CensoredResult);
    }
    let g = &result.geodesic;
    let mut out = Vec::new();
    for i in 1..g.len().saturating_sub(1) {
        let z = &g[i];
        let far_next = g[i + 1..]
            .iter()
            .find(|w| w.distance(z) > l)
            .cloned()
            .unwrap_or_else(|| {
                let mut s = z.clone();
                s.0[0] += 3 * l as i64;
                s
            });
        out.push(GeodesicNode {
            site: z.clone(),
            prev: g[i - 1].clone(),
            next: g[i + 1].clone(),
            far_next,
        });
    }
    Ok(out)
}

/// Convenience one-shot wrappers (allocate a fresh sweeper).
pub fn first_passage(
    field: &RandomField,
    config: &Config,
    source: &Site,
    target: &Site,
) -> Result<PassageResult> {
    Sweeper::new().first_passage(field, config, source, target)
}

pub fn first_passage_to_set(
    field: &RandomField,
    config: &Config,
    source: &Site,
    region: &Region,
) -> Result<PassageResult> {
    Sweeper::new().first_passage_to_set(field, config, source, region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::lattice::SignedPermutation;

    fn field(seed: u64, replicate: u64, w: u32, h: u32) -> RandomField {
        RandomField::new(FieldSpec {
            master_seed: seed,
            dimension: 2,
            window: w,
            horizon: h,
            replicate,
        })
        .unwrap()
    }

    fn origin() -> Site {
        Site::zero(2)
    }

    #[test]
    fn hitting_time_examples() {
        let f = field(3, 0, 20, 40);
        let x = Site::new(vec![2, 1]);
        assert_eq!(hitting_time(&f, &x, &x, 40), PassageTime::Finite(0));
        let first = f.walk_steps(&x).next().unwrap();
        assert_eq!(hitting_time(&f, &x, &first, 40), PassageTime::Finite(1));
        // Speed limit: a site farther than H steps is never hit.
        let far = Site::new(vec![50, 0]);
        assert_eq!(hitting_time(&f, &x, &far, 40), PassageTime::Censored);
    }

    #[test]
    fn source_equals_target() {
        let f = field(5, 0, 10, 40);
        let cfg = f.config_at(1.0).unwrap();
        let r = first_passage(&f, &cfg, &origin(), &origin()).unwrap();
        assert_eq!(r.value, PassageTime::Finite(0));
        assert_eq!(r.geodesic, vec![origin()]);
        assert!(r.hop_times.is_empty());
    }

    #[test]
    fn single_frog_equals_hitting_time() {
        // Only the origin occupied: T(0, y) = tau(0, y).
        for rep in 0..50 {
            let f = field(17, rep, 8, 64);
            let cfg = Config::new(1e-12); // effectively empty; origin forced
            let y = Site::new(vec![1, 1]);
            let r = first_passage(&f, &cfg, &origin(), &y).unwrap();
            let tau = hitting_time(&f, &origin(), &y, 64);
            assert_eq!(r.value, tau);
            if let PassageTime::Finite(_) = r.value {
                assert_eq!(r.geodesic, vec![origin(), y.clone()]);
            }
        }
    }

    #[test]
    fn value_is_hop_sum_and_hops_dominate_distance() {
        for rep in 0..50 {
            let f = field(23, rep, 12, 96);
            let cfg = f.config_at(0.7).unwrap();
            let y = Site::new(vec![4, -2]);
            let r = first_passage(&f, &cfg, &origin(), &y).unwrap();
            if let PassageTime::Finite(v) = r.value {
                assert_eq!(v, r.hop_times.iter().sum::<u64>());
                assert!(v >= y.norm());
                for (pair, &tau) in r.geodesic.windows(2).zip(&r.hop_times) {
                    assert!(tau >= pair[0].distance(&pair[1]));
                }
                let mut sorted = r.geodesic.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), r.geodesic.len(), "geodesic sites distinct");
                // every mover occupied
                for u in &r.geodesic[..r.geodesic.len() - 1] {
                    assert!(cfg.occupied(&f, u));
                }
            }
        }
    }

    #[test]
    fn forced_override_noop_and_monotone() {
        for rep in 0..60 {
            let f = field(31, rep, 10, 80);
            let cfg = f.config_at(0.6).unwrap();
            let y = Site::new(vec![3, 2]);
            let z = Site::new(vec![1, 1]);
            let mut sw = Sweeper::new();
            let base = sw.first_passage(&f, &cfg, &origin(), &y).unwrap();
            let s_cur = cfg.occupied(&f, &z);
            let same = sw.forced_passage(&f, &cfg, &z, s_cur, &origin(), &y).unwrap();
            assert_eq!(base.value, same.value);
            assert_eq!(base.geodesic, same.geodesic);
            let off = sw.forced_passage(&f, &cfg, &z, false, &origin(), &y).unwrap();
            let on = sw.forced_passage(&f, &cfg, &z, true, &origin(), &y).unwrap();
            assert!(off.value >= on.value, "removing a frog cannot speed propagation");
        }
    }

    #[test]
    fn truncated_passage_indicator() {
        for rep in 0..40 {
            let f = field(37, rep, 10, 80);
            let cfg = f.config_at(0.8).unwrap();
            let y = Site::new(vec![2, 2]);
            let z = Site::new(vec![1, 0]);
            let mut sw = Sweeper::new();
            let res = sw
                .forced_passage(&f, &cfg.clone().with_override(origin(), true), &z, true, &origin(), &y)
                .unwrap();
            let u0 = sw.truncated_passage(&f, &cfg, &z, true, &y, 0).unwrap();
            if res.value != PassageTime::Finite(0) {
                assert_eq!(u0, 0);
            }
            if let PassageTime::Finite(t) = res.value {
                let un = sw.truncated_passage(&f, &cfg, &z, true, &y, t).unwrap();
                assert_eq!(un, t);
            }
        }
    }

    #[test]
    fn set_passage_examples() {
        let f = field(41, 0, 10, 80);
        let cfg = f.config_at(1.0).unwrap();
        let mut sw = Sweeper::new();
        let r = sw
            .first_passage_to_set(
                &f,
                &cfg,
                &origin(),
                &Region::Explicit(vec![origin()]),
            )
            .unwrap();
        assert_eq!(r.value, PassageTime::Finite(0));
        for rep in 0..30 {
            let f = field(43, rep, 10, 80);
            let cfg = f.config_at(1.0).unwrap();
            let l = 4u64;
            let r = sw
                .first_passage_to_set(
                    &f,
                    &cfg,
                    &origin(),
                    &Region::Sphere {
                        center: origin(),
                        radius: l,
                    },
                )
                .unwrap();
            if let PassageTime::Finite(v) = r.value {
                assert!(v >= l);
                assert_eq!(r.geodesic.last().unwrap().distance(&origin()), l);
            }
        }
    }

    #[test]
    fn config_monotonicity_pathwise() {
        for rep in 0..60 {
            let f = field(47, rep, 10, 80);
            let y = Site::new(vec![3, -1]);
            let lo = f.config_at(0.4).unwrap();
            let hi = f.config_at(0.9).unwrap();
            let mut sw = Sweeper::new();
            let tl = sw.first_passage(&f, &lo, &origin(), &y).unwrap().value;
            let th = sw.first_passage(&f, &hi, &origin(), &y).unwrap().value;
            assert!(th <= tl, "denser config is faster (coupled)");
        }
    }

    #[test]
    fn symmetry_metamorphic_equality() {
        let g = SignedPermutation::new(vec![1, 0], vec![false, true]).unwrap();
        for rep in 0..40 {
            let f = field(53, rep, 10, 80);
            let fg = f.symmetry_conjugate(&g).unwrap();
            let cfg = f.config_at(0.7).unwrap();
            let y = Site::new(vec![3, 1]);
            let gy = g.apply(&y);
            let mut sw = Sweeper::new();
            let a = sw.first_passage(&f, &cfg, &origin(), &y).unwrap();
            let b = sw.first_passage(&fg, &cfg, &origin(), &gy).unwrap();
            assert_eq!(a.value, b.value);
            let mapped: Vec<Site> = a.geodesic.iter().map(|s| g.apply(s)).collect();
            assert_eq!(b.geodesic, mapped);
        }
    }

    #[test]
    fn determinism_of_results() {
        let y = Site::new(vec![4, 0]);
        let f = field(59, 7, 10, 80);
        let cfg = f.config_at(0.8).unwrap();
        let a = first_passage(&f, &cfg, &origin(), &y).unwrap();
        let b = Sweeper::new().first_passage(&f, &cfg, &origin(), &y).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.geodesic, b.geodesic);
        assert_eq!(a.hop_times, b.hop_times);
    }

    #[test]
    fn geodesic_structure_annotations() {
        // Two-site geodesic: no interior sites.
        let r = PassageResult {
            value: PassageTime::Finite(2),
            geodesic: vec![origin(), Site::new(vec![1, 1])],
            hop_times: vec![2],
            censored: false,
            window: 10,
            horizon: 80,
        };
        assert!(geodesic_structure(&r, 2).unwrap().is_empty());

        let a = Site::new(vec![1, 0]);
        let y = Site::new(vec![2, 0]);
        let r = PassageResult {
            value: PassageTime::Finite(2),
            geodesic: vec![origin(), a.clone(), y.clone()],
            hop_times: vec![1, 1],
            censored: false,
            window: 10,
            horizon: 80,
        };
        let nodes = geodesic_structure(&r, 1).unwrap();
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].prev, origin());
        assert_eq!(nodes[0].next, y);
        // no point at distance > 1 after a: fallback a + 3 xi_1
        assert_eq!(nodes[0].far_next, Site::new(vec![4, 0]));

        // Straight-line geodesic of unit hops: far_next with L=2 is 3 hops on.
        let line: Vec<Site> = (0..8).map(|i| Site::new(vec![i, 0])).collect();
        let r = PassageResult {
            value: PassageTime::Finite(7),
            geodesic: line.clone(),
            hop_times: vec![1; 7],
            censored: false,
            window: 10,
            horizon: 80,
        };
        let nodes = geodesic_structure(&r, 2).unwrap();
        let z = &nodes[1]; // site (2,0)
        assert_eq!(z.site, Site::new(vec![2, 0]));
        assert_eq!(z.far_next, Site::new(vec![5, 0]));

        let censored = PassageResult {
            value: PassageTime::Censored,
            geodesic: vec![],
            hop_times: vec![],
            censored: true,
            window: 10,
            horizon: 80,
        };
        assert!(geodesic_structure(&censored, 1).is_err());
    }

    #[test]
    fn unoccupied_source_rejected() {
        let f = field(61, 0, 10, 80);
        let cfg = Config::new(1e-12);
        let x = Site::new(vec![5, 5]);
        assert!(matches!(
            first_passage(&f, &cfg, &x, &origin()),
            Err(Error::UnoccupiedSource)
        ));
    }

    #[test]
    fn target_outside_window_rejected() {
        let f = field(67, 0, 10, 80);
        let cfg = f.config_at(1.0).unwrap();
        let y = Site::new(vec![11, 0]);
        assert!(first_passage(&f, &cfg, &origin(), &y).is_err());
    }
}
