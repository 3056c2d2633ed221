//! Exact rational probabilities and expectations for few-frog, short-time
//! events, by exhaustive enumeration of joint walk prefixes and occupancy
//! assignments.
//!
//! The built-in events exploit a locality fact about time-tight passage: a
//! relay chain from `x` to `y` with total time `||y - x||` activates each
//! relay `z` exactly at `||z - x||` and only visits sites in the coordinate
//! box spanned by `x` and `y`. Tight events are therefore measurable with
//! respect to a handful of short walk prefixes, which keeps enumeration
//! budgets tiny.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::field::{FieldSpec, RandomField};
use crate::lattice::{enumerate, Region, Site};
use crate::passage::Sweeper;
use crate::stats::{Accum, z_quantile};
use crate::{Error, Result};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Numerator and denominator in decimal, for serialization.
pub fn rat_parts(r: &Rat) -> (String, String) {
    (r.numer().to_string(), r.denom().to_string())
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug)]
pub enum Presence {
    Always,
    Bernoulli(Rat),
}

#[derive(Clone, Debug)]
pub struct Frog {
    pub site: Site,
    /// Walk prefix length enumerated for this frog; the event predicate must
    /// not look past it.
    pub steps: u32,
    pub presence: Presence,
}

#[derive(Clone, Debug)]
pub struct EventSpec {
    pub dimension: usize,
    pub frogs: Vec<Frog>,
    /// Cap on the number of joint prefix assignments.
    pub budget_cap: f64,
}

pub const DEFAULT_BUDGET_CAP: f64 = 1e8;

impl EventSpec {
    pub fn new(dimension: usize, frogs: Vec<Frog>) -> Self {
        EventSpec {
            dimension,
            frogs,
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }

    pub fn budget(&self) -> f64 {
        let two_d = (2 * self.dimension) as f64;
        self.frogs
            .iter()
            .map(|f| {
                let walks = two_d.powi(f.steps as i32);
                match f.presence {
                    Presence::Always => walks,
                    Presence::Bernoulli(_) => walks + 1.0,
                }
            })
            .product()
    }

    fn check_budget(&self) -> Result<()> {
        let b = self.budget();
        if b > self.budget_cap {
            return Err(Error::BudgetExceeded {
                required: b,
                cap: self.budget_cap,
            });
        }
        Ok(())
    }
}

/// One joint assignment: which frogs are present and their walk prefixes
/// (`walks[i][k]` is frog `i`'s position after `k` steps).
pub struct Assignment<'a> {
    pub frogs: &'a [Frog],
    pub present: &'a [bool],
    pub walks: &'a [Vec<Site>],
}

impl Assignment<'_> {
    /// First hitting time of `v` by frog `i`'s enumerated prefix.
    pub fn tau(&self, i: usize, v: &Site) -> Option<u64> {
        self.walks[i].iter().position(|p| p == v).map(|k| k as u64)
    }

    /// Minimum over relay chains of distinct sites from `source` to `target`,
    /// movers restricted to present frogs and their enumerated prefixes.
    /// `None` when no chain completes.
    pub fn chain_passage(&self, source: &Site, target: &Site) -> Option<u64> {
        if source == target {
            return Some(0);
        }
        let mut nodes: Vec<&Site> = self.frogs.iter().map(|f| &f.site).collect();
        if !nodes.contains(&target) {
            nodes.push(target);
        }
        // Dijkstra on a tiny complete graph; nonnegative hop times >= 1 keep
        // shortest chains simple automatically.
        let n = nodes.len();
        let src = nodes.iter().position(|s| *s == source)?;
        let tgt = nodes.iter().position(|s| *s == target).unwrap();
        let mut dist = vec![u64::MAX; n];
        let mut done = vec![false; n];
        dist[src] = 0;
        loop {
            let u = (0..n)
                .filter(|&i| !done[i] && dist[i] < u64::MAX)
                .min_by_key(|&i| dist[i])?;
            if u == tgt {
                return Some(dist[u]);
            }
            done[u] = true;
            let frog_idx = self
                .frogs
                .iter()
                .position(|f| &f.site == nodes[u]);
            let Some(fi) = frog_idx else { continue };
            if !self.present[fi] {
                continue;
            }
            for (v, node) in nodes.iter().enumerate() {
                if v == u || done[v] {
                    continue;
                }
                if let Some(t) = self.tau(fi, node) {
                    if t > 0 {
                        let nd = dist[u] + t;
                        if nd < dist[v] {
                            dist[v] = nd;
                        }
                    }
                }
            }
        }
    }
}

/// Exact `E[f(assignment)]` by full enumeration.
pub fn exact_expectation<F>(spec: &EventSpec, f: F) -> Result<Rat>
where
    F: Fn(&Assignment) -> Rat,
{
    spec.check_budget()?;
    let d = spec.dimension;
    let n = spec.frogs.len();
    let mut present = vec![false; n];
    let mut walks: Vec<Vec<Site>> = spec.frogs.iter().map(|fr| vec![fr.site.clone()]) .collect();
    let step_prob = rat(1, (2 * d) as i64);
    let mut total = Rat::zero();
    recurse(
        spec, &f, 0, Rat::one(), &step_prob, &mut present, &mut walks, &mut total,
    );
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    spec: &EventSpec,
    f: &F,
    i: usize,
    weight: Rat,
    step_prob: &Rat,
    present: &mut Vec<bool>,
    walks: &mut Vec<Vec<Site>>,
    total: &mut Rat,
) where
    F: Fn(&Assignment) -> Rat,
{
    if i == spec.frogs.len() {
        let a = Assignment {
            frogs: &spec.frogs,
            present,
            walks,
        };
        *total += weight * f(&a);
        return;
    }
    let frog = &spec.frogs[i];
    let (p_here, p_absent) = match &frog.presence {
        Presence::Always => (Rat::one(), None),
        Presence::Bernoulli(r) => (r.clone(), Some(Rat::one() - r)),
    };
    if let Some(pa) = p_absent {
        if !pa.is_zero() {
            present[i] = false;
            walks[i] = vec![frog.site.clone()];
            recurse(spec, f, i + 1, weight.clone() * pa, step_prob, present, walks, total);
        }
    }
    if !p_here.is_zero() {
        present[i] = true;
        enumerate_walk(
            spec,
            f,
            i,
            weight * p_here,
            step_prob,
            present,
            walks,
            total,
            frog.steps,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn enumerate_walk<F>(
    spec: &EventSpec,
    f: &F,
    i: usize,
    weight: Rat,
    step_prob: &Rat,
    present: &mut Vec<bool>,
    walks: &mut Vec<Vec<Site>>,
    total: &mut Rat,
    remaining: u32,
) where
    F: Fn(&Assignment) -> Rat,
{
    if remaining == 0 {
        recurse(spec, f, i + 1, weight, step_prob, present, walks, total);
        return;
    }
    let d = spec.dimension;
    for dir in 0..2 * d {
        let axis = dir / 2;
        let sign = if dir % 2 == 0 { 1 } else { -1 };
        let mut next = walks[i].last().unwrap().clone();
        next.0[axis] += sign;
        walks[i].push(next);
        enumerate_walk(
            spec,
            f,
            i,
            weight.clone() * step_prob.clone(),
            step_prob,
            present,
            walks,
            total,
            remaining - 1,
        );
        walks[i].pop();
    }
}

/// Exact probability of a 0/1 event.
pub fn exact_prob<F>(spec: &EventSpec, pred: F) -> Result<Rat>
where
    F: Fn(&Assignment) -> bool,
{
    exact_expectation(spec, |a| if pred(a) { Rat::one() } else { Rat::zero() })
}

fn orthant_shell(d: usize, m: u32) -> Vec<Site> {
    enumerate(&Region::OrthantShell { d, m: m as u64 }).expect("valid shell")
}

fn orthant_ball(d: usize, m: u32) -> Vec<Site> {
    enumerate(&Region::OrthantBall { d, m: m as u64 }).expect("valid ball")
}

/// `P(tau(0, Delta_a) = a)`: the walk from the origin lands on the
/// nonnegative shell of radius `a` after exactly `a` steps (earlier hits are
/// impossible by the speed limit).
pub fn orthant_shell_hit_prob(d: usize, a: u32) -> Result<Rat> {
    walk_endpoint_in_shell_prob(d, &Site::zero(d), a, a)
}

/// `P(S_k(y) is on Delta_a)` for a single walk started at `y`.
fn walk_endpoint_in_shell_prob(d: usize, y: &Site, k: u32, a: u32) -> Result<Rat> {
    let spec = EventSpec::new(
        d,
        vec![Frog {
            site: y.clone(),
            steps: k,
            presence: Presence::Always,
        }],
    );
    let shell_norm = a as u64;
    exact_prob(&spec, move |asg| {
        let end = &asg.walks[0][k as usize];
        end.is_nonneg() && end.norm() == shell_norm
    })
}

/// `P(T(0, y) = ||y||)` under the everything-occupied configuration. Tight
/// chains stay inside the coordinate box `[0, y]`, so only frogs there (with
/// prefixes of length `||y|| - ||z||`) can matter.
pub fn tight_passage_prob(y: &Site) -> Result<Rat> {
    let d = y.dim();
    if y.is_zero() {
        return Ok(Rat::one());
    }
    let norm = y.norm();
    let mut frogs = Vec::new();
    for z in box_sites(y) {
        if &z == y {
            continue;
        }
        let steps = (norm - z.norm()) as u32;
        frogs.push(Frog {
            site: z,
            steps,
            presence: Presence::Always,
        });
    }
    let spec = EventSpec::new(d, frogs);
    let target = y.clone();
    let origin = Site::zero(d);
    exact_prob(&spec, move |asg| {
        asg.chain_passage(&origin, &target) == Some(norm)
    })
}

/// Sites componentwise between the origin and `y` (inclusive), in lex order.
fn box_sites(y: &Site) -> Vec<Site> {
    let mut out = vec![Site::new(vec![])];
    for &c in y.0.iter() {
        let (lo, hi) = if c >= 0 { (0, c) } else { (c, 0) };
        let mut next = Vec::new();
        for s in &out {
            for v in lo..=hi {
                let mut t = s.clone();
                t.0.push(v);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Exact `sum over i of P(T(0, 2 xi_i) = 2)` (the axis part of the radius-2
/// shell sum); equals `d (4d - 1) / (2d)^3`.
pub fn delta2_axis_sum(d: usize) -> Result<Rat> {
    let mut total = Rat::zero();
    for i in 0..d {
        total += tight_passage_prob(&Site::unit(d, i).scale(2))?;
    }
    Ok(total)
}

/// Exact `sum over y in Delta_2 of P(T(0, y) = 2)`, split into axis and
/// mixed-coordinate parts.
pub struct Delta2Sum {
    pub axis: Rat,
    pub mixed: Rat,
    pub total: Rat,
}

pub fn delta2_passage_sum(d: usize) -> Result<Delta2Sum> {
    if d < 2 {
        return Err(Error::BadDimension(d));
    }
    let axis = delta2_axis_sum(d)?;
    let mut mixed = Rat::zero();
    for y in orthant_shell(d, 2) {
        if y.0.iter().any(|&c| c == 2) {
            continue;
        }
        mixed += tight_passage_prob(&y)?;
    }
    let total = axis.clone() + mixed.clone();
    Ok(Delta2Sum { axis, mixed, total })
}

/// Exact `q_A` for small `A`: the expected number of shell approachers
/// `sum over y in R_{A-1} of P(T(0,y) + tau(y, Delta_A) = A)`. The summand
/// factorizes as `P(T(0,y) = ||y||) * P(S_{A-||y||}(y) in Delta_A)` because
/// both passage legs are forced tight and use disjoint frog sets.
pub fn q_small(a: u32, d: usize) -> Result<Rat> {
    if d < 2 {
        return Err(Error::BadDimension(d));
    }
    if !(2..=3).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "q is enumerable only for radius 2 or 3, got {a}"
        )));
    }
    let mut total = Rat::zero();
    for y in orthant_ball(d, a - 1) {
        let k = (a as u64 - y.norm()) as u32;
        let p_tight = tight_passage_prob(&y)?;
        let p_exit = walk_endpoint_in_shell_prob(d, &y, k, a)?;
        total += p_tight * p_exit;
    }
    Ok(total)
}

/// Probabilities of the three disjoint pieces of `{T(0, 2 xi_i) = 2}`:
/// relay-only, direct-only, and both routes tight.
pub struct AxisSplit {
    /// direct walk tight, relay not: `(2d-1)/(2d)^3`
    pub direct_only: Rat,
    /// relay route tight, direct not: `(2d-1)/(2d)^3`
    pub relay_only: Rat,
    /// both tight: `1/(2d)^3`
    pub both: Rat,
}

pub fn axis_event_split(d: usize, i: usize) -> Result<AxisSplit> {
    if d < 2 || i >= d {
        return Err(Error::BadDimension(d));
    }
    let xi = Site::unit(d, i);
    let two_xi = xi.scale(2);
    let spec = EventSpec::new(
        d,
        vec![
            Frog {
                site: Site::zero(d),
                steps: 2,
                presence: Presence::Always,
            },
            Frog {
                site: xi.clone(),
                steps: 1,
                presence: Presence::Always,
            },
        ],
    );
    let run = |want_direct: bool, want_relay: bool| {
        let (xi, two_xi) = (xi.clone(), two_xi.clone());
        exact_prob(&spec, move |asg| {
            let w0 = &asg.walks[0];
            let w1 = &asg.walks[1];
            let direct = w0[1] == xi && w0[2] == two_xi;
            let relay = w0[1] == xi && w1[1] == two_xi;
            w0[1] == xi && direct == want_direct && relay == want_relay
        })
    };
    Ok(AxisSplit {
        direct_only: run(true, false)?,
        relay_only: run(false, true)?,
        both: run(true, true)?,
    })
}

/// Monte Carlo check of the sub-multiplicative shell-approacher bound
/// `q_{An} <= (1/2) (2 q_A)^n`.
#[derive(Clone, Debug)]
pub struct RecursionReport {
    pub a: u32,
    pub n: u32,
    pub m: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub replicates: u64,
    /// One-sided upper confidence limit for the estimate at `confidence`.
    pub upper_cl: f64,
    pub confidence: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Estimates `q_m` for `m = A n` by simulation (everything occupied) and
/// compares against the exact bound. A replicate counts the sites
/// `y in R_{m-1}` whose passage from the origin is tight and whose own walk
/// exits through `Delta_m` at the forced time.
pub fn recursion_check(
    a: u32,
    n: u32,
    d: usize,
    replicates: u64,
    master_seed: u64,
) -> Result<RecursionReport> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "the bound applies for n >= 1; n = 0 is out of range".into(),
        ));
    }
    if !(2..=3).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "base radius must be 2 or 3, got {a}"
        )));
    }
    let m = a * n;
    if m > 12 {
        return Err(Error::InvalidParameter(format!(
            "combined radius {m} too large for Monte Carlo estimation"
        )));
    }
    let q_a = q_small(a, d)?.to_f64().unwrap();
    let bound = 0.5 * (2.0 * q_a).powi(n as i32);
    let ball = orthant_ball(d, m - 1);
    let mut acc = Accum::default();
    let mut sweeper = Sweeper::new();
    let origin = Site::zero(d);
    for rep in 0..replicates {
        let field = RandomField::new(FieldSpec {
            master_seed,
            dimension: d,
            window: m,
            horizon: 2 * m as u32,
            replicate: rep,
        })?;
        let config = field.config_at(1.0)?;
        sweeper.sweep_labels(&field, &config, &origin, &origin, m, m as u64)?;
        let mut count = 0u64;
        for y in &ball {
            if sweeper.label(y) != Some(y.norm()) {
                continue;
            }
            let k = m as u64 - y.norm();
            let end = field.walk_prefix(y, k)?.pop().unwrap();
            if end.is_nonneg() && end.norm() == m as u64 {
                count += 1;
            }
        }
        acc.push(count as f64);
    }
    let confidence = 0.99;
    // one-sided limit at the stated confidence
    let z = z_quantile(2.0 * confidence - 1.0);
    let upper_cl = acc.mean() + z * acc.stderr();
    Ok(RecursionReport {
        a,
        n,
        m,
        estimate: acc.mean(),
        stderr: acc.stderr(),
        replicates,
        upper_cl,
        confidence,
        bound,
        pass: acc.mean() <= bound + z * acc.stderr(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_walk_partition_sums_to_one() {
        // Partition of the two-step walk's endpoint by l1 norm: {0, 2}.
        let d = 2;
        let spec = EventSpec::new(
            d,
            vec![Frog {
                site: Site::zero(d),
                steps: 2,
                presence: Presence::Always,
            }],
        );
        let p0 = exact_prob(&spec, |a| a.walks[0][2].norm() == 0).unwrap();
        let p2 = exact_prob(&spec, |a| a.walks[0][2].norm() == 2).unwrap();
        assert_eq!(p0.clone() + p2.clone(), Rat::one());
        assert_eq!(p0, rat(4, 16));
    }

    #[test]
    fn constraint_monotonicity() {
        let d = 2;
        let spec = EventSpec::new(
            d,
            vec![Frog {
                site: Site::zero(d),
                steps: 2,
                presence: Presence::Always,
            }],
        );
        let loose = exact_prob(&spec, |a| a.walks[0][2].norm() == 2).unwrap();
        let tight = exact_prob(&spec, |a| {
            a.walks[0][2].norm() == 2 && a.walks[0][2].is_nonneg()
        })
        .unwrap();
        assert!(tight <= loose);
    }

    #[test]
    fn bernoulli_presence_weights() {
        // One Bernoulli(1/3) frog, event = "present": probability 1/3.
        let d = 2;
        let spec = EventSpec::new(
            d,
            vec![Frog {
                site: Site::unit(d, 0),
                steps: 0,
                presence: Presence::Bernoulli(rat(1, 3)),
            }],
        );
        let p = exact_prob(&spec, |a| a.present[0]).unwrap();
        assert_eq!(p, rat(1, 3));
    }

    #[test]
    fn budget_rejection() {
        let d = 2;
        let spec = EventSpec::new(
            d,
            vec![Frog {
                site: Site::zero(d),
                steps: 20,
                presence: Presence::Always,
            }],
        );
        assert!(matches!(
            exact_prob(&spec, |_| true),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn shell_exit_probability_is_one_eighth() {
        for d in 2..=3 {
            assert_eq!(orthant_shell_hit_prob(d, 3).unwrap(), rat(1, 8));
        }
    }

    #[test]
    fn axis_split_matches_closed_forms() {
        for d in 2..=3usize {
            let split = axis_event_split(d, 0).unwrap();
            let cube = (2 * d as i64).pow(3);
            assert_eq!(split.direct_only, rat(2 * d as i64 - 1, cube));
            assert_eq!(split.relay_only, rat(2 * d as i64 - 1, cube));
            assert_eq!(split.both, rat(1, cube));
            // the three pieces partition the tight axis event
            let total = split.direct_only + split.relay_only + split.both;
            assert_eq!(
                total,
                tight_passage_prob(&Site::unit(d, 0).scale(2)).unwrap()
            );
        }
    }

    #[test]
    fn axis_sum_closed_form() {
        for d in 2..=3i64 {
            let expect = rat(d * (4 * d - 1), (2 * d).pow(3));
            assert_eq!(delta2_axis_sum(d as usize).unwrap(), expect);
        }
        assert_eq!(delta2_axis_sum(2).unwrap(), rat(7, 32));
    }

    #[test]
    fn shell_sum_below_half() {
        for d in 2..=3usize {
            let s = delta2_passage_sum(d).unwrap();
            assert_eq!(s.total, s.axis.clone() + s.mixed.clone());
            let half = rat(1, 2);
            let margin = rat(1, 8 * (d * d) as i64);
            assert!(s.total < half);
            assert!(s.total <= half - margin);
        }
    }

    #[test]
    fn q3_identity_and_contraction() {
        let d = 2;
        let q3 = q_small(3, d).unwrap();
        let s = delta2_passage_sum(d).unwrap();
        // 2 q_3 = 1/2 + shell sum, exactly
        assert_eq!(rat(2, 1) * q3.clone(), rat(1, 2) + s.total);
        assert!(rat(2, 1) * q3 < Rat::one());
    }

    #[test]
    fn q2_exact_value_against_hand_count() {
        let d = 2;
        let q2 = q_small(2, d).unwrap();
        // independent hand computation: sum over y in R_1 of
        // P(T(0,y)=||y||) P(S_{2-||y||}(y) in Delta_2);
        // y=0 contributes P(two-step endpoint in Delta_2)
        let p0 = walk_endpoint_in_shell_prob(d, &Site::zero(d), 2, 2).unwrap();
        // y in Delta_1 nonneg: (1,0),(0,1): P(tau(0,y)=1)=1/4 each,
        // P(one step from y lands in Delta_2) = 2/4 (two of four directions).
        let per_axis = rat(1, 4) * rat(2, 4);
        let expect = p0 + rat(2, 1) * per_axis;
        assert_eq!(q2, expect);
    }

    #[test]
    fn monte_carlo_agrees_with_exact_tight_probability() {
        // Frequency of a tight passage to (2,0) over many replicates vs the
        // exact 7/64, within 4 sigma.
        let d = 2;
        let y = Site::unit(d, 0).scale(2);
        let exact = tight_passage_prob(&y).unwrap().to_f64().unwrap();
        let reps = 60_000u64;
        let mut sweeper = Sweeper::new();
        let mut hits = 0u64;
        for rep in 0..reps {
            let field = RandomField::new(FieldSpec {
                master_seed: 991,
                dimension: d,
                window: 2,
                horizon: 4,
                replicate: rep,
            })
            .unwrap();
            let config = field.config_at(1.0).unwrap();
            sweeper
                .sweep_labels(&field, &config, &Site::zero(d), &Site::zero(d), 2, 2)
                .unwrap();
            if sweeper.label(&y) == Some(2) {
                hits += 1;
            }
        }
        let freq = hits as f64 / reps as f64;
        let sigma = (exact * (1.0 - exact) / reps as f64).sqrt();
        assert!(
            (freq - exact).abs() < 4.0 * sigma,
            "freq {freq} vs exact {exact} (sigma {sigma})"
        );
    }

    #[test]
    fn recursion_check_basics() {
        assert!(recursion_check(3, 0, 2, 10, 1).is_err());
        let rep = recursion_check(3, 1, 2, 4000, 7).unwrap();
        // self-consistency: estimate of q_3 matches exact q_3 within 4 sigma
        let q3 = q_small(3, 2).unwrap().to_f64().unwrap();
        assert!((rep.estimate - q3).abs() < 4.0 * rep.stderr.max(1e-3));
        assert!(rep.pass);
    }
}
