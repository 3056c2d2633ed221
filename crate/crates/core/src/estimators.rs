//! Monte Carlo estimation layer: time constants, coupled density
//! differences, influence profiles with a finite-difference cross-check,
//! delaying-event censuses, sphere-coincidence decay, and tail fits.
//!
//! Replicate `i` always draws from substream `i` of the master seed, and
//! aggregation folds an indexed result vector in replicate order, so outputs
//! are identical however many worker threads run.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{FieldSpec, RandomField};
use crate::lattice::{enumerate, Region, Site};
use crate::passage::{geodesic_structure, hitting_time, PassageTime, Sweeper};
use crate::stats::{clopper_pearson, weighted_line_fit, z_quantile, Accum, EstimateRecord};
use crate::{Error, Result};

fn base_spec(master_seed: u64, d: usize, window: u32, horizon: u32) -> FieldSpec {
    FieldSpec {
        master_seed,
        dimension: d,
        window,
        horizon,
        replicate: 0,
    }
}

/// Window/horizon sizing for a passage to a target of the given norm.
fn default_extent(norm: u64) -> u32 {
    (8 * norm).max(64) as u32
}

/// Run `f` once per replicate in parallel; the output vector is indexed by
/// replicate, so any later fold is order-deterministic.
fn map_replicates<T, F>(spec: &FieldSpec, replicates: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RandomField, &mut Sweeper) -> Result<T> + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map_init(Sweeper::new, |sw, i| {
            let field = RandomField::new(FieldSpec {
                replicate: i,
                ..spec.clone()
            })?;
            f(&field, sw)
        })
        .collect()
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuPoint {
    pub n: u64,
    pub record: EstimateRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuLadder {
    pub points: Vec<MuPoint>,
    /// Subadditivity diagnostic: each later estimate is no higher than the
    /// previous point's upper confidence limit.
    pub decreasing_within_ci: bool,
}

/// Estimates of `T(0, n x) / n` along a ladder of `n`.
pub fn estimate_mu(
    master_seed: u64,
    r: f64,
    x: &Site,
    ladder: &[u64],
    replicates: u64,
    ci_level: f64,
) -> Result<MuLadder> {
    if x.is_zero() {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    let origin = Site::zero(x.dim());
    let mut points = Vec::new();
    for &n in ladder {
        if n == 0 {
            return Err(Error::InvalidParameter("ladder entries must be >= 1".into()));
        }
        let target = x.scale(n as i64);
        let extent = default_extent(target.norm());
        let spec = base_spec(master_seed, x.dim(), extent, extent);
        let samples = map_replicates(&spec, replicates, |field, sw| {
            let cfg = field.config_at(r)?;
            let res = sw.first_passage(field, &cfg, &origin, &target)?;
            Ok(match res.value {
                PassageTime::Finite(t) if !res.censored => Some(t as f64 / n as f64),
                _ => None,
            })
        })?;
        let mut acc = Accum::default();
        for s in samples {
            match s {
                Some(v) => acc.push(v),
                None => acc.push_censored(),
            }
        }
        if acc.n == 0 {
            return Err(Error::AllCensored(replicates));
        }
        let record = EstimateRecord::from_accum(
            &acc,
            ci_level,
            spec,
            params(&[
                ("r", format!("{r}")),
                ("x", x.to_string()),
                ("n", n.to_string()),
            ]),
        );
        points.push(MuPoint { n, record });
    }
    let decreasing_within_ci = points
        .windows(2)
        .all(|w| w[1].record.estimate <= w[0].record.ci_high);
    Ok(MuLadder {
        points,
        decreasing_within_ci,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MuDifference {
    pub record: EstimateRecord,
    /// `mean difference / ((q - p) ||x||)`; NaN when `p == q`.
    pub ratio: f64,
    pub ratio_ci: (f64, f64),
    /// Samples below zero; the coupling makes the difference pathwise
    /// nonnegative, so anything here indicates a defect.
    pub negative_samples: u64,
}

/// Coupled estimate of `(T_p(0, n x) - T_q(0, n x)) / n` for `p <= q`, on
/// shared marks and walks. Replicates censored on either side are dropped
/// and counted.
pub fn estimate_mu_difference(
    master_seed: u64,
    p: f64,
    q: f64,
    x: &Site,
    n: u64,
    replicates: u64,
    ci_level: f64,
) -> Result<MuDifference> {
    if p > q {
        return Err(Error::InvalidParameter(format!(
            "sparse density {p} must not exceed dense density {q}"
        )));
    }
    if n == 0 || x.is_zero() {
        return Err(Error::InvalidParameter("need n >= 1 and x nonzero".into()));
    }
    let origin = Site::zero(x.dim());
    let target = x.scale(n as i64);
    let extent = default_extent(target.norm());
    let spec = base_spec(master_seed, x.dim(), extent, extent);
    let samples = map_replicates(&spec, replicates, |field, sw| {
        let sparse = field.config_at(p)?;
        let dense = field.config_at(q)?;
        let tp = sw.first_passage(field, &sparse, &origin, &target)?;
        let tq = sw.first_passage(field, &dense, &origin, &target)?;
        Ok(match (tp.censored, tq.censored, tp.value, tq.value) {
            (false, false, PassageTime::Finite(a), PassageTime::Finite(b)) => {
                Some((a as f64 - b as f64) / n as f64)
            }
            _ => None,
        })
    })?;
    let mut acc = Accum::default();
    let mut negative_samples = 0u64;
    for s in samples {
        match s {
            Some(v) => {
                if v < 0.0 {
                    negative_samples += 1;
                }
                acc.push(v);
            }
            None => acc.push_censored(),
        }
    }
    if acc.n == 0 {
        return Err(Error::AllCensored(replicates));
    }
    let record = EstimateRecord::from_accum(
        &acc,
        ci_level,
        spec,
        params(&[
            ("p", format!("{p}")),
            ("q", format!("{q}")),
            ("x", x.to_string()),
            ("n", n.to_string()),
        ]),
    );
    let scale = (q - p) * x.norm() as f64;
    let ratio = record.estimate / scale;
    let ratio_ci = (record.ci_low / scale, record.ci_high / scale);
    Ok(MuDifference {
        record,
        ratio,
        ratio_ci,
        negative_samples,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SiteInfluence {
    pub site: Site,
    pub mean: f64,
    pub stderr: f64,
    /// Replicates where this site's difference was nonzero.
    pub active: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InfluenceProfile {
    /// One entry per `z` in `B(0, N) \ {0, y}`, lex order.
    pub sites: Vec<SiteInfluence>,
    pub total: EstimateRecord,
    /// Samples that came out negative (possible when exactly one side of the
    /// difference is truncated away by the cutoff `N`).
    pub negative_samples: u64,
}

/// Per-site estimates of `E[U_z^0(y, N) - U_z^1(y, N)]` for `z` over
/// `B(0, N) \ {0, y}`, plus their sum.
///
/// A full recomputation per site would be ruinous; instead each replicate
/// computes the baseline passage once and recomputes only candidate sites:
/// occupied sites on the chosen geodesic (removal elsewhere cannot slow the
/// chain) and unoccupied sites whose activation label plus remaining distance
/// could beat the baseline (insertion elsewhere cannot help).
pub fn influence_profile(
    master_seed: u64,
    r: f64,
    y: &Site,
    n_radius: u32,
    replicates: u64,
    ci_level: f64,
) -> Result<InfluenceProfile> {
    let d = y.dim();
    let origin = Site::zero(d);
    if y.is_zero() {
        return Err(Error::InvalidParameter("target must be nonzero".into()));
    }
    if (n_radius as u64) < y.norm() {
        return Err(Error::InvalidParameter(format!(
            "cutoff radius {n_radius} below target norm {}: the truncated passage is identically zero",
            y.norm()
        )));
    }
    let n = n_radius as u64;
    let zs: Vec<Site> = enumerate(&Region::Ball {
        center: origin.clone(),
        radius: n,
    })?
    .into_iter()
    .filter(|z| z != &origin && z != y)
    .collect();
    let index: HashMap<Site, usize> = zs.iter().cloned().zip(0..).collect();
    let spec = base_spec(master_seed, d, n_radius, 2 * n_radius);

    let per_rep: Vec<Vec<(usize, f64)>> = map_replicates(&spec, replicates, |field, sw| {
        let cfg = field
            .config_at(r)?
            .with_override(origin.clone(), true);
        let base = sw.first_passage_with_margin(field, &cfg, &origin, y, 0)?;
        let t_base = base.value.finite().filter(|&t| t <= n);
        let u_base = t_base.unwrap_or(0) as f64;
        // bound below which an inserted frog at z could still matter
        let beat = t_base.map_or(n + 1, |t| t);
        let mut candidates: Vec<(Site, bool)> = Vec::new();
        if t_base.is_some() {
            for z in &base.geodesic[..base.geodesic.len() - 1] {
                if z != &origin {
                    candidates.push((z.clone(), true)); // occupied, try removal
                }
            }
        }
        // insertion at z only matters when activation(z) + |z - y| < beat,
        // so labels beyond beat - 1 are never needed
        sw.sweep_labels(field, &cfg, &origin, &origin, n_radius, beat.saturating_sub(1))?;
        let near: Vec<(Site, u64)> = sw.finalized_sites().collect();
        for (z, label) in near {
            if z == origin || &z == y || cfg.occupied(field, &z) {
                continue;
            }
            if label + z.distance(y) < beat {
                candidates.push((z, false)); // unoccupied, try insertion
            }
        }
        let mut diffs = Vec::with_capacity(candidates.len());
        for (z, occupied) in candidates {
            let Some(&zi) = index.get(&z) else { continue };
            let diff = if occupied {
                let u_off = sw.truncated_passage(field, &cfg, &z, false, y, n)? as f64;
                u_off - u_base
            } else {
                let u_on = sw.truncated_passage(field, &cfg, &z, true, y, n)? as f64;
                u_base - u_on
            };
            if diff != 0.0 {
                diffs.push((zi, diff));
            }
        }
        Ok(diffs)
    })?;

    let mut site_acc = vec![Accum::default(); zs.len()];
    let mut total_acc = Accum::default();
    let mut negative = 0u64;
    for diffs in &per_rep {
        let mut sum = 0.0;
        for &(zi, diff) in diffs {
            site_acc[zi].push(diff);
            sum += diff;
            if diff < 0.0 {
                negative += 1;
            }
        }
        total_acc.push(sum);
    }
    let sites = zs
        .into_iter()
        .enumerate()
        .map(|(i, site)| {
            let a = &site_acc[i];
            // zeros of inactive replicates: mean over all replicates
            let mean = a.sum / replicates as f64;
            let var = (a.sumsq - a.sum * a.sum / replicates as f64)
                / (replicates.saturating_sub(1).max(1)) as f64;
            SiteInfluence {
                site,
                mean,
                stderr: (var.max(0.0) / replicates as f64).sqrt(),
                active: a.n,
            }
        })
        .collect();
    let total = EstimateRecord::from_accum(
        &total_acc,
        ci_level,
        spec,
        params(&[
            ("r", format!("{r}")),
            ("y", y.to_string()),
            ("N", n.to_string()),
        ]),
    );
    Ok(InfluenceProfile {
        sites,
        total,
        negative_samples: negative,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RussoReport {
    pub influence_total: EstimateRecord,
    /// Central finite difference `-(E_{r+h}[U] - E_{r-h}[U]) / (2h)` on
    /// common random numbers.
    pub derivative: EstimateRecord,
    pub h: f64,
    pub agree_within_ci: bool,
}

/// Cross-check: the summed per-site influence at `r` against the coupled
/// finite-difference derivative of `E_r[U_0^1(y, N)]`. The two target the
/// same quantity.
pub fn russo_check(
    master_seed: u64,
    r: f64,
    h: f64,
    y: &Site,
    n_radius: u32,
    replicates: u64,
    ci_level: f64,
) -> Result<RussoReport> {
    if h <= 0.0 {
        return Err(Error::InvalidParameter(
            "finite-difference step must be positive".into(),
        ));
    }
    if r - h <= 0.0 || r + h > 1.0 {
        return Err(Error::BadProbability(r + h));
    }
    let d = y.dim();
    let origin = Site::zero(d);
    let n = n_radius as u64;
    let profile = influence_profile(master_seed, r, y, n_radius, replicates, ci_level)?;
    let spec = base_spec(master_seed, d, n_radius, 2 * n_radius);
    let samples = map_replicates(&spec, replicates, |field, sw| {
        let mut u_at = |rr: f64| -> Result<f64> {
            let cfg = field.config_at(rr)?;
            Ok(sw.truncated_passage(field, &cfg, &origin, true, y, n)? as f64)
        };
        let lo = u_at(r - h)?;
        let hi = u_at(r + h)?;
        Ok((lo - hi) / (2.0 * h))
    })?;
    let mut acc = Accum::default();
    for s in samples {
        acc.push(s);
    }
    let derivative = EstimateRecord::from_accum(
        &acc,
        ci_level,
        spec,
        params(&[
            ("r", format!("{r}")),
            ("h", format!("{h}")),
            ("y", y.to_string()),
            ("N", n.to_string()),
        ]),
    );
    let z = z_quantile(ci_level);
    let gap = (profile.total.estimate - derivative.estimate).abs();
    let joint = (profile.total.stderr.powi(2) + derivative.stderr.powi(2)).sqrt();
    Ok(RussoReport {
        influence_total: profile.total,
        derivative,
        h,
        agree_within_ci: gap <= z * joint,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelayCensus {
    /// Nonzero per-site frequencies of the delaying event, lex order.
    pub per_site: Vec<(Site, f64)>,
    /// `sum over z of estimated P(delay at z)`; equals the mean per-replicate
    /// count by bookkeeping.
    pub census_sum: f64,
    pub census_stderr: f64,
    pub e1_rate: f64,
    pub e2_rate: f64,
    /// Replicates whose baseline passage exceeded `c0 * ||y||`.
    pub gate_failures: u64,
    pub effective_replicates: u64,
    pub censored: u64,
    pub l: u32,
    pub c0_factor: f64,
}

/// Census of delaying events along realized geodesics: for interior geodesic
/// sites `z`, the event that the sphere passage from `z` is slow
/// (`T(z, D_L(z)) > L`) while the geodesic stays near `z` for a while
/// (first point beyond distance `L` is within `2L`). Also rates of the two
/// bulk regularity events: enough tight sphere exits along the geodesic, and
/// small total time of long hops.
pub fn delay_census(
    master_seed: u64,
    r: f64,
    l: u32,
    y: &Site,
    replicates: u64,
    c0_factor: f64,
) -> Result<DelayCensus> {
    if l == 0 {
        return Err(Error::InvalidParameter("sphere radius must be >= 1".into()));
    }
    if y.is_zero() {
        return Err(Error::InvalidParameter("target must be nonzero".into()));
    }
    let d = y.dim();
    let origin = Site::zero(d);
    let extent = ((c0_factor * y.norm() as f64).ceil() as u32).max(64);
    let spec = base_spec(master_seed, d, extent, extent);
    let gate_bound = c0_factor * y.norm() as f64;
    let e1_threshold = y.norm() as f64 / (6.0 * l as f64);
    let e2_threshold = y.norm() as f64 / (l as f64).powi(d as i32 + 3);

    struct RepOut {
        delays: Vec<Site>,
        gate_ok: bool,
        e1: bool,
        e2: bool,
    }

    let per_rep: Vec<Option<RepOut>> = map_replicates(&spec, replicates, |field, sw| {
        let cfg = field.config_at(r)?;
        let res = sw.first_passage(field, &cfg, &origin, y)?;
        let Some(t) = res.value.finite().filter(|_| !res.censored) else {
            return Ok(None);
        };
        let gate_ok = (t as f64) <= gate_bound;
        let nodes = geodesic_structure(&res, l as u64)?;
        // tight sphere exits along the whole geodesic (endpoints included)
        let mut tight_count = 0u64;
        let mut small = Sweeper::new();
        let mut tight = HashMap::new();
        for w in &res.geodesic {
            let is_tight = small.sphere_reach_is_tight(field, &cfg, w, l)?;
            tight.insert(w.clone(), is_tight);
            if is_tight {
                tight_count += 1;
            }
        }
        let long_hop_sum: u64 = res
            .hop_times
            .iter()
            .filter(|&&tau| tau > l as u64)
            .sum();
        let mut delays = Vec::new();
        for node in &nodes {
            let slow = !tight[&node.site];
            if slow && node.far_next.distance(&node.site) <= 2 * l as u64 {
                delays.push(node.site.clone());
            }
        }
        Ok(Some(RepOut {
            delays,
            gate_ok,
            e1: gate_ok && (tight_count as f64) < e1_threshold,
            e2: gate_ok && (long_hop_sum as f64) < e2_threshold,
        }))
    })?;

    let mut censored = 0u64;
    let mut gate_failures = 0u64;
    let mut e1_hits = 0u64;
    let mut e2_hits = 0u64;
    let mut count_acc = Accum::default();
    let mut site_hits: HashMap<Site, u64> = HashMap::new();
    let mut effective = 0u64;
    for rep in per_rep.iter() {
        let Some(out) = rep else {
            censored += 1;
            continue;
        };
        effective += 1;
        if !out.gate_ok {
            gate_failures += 1;
        }
        if out.e1 {
            e1_hits += 1;
        }
        if out.e2 {
            e2_hits += 1;
        }
        count_acc.push(out.delays.len() as f64);
        for z in &out.delays {
            *site_hits.entry(z.clone()).or_insert(0) += 1;
        }
    }
    if effective == 0 {
        return Err(Error::AllCensored(replicates));
    }
    let mut per_site: Vec<(Site, f64)> = site_hits
        .into_iter()
        .map(|(z, hits)| (z, hits as f64 / effective as f64))
        .collect();
    per_site.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(DelayCensus {
        per_site,
        census_sum: count_acc.mean(),
        census_stderr: count_acc.stderr(),
        e1_rate: e1_hits as f64 / effective as f64,
        e2_rate: e2_hits as f64 / effective as f64,
        gate_failures,
        effective_replicates: effective,
        censored,
        l,
        c0_factor,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayPoint {
    pub l: u32,
    pub hits: u64,
    pub replicates: u64,
    pub p: f64,
    /// Exact binomial interval; for zero-count cells only the upper limit is
    /// informative.
    pub ci: (f64, f64),
    pub zero_count: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereDecay {
    pub points: Vec<DecayPoint>,
    pub fit_intercept: f64,
    pub fit_slope: f64,
    pub fit_slope_stderr: f64,
    pub fit_r2: f64,
    /// One-sided test at 99%: the log-frequency slope is negative.
    pub slope_negative_99: bool,
}

/// Frequencies of the coincidence `T(0, D_L(0)) = L` under the
/// everything-occupied configuration, for each `L` in the list, from a single
/// shared sweep per replicate (a time-`L` tight chain never leaves
/// `B(0, L)`, so one window of the largest radius serves every `L`).
pub fn sphere_decay(
    master_seed: u64,
    d: usize,
    l_list: &[u32],
    replicates: u64,
    ci_level: f64,
) -> Result<SphereDecay> {
    let &l_max = l_list
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("need at least one radius".into()))?;
    if l_list.iter().any(|&l| l == 0) {
        return Err(Error::InvalidParameter("radii must be >= 1".into()));
    }
    if l_max > 62 {
        return Err(Error::InvalidParameter("radius beyond 62 unsupported".into()));
    }
    let origin = Site::zero(d);
    let spec = base_spec(master_seed, d, l_max, 2 * l_max);
    let masks: Vec<u64> = map_replicates(&spec, replicates, |field, sw| {
        let cfg = field.config_at(1.0)?;
        sw.sweep_labels(field, &cfg, &origin, &origin, l_max, l_max as u64)?;
        let mut mask = 0u64;
        for (site, label) in sw.finalized_sites() {
            if label == site.norm() && label > 0 {
                mask |= 1 << label;
            }
        }
        Ok(mask)
    })?;
    let mut points = Vec::new();
    for &l in l_list {
        let hits = masks.iter().filter(|&&m| m & (1 << l) != 0).count() as u64;
        let p = hits as f64 / replicates as f64;
        points.push(DecayPoint {
            l,
            hits,
            replicates,
            p,
            ci: clopper_pearson(hits, replicates, ci_level),
            zero_count: hits == 0,
        });
    }
    let fit_pts: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|pt| pt.hits > 0 && pt.l > 1)
        .map(|pt| (pt.l as f64, pt.p.ln(), pt.hits as f64))
        .collect();
    let (a, b, se, r2) = weighted_line_fit(&fit_pts).unwrap_or((f64::NAN, f64::NAN, f64::NAN, 0.0));
    let z99_one_sided = z_quantile(0.98);
    Ok(SphereDecay {
        points,
        fit_intercept: a,
        fit_slope: b,
        fit_slope_stderr: se,
        fit_r2: r2,
        slope_negative_99: b + z99_one_sided * se < 0.0,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFit {
    pub t_grid: Vec<u64>,
    /// `P(T(0,y) >= t)` per grid point (censored samples count as large).
    pub tail: Vec<f64>,
    /// `P(T(0,y) = tau(0,y) and T >= t)`: the direct walk is itself optimal.
    pub direct_tail: Vec<f64>,
    /// `(c, c', alpha, log-space residual)` of `c exp(-c' t^alpha)`, when the
    /// tail has enough mass to fit. Descriptive only.
    pub fit: Option<(f64, f64, f64, f64)>,
    pub insufficient_tail_mass: bool,
    pub replicates: u64,
    pub censored: u64,
}

pub fn tail_fit(
    master_seed: u64,
    r: f64,
    y: &Site,
    t_grid: &[u64],
    replicates: u64,
) -> Result<TailFit> {
    if y.is_zero() || t_grid.is_empty() {
        return Err(Error::InvalidParameter(
            "need a nonzero target and a nonempty grid".into(),
        ));
    }
    let d = y.dim();
    let origin = Site::zero(d);
    let extent = default_extent(y.norm());
    let spec = base_spec(master_seed, d, extent, extent);
    let samples: Vec<(Option<u64>, Option<u64>)> =
        map_replicates(&spec, replicates, |field, sw| {
            let cfg = field.config_at(r)?;
            let res = sw.first_passage_with_margin(field, &cfg, &origin, y, 0)?;
            let t = res.value.finite();
            let tau = hitting_time(field, &origin, y, field.horizon()).finite();
            Ok((t, tau))
        })?;
    let censored = samples.iter().filter(|(t, _)| t.is_none()).count() as u64;
    let mut tail = Vec::new();
    let mut direct_tail = Vec::new();
    for &t0 in t_grid {
        let hit = samples
            .iter()
            .filter(|(t, _)| t.map_or(true, |v| v >= t0))
            .count();
        tail.push(hit as f64 / replicates as f64);
        let both = samples
            .iter()
            .filter(|(t, tau)| matches!((t, tau), (Some(a), Some(b)) if a == b && *a >= t0))
            .count();
        direct_tail.push(both as f64 / replicates as f64);
    }
    let pts: Vec<(f64, f64)> = t_grid
        .iter()
        .zip(&tail)
        .filter(|(_, &p)| p > 0.0 && p < 1.0)
        .map(|(&t, &p)| (t as f64, p))
        .collect();
    let insufficient = pts.len() < 3;
    let fit = if insufficient {
        None
    } else {
        crate::stats::stretched_exp_fit(&pts)
    };
    Ok(TailFit {
        t_grid: t_grid.to_vec(),
        tail,
        direct_tail,
        fit,
        insufficient_tail_mass: insufficient,
        replicates,
        censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::SignedPermutation;

    #[test]
    fn mu_samples_bounded_below_by_norm() {
        let x = Site::unit(2, 0);
        let ladder = estimate_mu(11, 1.0, &x, &[4, 8], 200, 0.95).unwrap();
        for pt in &ladder.points {
            assert!(pt.record.estimate >= x.norm() as f64);
            assert!(pt.record.censored == 0);
        }
        assert!(ladder.decreasing_within_ci);
    }

    #[test]
    fn mu_symmetry_metamorphic() {
        // Estimating along g.x with conjugated fields must equal estimating
        // along x; here we use the lattice symmetry of the generator itself:
        // same seed, direction mapped by a coordinate swap, statistics agree
        // in distribution. Pathwise equality needs conjugation, so check the
        // conjugated single-replicate samples directly.
        let g = SignedPermutation::new(vec![1, 0], vec![false, false]).unwrap();
        let x = Site::new(vec![1, 0]);
        let gx = g.apply(&x);
        let origin = Site::zero(2);
        for rep in 0..20 {
            let spec = base_spec(97, 2, 64, 64);
            let f = RandomField::new(FieldSpec { replicate: rep, ..spec.clone() }).unwrap();
            let fg = f.symmetry_conjugate(&g).unwrap();
            let cfg = f.config_at(0.8).unwrap();
            let mut sw = Sweeper::new();
            let a = sw
                .first_passage(&f, &cfg, &origin, &x.scale(5))
                .unwrap()
                .value;
            let b = sw
                .first_passage(&fg, &cfg, &origin, &gx.scale(5))
                .unwrap()
                .value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn difference_nonnegative_and_degenerate_zero() {
        let x = Site::unit(2, 0);
        let diff = estimate_mu_difference(13, 0.6, 0.9, &x, 8, 300, 0.95).unwrap();
        assert!(diff.record.estimate >= 0.0);
        assert!(diff.ratio >= 0.0);
        let zero = estimate_mu_difference(13, 0.7, 0.7, &x, 8, 100, 0.95).unwrap();
        assert_eq!(zero.record.estimate, 0.0);
        assert_eq!(zero.record.stderr, 0.0);
        assert!(estimate_mu_difference(13, 0.9, 0.6, &x, 8, 10, 0.95).is_err());
    }

    #[test]
    fn influence_far_sites_are_silent() {
        // cutoff comfortably above typical passage times, so truncation is
        // rare and the total reflects plain slowdowns
        let y = Site::new(vec![3, 0]);
        let prof = influence_profile(29, 0.7, &y, 32, 400, 0.95).unwrap();
        // a site far off the corridor between 0 and y
        let far = Site::new(vec![-6, -6]);
        let rec = prof.sites.iter().find(|s| s.site == far).unwrap();
        assert_eq!(rec.active, 0);
        assert_eq!(rec.mean, 0.0);
        // total is positive: the passage does respond to density
        assert!(prof.total.estimate > 0.0);
    }

    #[test]
    fn influence_brute_force_equivalence_small() {
        // On tiny instances, compare the pruned per-replicate differences
        // against recomputing U for every site from scratch.
        let y = Site::new(vec![2, 1]);
        let n_radius = 6u32;
        let n = n_radius as u64;
        let origin = Site::zero(2);
        let spec = base_spec(31, 2, n_radius, 2 * n_radius);
        let zs: Vec<Site> = enumerate(&Region::Ball {
            center: origin.clone(),
            radius: n,
        })
        .unwrap()
        .into_iter()
        .filter(|z| z != &origin && z != &y)
        .collect();
        let prof = influence_profile(31, 0.6, &y, n_radius, 60, 0.95).unwrap();
        let mut brute_sums = vec![0.0; zs.len()];
        let mut sw = Sweeper::new();
        for rep in 0..60 {
            let field = RandomField::new(FieldSpec {
                replicate: rep,
                ..spec.clone()
            })
            .unwrap();
            let cfg = field.config_at(0.6).unwrap();
            for (i, z) in zs.iter().enumerate() {
                let u0 = sw.truncated_passage(&field, &cfg, z, false, &y, n).unwrap();
                let u1 = sw.truncated_passage(&field, &cfg, z, true, &y, n).unwrap();
                brute_sums[i] += u0 as f64 - u1 as f64;
            }
        }
        for (i, z) in zs.iter().enumerate() {
            let rec = prof.sites.iter().find(|s| &s.site == z).unwrap();
            let brute_mean = brute_sums[i] / 60.0;
            assert!(
                (rec.mean - brute_mean).abs() < 1e-9,
                "site {z}: pruned {} vs brute {brute_mean}",
                rec.mean
            );
        }
    }

    #[test]
    fn russo_agreement_on_small_instance() {
        let y = Site::new(vec![2, 1]);
        let rep = russo_check(37, 0.7, 0.05, &y, 6, 4000, 0.95).unwrap();
        assert!(rep.agree_within_ci, "influence {} vs derivative {}",
            rep.influence_total.estimate, rep.derivative.estimate);
        assert!(russo_check(37, 0.7, 0.0, &y, 6, 10, 0.95).is_err());
        assert!(russo_check(37, 0.99, 0.05, &y, 6, 10, 0.95).is_err());
    }

    #[test]
    fn census_bookkeeping_identity_and_degenerate_l() {
        let y = Site::new(vec![10, 0]);
        let census = delay_census(41, 1.0, 2, &y, 150, 8.0).unwrap();
        let freq_sum: f64 = census.per_site.iter().map(|(_, f)| f).sum();
        assert!((freq_sum - census.census_sum).abs() < 1e-9);
        // L at least the norm: no interior room for slow spheres
        let big = delay_census(41, 1.0, 12, &y, 60, 8.0).unwrap();
        assert!(big.census_sum <= 0.2);
    }

    #[test]
    fn sphere_decay_basics() {
        let decay = sphere_decay(43, 2, &[1, 2, 3, 4], 3000, 0.95).unwrap();
        assert_eq!(decay.points[0].p, 1.0, "first step always lands on the sphere");
        let p2 = decay.points[1].p;
        let p4 = decay.points[3].p;
        assert!(p4 < p2);
        assert!(decay.fit_slope < 0.0);
    }

    #[test]
    fn tail_is_monotone_and_starts_at_one() {
        let y = Site::new(vec![4, 0]);
        let fit = tail_fit(47, 0.7, &y, &[0, 4, 6, 8, 12, 20], 500).unwrap();
        assert_eq!(fit.tail[0], 1.0);
        for w in fit.tail.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for (a, b) in fit.direct_tail.iter().zip(&fit.tail) {
            assert!(a <= b);
        }
    }
}
