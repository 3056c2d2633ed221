//! Visited sets, normalized shape estimates, and Hausdorff distances
//! between scaled point clouds.

use serde::{Deserialize, Serialize};

use crate::field::{FieldSpec, RandomField};
use crate::lattice::Site;
use crate::passage::{Config, Sweeper};
use crate::stats::{z_quantile, Accum, EstimateRecord};
use crate::{Error, Result};

/// Exact `B(t) = { x : T(0, x) <= t }` for one realization, in lex order.
/// Requires the field's window to be at least `t` (the speed limit then
/// guarantees the sweep cannot be clipped).
pub fn visited_set(field: &RandomField, config: &Config, t: u64) -> Result<Vec<Site>> {
    let w = field.window();
    if (w as u64) < t {
        return Err(Error::WindowTooSmall { window: w, needed: t });
    }
    let origin = Site::zero(field.dimension());
    let mut sw = Sweeper::new();
    sw.sweep_labels(field, config, &origin, &origin, w, t)?;
    let mut sites: Vec<Site> = sw
        .finalized_sites()
        .map(|(site, label)| {
            debug_assert!(label <= t);
            site
        })
        .collect();
    // defensive: a sublevel set reaching the window edge would mean the
    // window clipped it, which the precondition is meant to exclude
    if sites.iter().any(|s| s.norm() == w as u64 && w as u64 > t) {
        return Err(Error::WindowTooSmall { window: w, needed: t });
    }
    sites.sort();
    Ok(sites)
}

/// The default probe directions: the `2d` signed axes plus all `2^d`
/// diagonals.
pub fn probe_directions(d: usize) -> Vec<Site> {
    let mut dirs = Vec::new();
    for i in 0..d {
        dirs.push(Site::unit(d, i));
        dirs.push(Site::unit(d, i).scale(-1));
    }
    let mut diag = vec![Site::new(vec![])];
    for _ in 0..d {
        let mut next = Vec::new();
        for s in &diag {
            for sign in [1i64, -1] {
                let mut t = s.clone();
                t.0.push(sign);
                next.push(t);
            }
        }
        diag = next;
    }
    dirs.extend(diag);
    dirs
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionRadius {
    pub direction: Site,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub t: u64,
    pub radii: Vec<DirectionRadius>,
    /// `B(t)/t` of the first replicate, as scaled float points.
    pub cloud: Vec<Vec<f64>>,
    /// Whether every pair of directions related by a lattice symmetry
    /// reported statistically equal radii (4 sigma).
    pub symmetric: bool,
    pub replicates: u64,
    pub field: FieldSpec,
}

/// Furthest normalized reach of `B(t)` along `v`: the largest `k ||v|| / t`
/// with `k v` visited.
fn reach(sites: &[Site], v: &Site, t: u64) -> f64 {
    let mut k = 1i64;
    let mut best = 0u64;
    loop {
        let p = v.scale(k);
        if p.norm() > t {
            break;
        }
        if sites.binary_search(&p).is_ok() {
            best = p.norm();
        }
        k += 1;
    }
    best as f64 / t as f64
}

/// Per-direction normalized reach of the visited set, averaged over
/// replicates.
pub fn shape_estimate(
    master_seed: u64,
    d: usize,
    r: f64,
    t: u64,
    replicates: u64,
) -> Result<ShapeEstimate> {
    use rayon::prelude::*;
    let dirs = probe_directions(d);
    let spec = FieldSpec {
        master_seed,
        dimension: d,
        window: t as u32,
        horizon: t as u32,
        replicate: 0,
    };
    let per_rep: Vec<(Vec<f64>, Option<Vec<Site>>)> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let field = RandomField::new(FieldSpec {
                replicate: i,
                ..spec.clone()
            })?;
            let cfg = field.config_at(r)?;
            let sites = visited_set(&field, &cfg, t)?;
            let reaches = dirs.iter().map(|v| reach(&sites, v, t)).collect();
            Ok((reaches, (i == 0).then_some(sites)))
        })
        .collect::<Result<_>>()?;
    let mut accs = vec![Accum::default(); dirs.len()];
    let mut cloud = Vec::new();
    for (reaches, sites) in &per_rep {
        for (a, &v) in accs.iter_mut().zip(reaches) {
            a.push(v);
        }
        if let Some(sites) = sites {
            cloud = sites
                .iter()
                .map(|s| s.0.iter().map(|&c| c as f64 / t as f64).collect())
                .collect();
        }
    }
    let radii: Vec<DirectionRadius> = dirs
        .iter()
        .zip(&accs)
        .map(|(v, a)| DirectionRadius {
            direction: v.clone(),
            mean: a.mean(),
            stderr: a.stderr(),
        })
        .collect();
    // all probe directions are equivalent under signed permutations within
    // their orbit (axes together, diagonals together)
    let symmetric = ["axis", "diag"].iter().all(|kind| {
        let group: Vec<&DirectionRadius> = radii
            .iter()
            .filter(|r| (r.direction.norm() == 1) == (*kind == "axis"))
            .collect();
        group.windows(2).all(|w| {
            let se = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            (w[0].mean - w[1].mean).abs() <= 4.0 * se.max(1e-12)
        })
    });
    Ok(ShapeEstimate {
        t,
        radii,
        cloud,
        symmetric,
        replicates,
        field: spec,
    })
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn directed(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| l1(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Exact Hausdorff distance between finite point clouds in l1 units.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// Hausdorff distance between lattice site sets via multi-source breadth
/// first search on the padded bounding box (an independent integer route to
/// the same quantity as [`hausdorff`] on the embedded clouds).
pub fn lattice_hausdorff(a: &[Site], b: &[Site]) -> Result<u64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    Ok(bfs_deviation(a, b).max(bfs_deviation(b, a)))
}

/// `max over x in targets of min over s in sources of |x - s|` by BFS from
/// all sources at once (l1 geodesics between box points stay in the box).
fn bfs_deviation(sources: &[Site], targets: &[Site]) -> u64 {
    let d = sources[0].dim();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for s in sources.iter().chain(targets) {
        for i in 0..d {
            lo[i] = lo[i].min(s.0[i]);
            hi[i] = hi[i].max(s.0[i]);
        }
    }
    let side: Vec<i64> = (0..d).map(|i| hi[i] - lo[i] + 1).collect();
    let size: usize = side.iter().map(|&s| s as usize).product();
    let index = |s: &Site| -> usize {
        let mut idx = 0usize;
        for i in 0..d {
            idx = idx * side[i] as usize + (s.0[i] - lo[i]) as usize;
        }
        idx
    };
    let mut dist = vec![u32::MAX; size];
    let mut frontier: Vec<Site> = Vec::new();
    for s in sources {
        let i = index(s);
        if dist[i] != 0 {
            dist[i] = 0;
            frontier.push(s.clone());
        }
    }
    let mut level = 0u32;
    while !frontier.is_empty() {
        level += 1;
        let mut next = Vec::new();
        for p in &frontier {
            for axis in 0..d {
                for sign in [1i64, -1] {
                    let mut q = p.clone();
                    q.0[axis] += sign;
                    if (0..d).any(|i| q.0[i] < lo[i] || q.0[i] > hi[i]) {
                        continue;
                    }
                    let qi = index(&q);
                    if dist[qi] == u32::MAX {
                        dist[qi] = level;
                        next.push(q);
                    }
                }
            }
        }
        frontier = next;
    }
    targets.iter().map(|t| dist[index(t)] as u64).max().unwrap()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeDifference {
    /// Mean per-replicate Hausdorff distance between the coupled scaled
    /// clouds `B_p(t)/t` and `B_q(t)/t`.
    pub record: EstimateRecord,
    /// Whether `B_p(t)` was contained in `B_q(t)` in every replicate
    /// (guaranteed by mark coupling when `p <= q`).
    pub nested: bool,
    /// Zero lies outside the interval.
    pub separated_from_zero: bool,
}

/// Coupled shape comparison at two densities on shared marks and walks.
pub fn shape_difference(
    master_seed: u64,
    d: usize,
    p: f64,
    q: f64,
    t: u64,
    replicates: u64,
    ci_level: f64,
) -> Result<ShapeDifference> {
    use rayon::prelude::*;
    let spec = FieldSpec {
        master_seed,
        dimension: d,
        window: t as u32,
        horizon: t as u32,
        replicate: 0,
    };
    let per_rep: Vec<(f64, bool)> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let field = RandomField::new(FieldSpec {
                replicate: i,
                ..spec.clone()
            })?;
            let sparse = visited_set(&field, &field.config_at(p)?, t)?;
            let dense = visited_set(&field, &field.config_at(q)?, t)?;
            let nested = sparse
                .iter()
                .all(|s| dense.binary_search(s).is_ok());
            let dh = lattice_hausdorff(&sparse, &dense)? as f64 / t as f64;
            Ok((dh, nested))
        })
        .collect::<Result<_>>()?;
    let mut acc = Accum::default();
    let mut nested = true;
    for &(dh, ok) in &per_rep {
        acc.push(dh);
        nested &= ok;
    }
    let record = EstimateRecord::from_accum(
        &acc,
        ci_level,
        spec,
        [
            ("p".to_string(), format!("{p}")),
            ("q".to_string(), format!("{q}")),
            ("t".to_string(), t.to_string()),
        ]
        .into_iter()
        .collect(),
    );
    let z = z_quantile(ci_level);
    let separated = record.estimate - z * record.stderr > 0.0;
    Ok(ShapeDifference {
        record,
        nested,
        separated_from_zero: separated,
    })
}
