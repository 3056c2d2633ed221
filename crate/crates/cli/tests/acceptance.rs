//! Acceptance gate: every release-blocking criterion in one target, each
//! reported as its own pass/fail line. Budgets are pinned; the whole run is
//! sized for a single workstation core in an optimized build.

use std::process::Command;

use froglab_core::estimators::{
    delay_census, estimate_mu_difference, russo_check, sphere_decay,
};
use froglab_core::field::{FieldSpec, RandomField};
use froglab_core::lattice::{enumerate, Region, SignedPermutation, Site};
use froglab_core::oracle::{
    axis_event_split, delta2_axis_sum, delta2_passage_sum, orthant_shell_hit_prob,
    q_small, rat,
};
use froglab_core::passage::{Config, PassageTime, Sweeper};
use froglab_core::shape::shape_difference;
use froglab_core::stats::Accum;

const SEED: u64 = 20260826;

struct Gate {
    results: Vec<(String, bool, String)>,
}

impl Gate {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!(
            "criterion {:<28} {}  ({})",
            name,
            if pass { "PASS" } else { "FAIL" },
            detail
        );
        self.results.push((name.to_string(), pass, detail));
    }
}

#[test]
fn acceptance_gate() {
    let mut gate = Gate {
        results: Vec::new(),
    };
    exact_values(&mut gate);
    brute_force_equivalence(&mut gate);
    pathwise_invariants(&mut gate);
    density_difference_ladder(&mut gate);
    derivative_cross_check(&mut gate);
    sphere_decay_curve(&mut gate);
    delay_census_mass(&mut gate);
    shape_separation(&mut gate);
    byte_determinism(&mut gate);
    let failed: Vec<&str> = gate
        .results
        .iter()
        .filter(|(_, p, _)| !p)
        .map(|(n, _, _)| n.as_str())
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}

/// 1. Exact rational identities on small instances.
fn exact_values(gate: &mut Gate) {
    let mut ok = true;
    let mut notes = Vec::new();

    let shell3 = orthant_shell_hit_prob(2, 3).unwrap();
    ok &= shell3 == rat(1, 8);
    notes.push(format!("orthant shell hit at 3: {shell3}"));

    let split = axis_event_split(2, 0).unwrap();
    ok &= split.direct_only == rat(3, 64)
        && split.relay_only == rat(3, 64)
        && split.both == rat(1, 64);
    notes.push(format!(
        "axis split: {}/{}/{}",
        split.direct_only, split.relay_only, split.both
    ));

    let axis = delta2_axis_sum(2).unwrap();
    ok &= axis == rat(7, 32);
    let sum = delta2_passage_sum(2).unwrap();
    ok &= sum.total == rat(7, 16);
    ok &= sum.total < rat(1, 2);
    ok &= sum.total <= rat(1, 2) - rat(1, 32); // 1/2 - 1/(8 d^2) at d = 2
    notes.push(format!("two-step shell sum: {}", sum.total));

    let q3 = q_small(3, 2).unwrap();
    let two_q3 = &q3 + &q3;
    ok &= two_q3 == rat(1, 2) + &sum.total;
    ok &= two_q3 < rat(1, 1);
    notes.push(format!("2 q3 = {two_q3}"));

    gate.check("exact-values", ok, notes.join("; "));
}

/// 2. Engine versus independent brute-force chain enumeration.
fn brute_force_equivalence(gate: &mut Gate) {
    fn brute(field: &RandomField, cfg: &Config, y: &Site, w: u64, h: u64) -> Option<u64> {
        let origin = Site::zero(field.dimension());
        if y == &origin {
            return Some(0);
        }
        let sites = enumerate(&Region::Ball {
            center: origin.clone(),
            radius: w,
        })
        .unwrap();
        let occ: Vec<Site> = sites
            .into_iter()
            .filter(|s| cfg.occupied(field, s))
            .collect();
        let tau = |u: &Site, v: &Site| -> Option<u64> {
            field
                .walk_steps(u)
                .take(h as usize)
                .position(|p| &p == v)
                .map(|k| k as u64 + 1)
        };
        #[allow(clippy::too_many_arguments)]
        fn dfs(
            cur: &Site,
            t: u64,
            used: &mut Vec<Site>,
            occ: &[Site],
            y: &Site,
            h: u64,
            tau: &dyn Fn(&Site, &Site) -> Option<u64>,
            best: &mut Option<u64>,
        ) {
            if t >= best.unwrap_or(u64::MAX) || t > h {
                return;
            }
            if let Some(k) = tau(cur, y) {
                let tot = t + k;
                if tot <= h && tot < best.unwrap_or(u64::MAX) {
                    *best = Some(tot);
                }
            }
            for z in occ {
                if z == cur || z == y || used.contains(z) {
                    continue;
                }
                if let Some(k) = tau(cur, z) {
                    used.push(z.clone());
                    dfs(z, t + k, used, occ, y, h, tau, best);
                    used.pop();
                }
            }
        }
        let mut best = None;
        dfs(
            &origin,
            0,
            &mut vec![origin.clone()],
            &occ,
            y,
            h,
            &tau,
            &mut best,
        );
        best
    }

    let origin = Site::zero(2);
    let targets = [
        Site::new(vec![1, 1]),
        Site::new(vec![2, 0]),
        Site::new(vec![0, 2]),
        Site::new(vec![1, -1]),
    ];
    let mut sw = Sweeper::new();
    let mut checked = 0u64;
    let mut mismatches = 0u64;
    for &r in &[0.5, 1.0] {
        for y in &targets {
            for rep in 0..20 {
                let field = RandomField::new(FieldSpec {
                    master_seed: 77,
                    dimension: 2,
                    window: 2,
                    horizon: 4,
                    replicate: rep,
                })
                .unwrap();
                let cfg = field.config_at(r).unwrap();
                let res = sw
                    .first_passage_with_margin(&field, &cfg, &origin, y, 0)
                    .unwrap();
                let engine = match res.value {
                    PassageTime::Finite(t) if !res.censored => Some(t),
                    _ => None,
                };
                if engine != brute(&field, &cfg, y, 2, 4) {
                    mismatches += 1;
                }
                checked += 1;
            }
        }
    }
    gate.check(
        "brute-force-equivalence",
        checked >= 100 && mismatches == 0,
        format!("{checked} instances, {mismatches} mismatches"),
    );
}

/// 3. Pathwise invariants over many independent realizations.
fn pathwise_invariants(gate: &mut Gate) {
    let origin = Site::zero(2);
    let y = Site::new(vec![2, 1]);
    let mut sw = Sweeper::new();
    let mut violations = 0u64;
    let reps = 10_000u64;
    for rep in 0..reps {
        let f = RandomField::new(FieldSpec {
            master_seed: 555,
            dimension: 2,
            window: 16,
            horizon: 32,
            replicate: rep,
        })
        .unwrap();
        let cfg = f.config_at(0.6).unwrap();
        let res = sw
            .first_passage_with_margin(&f, &cfg, &origin, &y, 0)
            .unwrap();
        if let PassageTime::Finite(t) = res.value {
            if t < y.norm() || res.hop_times.iter().sum::<u64>() != t {
                violations += 1;
            }
            for (pair, &hop) in res.geodesic.windows(2).zip(&res.hop_times) {
                if hop < pair[0].distance(&pair[1]) {
                    violations += 1;
                }
            }
        }
        let sparse = sw
            .first_passage_with_margin(&f, &f.config_at(0.3).unwrap(), &origin, &y, 0)
            .unwrap();
        if !ge(&sparse.value, &res.value) {
            violations += 1;
        }
        let probe = Site::new(vec![1, 0]);
        let with = sw
            .forced_passage(&f, &cfg, &probe, true, &origin, &y)
            .unwrap();
        let without = sw
            .forced_passage(&f, &cfg, &probe, false, &origin, &y)
            .unwrap();
        if !ge(&without.value, &res.value) || !ge(&res.value, &with.value) {
            violations += 1;
        }
        // Chain triangle inequality, when the midpoint is occupied.
        if rep < 2_000 && cfg.occupied(&f, &y) {
            let z = Site::new(vec![3, -1]);
            let yz = sw
                .first_passage_with_margin(&f, &cfg, &y, &z, 0)
                .unwrap()
                .value;
            let oz = sw
                .first_passage_with_margin(&f, &cfg, &origin, &z, 0)
                .unwrap()
                .value;
            if let (PassageTime::Finite(a), PassageTime::Finite(b)) = (res.value, yz) {
                match oz {
                    PassageTime::Finite(c) if c > a + b => violations += 1,
                    PassageTime::Censored if a + b <= 32 => violations += 1,
                    _ => {}
                }
            }
        }
        // Symmetry metamorphism: conjugating the field maps the passage
        // time onto the transformed target.
        if rep < 1_000 {
            let swap = SignedPermutation::new(vec![1, 0], vec![false, false]).unwrap();
            let g = f.symmetry_conjugate(&swap).unwrap();
            let gres = sw
                .first_passage_with_margin(
                    &g,
                    &g.config_at(0.6).unwrap(),
                    &origin,
                    &Site::new(vec![1, 2]),
                    0,
                )
                .unwrap();
            if gres.value != res.value {
                violations += 1;
            }
        }
    }
    gate.check(
        "pathwise-invariants",
        violations == 0,
        format!("{reps} replicates, {violations} violations"),
    );
}

fn ge(a: &PassageTime, b: &PassageTime) -> bool {
    match (a, b) {
        (PassageTime::Censored, _) => true,
        (PassageTime::Finite(_), PassageTime::Censored) => false,
        (PassageTime::Finite(x), PassageTime::Finite(y)) => x >= y,
    }
}

/// 4. Coupled density differences along a ladder of adjacent density pairs:
/// nonnegative, bounded per unit density gap, and comparable across pairs.
fn density_difference_ladder(gate: &mut Gate) {
    let x = Site::new(vec![1, 0]);
    let densities = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
    let mut ok = true;
    let mut ratios = Vec::new();
    for pair in densities.windows(2) {
        let diff = estimate_mu_difference(SEED, pair[0], pair[1], &x, 40, 2_000, 0.95).unwrap();
        ok &= diff.negative_samples == 0;
        ok &= diff.record.estimate >= 0.0;
        ok &= diff.ratio_ci.0 > 0.0;
        ratios.push(diff.ratio);
    }
    let (min, max) = (
        ratios.iter().cloned().fold(f64::MAX, f64::min),
        ratios.iter().cloned().fold(f64::MIN, f64::max),
    );
    ok &= min > 0.0 && max / min < 10.0;
    gate.check(
        "density-difference-ladder",
        ok,
        format!("ratios per unit gap in [{min:.3}, {max:.3}]"),
    );
}

/// 5. Summed per-site influence against the finite-difference derivative of
/// the truncated mean passage, plus positivity of both at a cutoff generous
/// enough that truncation is rare.
fn derivative_cross_check(gate: &mut Gate) {
    use rayon::prelude::*;
    let y = Site::new(vec![10, 0]);
    let (r, h, cutoff) = (0.7, 0.05, 80u32);
    let report = russo_check(SEED, r, h, &y, cutoff, 20_000, 0.95).unwrap();

    // Independent high-precision central difference, 1e5 coupled pairs.
    let origin = Site::zero(2);
    let spec = FieldSpec {
        master_seed: SEED,
        dimension: 2,
        window: cutoff,
        horizon: 2 * cutoff as u32,
        replicate: 0,
    };
    let samples: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map_init(Sweeper::new, |sw, i| {
            let f = RandomField::new(FieldSpec {
                replicate: i,
                ..spec.clone()
            })
            .unwrap();
            let up = sw
                .truncated_passage(&f, &f.config_at(r + h).unwrap(), &origin, true, &y, cutoff as u64)
                .unwrap() as f64;
            let dn = sw
                .truncated_passage(&f, &f.config_at(r - h).unwrap(), &origin, true, &y, cutoff as u64)
                .unwrap() as f64;
            (dn - up) / (2.0 * h)
        })
        .collect();
    let mut acc = Accum::default();
    for s in samples {
        acc.push(s);
    }
    let derivative_positive = acc.mean() - 1.96 * acc.stderr() > 0.0;
    let influence_positive =
        report.influence_total.estimate - 1.96 * report.influence_total.stderr > 0.0;
    let ok = report.agree_within_ci && derivative_positive && influence_positive;
    gate.check(
        "derivative-cross-check",
        ok,
        format!(
            "influence {:.2}+/-{:.2}, derivative {:.2}+/-{:.2}, agree {}",
            report.influence_total.estimate,
            report.influence_total.stderr,
            acc.mean(),
            acc.stderr(),
            report.agree_within_ci
        ),
    );
}

/// 6. Frequency of a tight sphere exit: 1 at radius 1, strictly decreasing,
/// log-slope negative at 99% confidence.
fn sphere_decay_curve(gate: &mut Gate) {
    let radii: Vec<u32> = (1..=12).collect();
    let decay = sphere_decay(SEED, 2, &radii, 200_000, 0.95).unwrap();
    let first_is_one = decay.points[0].p == 1.0;
    let decreasing = decay.points.windows(2).all(|w| w[1].p < w[0].p);
    let ok = first_is_one && decreasing && decay.slope_negative_99;
    gate.check(
        "sphere-decay",
        ok,
        format!(
            "p(1) = {}, strictly decreasing {}, slope {:.4} negative at 99%: {}",
            decay.points[0].p, decreasing, decay.fit_slope, decay.slope_negative_99
        ),
    );
}

/// 7. Delay census at full occupancy on a long geodesic: expected number of
/// delaying events along the way is substantial.
fn delay_census_mass(gate: &mut Gate) {
    let y = Site::new(vec![100, 0]);
    let census = delay_census(SEED, 1.0, 5, &y, 10_000, 8.0).unwrap();
    let lower = census.census_sum - 1.645 * census.census_stderr;
    let ok = lower >= 5.0 && census.effective_replicates > 9_000;
    gate.check(
        "delay-census",
        ok,
        format!(
            "census sum {:.3} (one-sided 95% lower {:.3}), {} effective replicates",
            census.census_sum, lower, census.effective_replicates
        ),
    );
}

/// 8. Coupled shape comparison at two densities: the sparse visited set is
/// nested in the dense one and the normalized Hausdorff gap is separated
/// from zero.
fn shape_separation(gate: &mut Gate) {
    let diff = shape_difference(SEED, 2, 0.5, 1.0, 100, 500, 0.95).unwrap();
    let ok = diff.nested && diff.separated_from_zero;
    gate.check(
        "shape-separation",
        ok,
        format!(
            "gap {:.4}+/-{:.4}, nested {}, separated {}",
            diff.record.estimate, diff.record.stderr, diff.nested, diff.separated_from_zero
        ),
    );
}

/// 9. Byte-identical results across thread counts.
fn byte_determinism(gate: &mut Gate) {
    let bin = env!("CARGO_BIN_EXE_froglab");
    let base = std::env::temp_dir().join(format!("froglab-acceptance-{}", std::process::id()));
    let run = |threads: &str, out: &std::path::Path| {
        let status = Command::new(bin)
            .args([
                "passage",
                "--r",
                "0.7",
                "--target",
                "6,2",
                "--replicates",
                "4000",
                "--seed",
                "99",
                "--threads",
                threads,
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (a, b) = (base.join("t1"), base.join("t4"));
    run("1", &a);
    run("4", &b);
    let mut ok = true;
    for name in ["results.csv", "results.json"] {
        let fa = std::fs::read(a.join(name)).unwrap();
        let fb = std::fs::read(b.join(name)).unwrap();
        ok &= fa == fb;
    }
    std::fs::remove_dir_all(&base).ok();
    gate.check(
        "byte-determinism",
        ok,
        "results.csv and results.json identical for --threads 1 and 4".to_string(),
    );
}
