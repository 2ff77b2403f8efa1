use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde_json::{json, Value};

use crate::analysis::{
    fit_decay_exponent, line_density, nested_count_check, nested_counts, occupation, poisson_gof,
    poisson_shift_distance, weighted_fit, DecaySample, Estimate, PoissonPair, RegressionResult, MIN_REPLICAS,
};
use crate::error::{Error, Result};
use crate::generations::{grow_generations, reach_probability, GenerationOptions, LargeSets};
use crate::lattice::{balanced_tuple, canonical_tuple, orbit_points, Ball, Packer, Point};
use crate::potential::{equilibrium, GreenOracle, MAX_SET_SIZE};
use crate::relations::{connectivity_ladder, estimate_composition, window_counts, CompositionSetup, VertexWalkFamily};
use crate::soup::{read_jsonl_file, write_jsonl_file, Base, SoupSampler};
use crate::stream::{child_seed, stream, Domain};
use crate::walk::{escapes, return_bound, simulate_forward, Region};

use super::config::{ExperimentConfig, Relation};
use super::report::{ExperimentReport, Table, TruncationEntry};
use super::svg::Plot;

const CI_METHOD: &str = "wilson-95";

fn oracle(cfg: &ExperimentConfig) -> Result<Arc<GreenOracle>> {
    Ok(Arc::new(GreenOracle::time_integral(cfg.d)?))
}

fn replica_seed(cfg: &ExperimentConfig, r: u64) -> u64 {
    child_seed(cfg.seed, Domain::Replica, r)
}

fn estimate_cells(e: &Estimate) -> Vec<Value> {
    vec![json!(e.successes), json!(e.trials), json!(e.p), json!(e.low), json!(e.high), json!(CI_METHOD)]
}

const ESTIMATE_COLUMNS: [&str; 6] = ["successes", "trials", "p", "ciLow", "ciHigh", "ciMethod"];

fn with_estimate(lead: &[&str]) -> Vec<String> {
    lead.iter().chain(ESTIMATE_COLUMNS.iter()).map(|s| s.to_string()).collect()
}

fn point_text(p: &Point) -> String {
    let c: Vec<String> = p.coords().iter().map(i32::to_string).collect();
    format!("({})", c.join(" "))
}

fn truncation(rep: &mut ExperimentReport, quantity: &str, escape: u32, bound: Option<f64>, note: &str) {
    rep.truncation.push(TruncationEntry { quantity: quantity.to_string(), escape_radius: escape, bound, note: note.to_string() });
}

/// Representatives of the orbits of the ball of radius `r`.
fn orbit_representatives(dim: usize, r: u32) -> Result<Vec<Point>> {
    let mut seen = FxHashSet::default();
    let mut out = Vec::new();
    for p in Ball::centered(dim, r)?.points() {
        if seen.insert(canonical_tuple(&p)) {
            let t = canonical_tuple(&p);
            let c: Vec<i32> = t[..dim].iter().map(|&v| v as i32).collect();
            out.push(Point::new(&c)?);
        }
    }
    out.sort_by_key(|p| (p.l1_norm(), std::cmp::Reverse(*p)));
    Ok(out)
}

pub(super) fn green(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let r = cfg.window_radius.max(1);
    let ti = oracle(cfg)?;
    let bx = GreenOracle::absorbing_box(cfg.d, r + 1)?;
    let reps = orbit_representatives(cfg.d, r)?;
    let mut t = Table::new("green", &["x", "norm", "timeIntegral", "absorbingBox", "relativeDifference"]);
    let mut worst: f64 = 0.0;
    for p in &reps {
        let (a, b) = (ti.green(p)?, bx.green(p)?);
        let rel = (a - b).abs() / a;
        worst = worst.max(rel);
        t.push(vec![json!(point_text(p)), json!(p.l1_norm()), json!(a), json!(b), json!(rel)]);
    }
    // G(x) − (1/2d) Σ_e G(x + e) = 1{x = 0}
    let mut residual: f64 = 0.0;
    for p in reps.iter().filter(|p| p.l1_norm() < r as u64) {
        let mean = p.neighbors().map(|q| ti.green(&q)).sum::<Result<f64>>()? / (2 * cfg.d) as f64;
        let delta = if p.l1_norm() == 0 { 1.0 } else { 0.0 };
        residual = residual.max((ti.green(p)? - mean - delta).abs());
    }
    let box_residual = bx.box_diagnostics().map_or(f64::NAN, |d| d.harmonic_residual);
    rep.tables.push(t);
    rep.verdict("oracle-agreement", worst <= cfg.accuracy, format!("largest relative difference {worst:.3e} (limit {:.1e})", cfg.accuracy));
    rep.verdict("harmonicity-time-integral", residual < 1e-8, format!("largest residual {residual:.3e}"));
    rep.verdict("harmonicity-absorbing-box", box_residual < 1e-8, format!("largest residual {box_residual:.3e}"));
    if cfg.plots {
        let pts = |o: &GreenOracle| reps.iter().filter(|p| p.l1_norm() > 0).map(|p| Ok((p.l1_norm() as f64, o.green(p)?))).collect::<Result<Vec<_>>>();
        rep.plots.push(
            Plot::new("green", "Green function by displacement", "|x|", "G(x)")
                .log_log()
                .with("time integral", pts(&ti)?, false)
                .with("absorbing box", pts(&bx)?, false),
        );
    }
    Ok(())
}

pub(super) fn capacity(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let o = oracle(cfg)?;
    let base = Base::ball(cfg.d, cfg.base_radius)?;
    let pts = base.to_points();
    if pts.len() > MAX_SET_SIZE {
        return Err(Error::ResourceCap(format!("ball of {} points exceeds the equilibrium limit {MAX_SET_SIZE}", pts.len())));
    }
    let table = equilibrium(&o, &pts)?;
    let cap0 = equilibrium(&o, &[Point::origin(cfg.d)?])?.capacity();
    let mut summary = Table::new("capacity", &["set", "points", "capacity", "solver", "residual"]);
    summary.push(vec![json!("{0}"), json!(1), json!(cap0), Value::Null, Value::Null]);
    summary.push(vec![
        json!(format!("ball(0,{})", cfg.base_radius)),
        json!(pts.len()),
        json!(table.capacity()),
        json!(format!("{:?}", table.solver)),
        json!(table.residual),
    ]);
    rep.tables.push(summary);

    let packer = Packer::new(cfg.d)?;
    let region = Region::from_points(&packer, &pts)?;
    let bound = return_bound(&o, table.capacity(), cfg.base_radius, cfg.escape_radius)?;
    let walks = cfg.walks;
    let mut cols = with_estimate(&["x", "eK", "eKNormalized"]);
    cols.extend(["z".to_string(), "withinBand".to_string()]);
    let mut t = Table { name: "equilibrium".into(), columns: cols, rows: Vec::new() };
    let indexed: Vec<(usize, Point)> = pts.iter().copied().enumerate().collect();
    let sims: Vec<Option<Estimate>> = indexed
        .par_iter()
        .map(|(i, p)| {
            if walks == 0 {
                return Ok(None);
            }
            let mut rng = stream(cfg.seed, Domain::Replica, *i as u64);
            let mut hits = 0u64;
            for _ in 0..walks {
                hits += escapes(p, &region, cfg.escape_radius, &mut rng)? as u64;
            }
            Ok(Some(Estimate::wilson(hits, walks)?))
        })
        .collect::<Result<_>>()?;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    for ((_, p), sim) in indexed.iter().zip(&sims) {
        let e = table.eq(p);
        let mut row = vec![json!(point_text(p)), json!(e), json!(table.norm_eq(p))];
        match sim {
            Some(s) => {
                let sd = (e * (1.0 - e) / walks as f64).sqrt();
                let dev = (s.p - e).abs();
                let ok = dev <= 3.0 * sd + bound;
                worst_excess = worst_excess.max(dev - 3.0 * sd - bound);
                row.extend(estimate_cells(s));
                row.push(if sd > 0.0 { json!((s.p - e) / sd) } else { Value::Null });
                row.push(json!(ok));
            }
            None => row.extend(std::iter::repeat_n(Value::Null, 8)),
        }
        t.push(row);
    }
    rep.tables.push(t);
    if walks > 0 {
        truncation(rep, "escape frequency", cfg.escape_radius, Some(bound), "walks reaching the escape radius count as escaped");
        rep.verdict(
            "escape-frequencies",
            worst_excess <= 0.0,
            format!("every site within 3 sd + truncation bound {bound:.2e} of e_K: largest excess {worst_excess:.3e}"),
        );
    }
    Ok(())
}

pub(super) fn sample_soup(cfg: &ExperimentConfig, rep: &mut ExperimentReport, out: Option<&Path>) -> Result<()> {
    let o = oracle(cfg)?;
    let base = Base::ball(cfg.d, cfg.base_radius)?;
    let sampler = SoupSampler::prepare(&o, &base)?;
    let window = Ball::centered(cfg.d, cfg.window_radius)?.points();
    let mut t = Table::new("soups", &["replica", "seed", "sampler", "trajectories", "capK", "truncationBound", "occupiedWindowPoints", "file"]);
    let mut counts = Vec::new();
    for r in 0..cfg.replicas {
        let seed = replica_seed(cfg, r);
        let soup = sampler.sample(cfg.u_low, cfg.u_high, cfg.escape_radius, seed)?;
        let file = format!("soup-{r:04}.jsonl");
        if let Some(dir) = out {
            write_jsonl_file(&soup, None, &dir.join(&file))?;
            rep.artifacts.push(file.clone());
        }
        counts.push(soup.len() as u64);
        t.push(vec![
            json!(r),
            json!(seed),
            json!(format!("{:?}", soup.sampler).to_lowercase()),
            json!(soup.len()),
            json!(soup.cap_k),
            json!(soup.truncation_bound),
            json!(soup.interlacement_set(&window).len()),
            json!(if out.is_some() { file } else { String::new() }),
        ]);
    }
    rep.tables.push(t);
    let bound = sampler.capacity().map(|c| return_bound(&o, c, cfg.base_radius, cfg.escape_radius)).transpose()?;
    truncation(rep, "trajectory traces", cfg.escape_radius, bound, "walks stop at the escape radius; the bound covers returns to the base");
    match sampler.capacity() {
        Some(c) if cfg.replicas >= 20 => {
            let mean = (cfg.u_high - cfg.u_low) * c;
            let gof = poisson_gof(&counts, mean)?;
            rep.verdict("count-poisson", gof.passes(), format!("Poisson({mean:.4}) goodness of fit p = {:.4}", gof.p_value));
        }
        _ => rep.notes.push("count goodness of fit needs the explicit sampler and at least 20 replicas".into()),
    }
    Ok(())
}

pub(super) fn connectivity(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let target = cfg.d.div_ceil(2);
    let window = Ball::centered(cfg.d, cfg.window_radius)?.points();
    if let Some(path) = &cfg.soup {
        let max_m = target.max(3) as u32;
        let soups = read_jsonl_file(path)?;
        let mut cols = vec!["soup", "seed", "trajectories", "occupied", "pairs"].into_iter().map(String::from).collect::<Vec<_>>();
        cols.extend((1..=max_m).map(|m| format!("within{m}")));
        let mut t = Table { name: "window".into(), columns: cols, rows: Vec::new() };
        let mut pairs = 0;
        for (i, (_, soup)) in soups.iter().enumerate() {
            let c = window_counts(soup, &window, max_m);
            pairs += c.pairs;
            let mut row = vec![json!(i), json!(soup.seed), json!(soup.len()), json!(c.occupied), json!(c.pairs)];
            row.extend(c.within.iter().map(|w| json!(w)));
            t.push(row);
        }
        rep.tables.push(t);
        rep.replicas = soups.len() as u64;
        if pairs == 0 {
            rep.inconclusive("window-pairs", "insufficient occupied pairs");
        }
        return Ok(());
    }

    let mut radii: Vec<u32> = if cfg.radii.is_empty() {
        vec![cfg.base_radius / 4, cfg.base_radius / 2, cfg.base_radius]
    } else {
        cfg.radii.clone()
    };
    radii.retain(|&r| r >= cfg.window_radius && r <= cfg.base_radius);
    radii.sort_unstable();
    radii.dedup();
    if radii.is_empty() {
        radii.push(cfg.base_radius);
    }
    let ladders = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| connectivity_ladder(cfg.d, cfg.window_radius, &radii, cfg.u_high - cfg.u_low, cfg.escape_radius, replica_seed(cfg, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut per = Table::new("ladder-replicas", &["replica", "baseRadius", "trajectories", "occupied", "pairs", "within1", "within2", "within3"]);
    for (r, l) in ladders.iter().enumerate() {
        for row in &l.rows {
            per.push(vec![
                json!(r),
                json!(row.base_radius),
                json!(row.trajectories),
                json!(l.occupied),
                json!(row.pairs),
                json!(row.within[0]),
                json!(row.within[1]),
                json!(row.within[2]),
            ]);
        }
    }
    let mut cols = with_estimate(&["baseRadius", "m"]);
    cols.push("replicas".into());
    let mut agg = Table { name: "ladder".into(), columns: cols, rows: Vec::new() };
    let mut fractions: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let total_pairs: u64 = ladders.iter().map(|l| l.rows[0].pairs).sum();
    for (i, &radius) in radii.iter().enumerate() {
        for m in 1..=3 {
            let within: u64 = ladders.iter().map(|l| l.rows[i].within[m - 1]).sum();
            if total_pairs > 0 {
                let e = Estimate::wilson(within, total_pairs)?;
                fractions[m - 1].push(e.p);
                let mut row = vec![json!(radius), json!(m)];
                row.extend(estimate_cells(&e));
                row.push(json!(cfg.replicas));
                agg.push(row);
            }
        }
    }
    rep.tables.push(agg);
    rep.tables.push(per);
    truncation(
        rep,
        "chain fractions",
        cfg.escape_radius,
        None,
        "trajectories are cut at the escape radius and bases are finite, so fractions are lower bounds",
    );
    rep.notes.push("pairs within one replica are dependent; the Wilson interval treats them as independent".into());
    if total_pairs == 0 {
        rep.inconclusive("ladder", "insufficient occupied pairs");
        return Ok(());
    }
    if target > 3 {
        rep.inconclusive("ladder", format!("chains of length {target} are not tracked (at most 3)"));
        return Ok(());
    }
    let f = &fractions[target - 1];
    let monotone = f.windows(2).all(|w| w[1] >= w[0]);
    rep.verdict("ladder-monotone", monotone, format!("fraction with chain distance <= {target}: {f:?}"));
    let last = *f.last().unwrap_or(&0.0);
    rep.verdict("ladder-threshold", last >= cfg.threshold, format!("{last:.4} at radius {} (required {})", radii.last().unwrap(), cfg.threshold));
    if cfg.plots {
        let mut p = Plot::new("ladder", "Connectivity of occupied window pairs", "base radius", "fraction of pairs");
        for m in 1..=3 {
            p = p.with(&format!("chain <= {m}"), radii.iter().map(|&r| r as f64).zip(fractions[m - 1].iter().copied()).collect(), true);
        }
        rep.plots.push(p);
    }
    Ok(())
}

/// Expected decay slope of a relation of stochastic dimension `dim`.
fn expected_slope(d: usize, dim: usize) -> f64 {
    -((d as f64 - dim as f64).max(0.0))
}

fn fit_verdict(rep: &mut ExperimentReport, check: &str, fit: &RegressionResult, expected: f64, tol: f64) {
    if expected == 0.0 {
        rep.verdict(check, fit.ci_contains(0.0), format!("slope {:.3}, CI [{:.3}, {:.3}] must contain 0", fit.slope, fit.slope_ci.0, fit.slope_ci.1));
    } else {
        let ok = (fit.slope - expected).abs() <= tol;
        rep.verdict(check, ok, format!("slope {:.3} (CI [{:.3}, {:.3}]), expected {expected} ± {tol}", fit.slope, fit.slope_ci.0, fit.slope_ci.1));
    }
}

pub(super) fn dimension(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let o = oracle(cfg)?;
    let d = cfg.d;
    let u = cfg.u_high - cfg.u_low;
    let mut gauges = cfg.gauges.clone();
    gauges.sort_unstable();
    gauges.dedup();
    let top = *gauges.last().ok_or_else(|| Error::Config { field: "gauges".into(), reason: "empty".into() })?;
    if top >= cfg.escape_radius {
        return Err(Error::Config { field: "escapeRadius".into(), reason: format!("must exceed the largest distance {top}") });
    }
    let packer = Packer::new(d)?;
    let origin = Point::origin(d)?;
    let xs: Vec<Point> = gauges.iter().map(|&g| balanced_tuple(d, g)).collect::<Result<_>>()?;
    let orbits: Vec<Vec<u64>> = xs.iter().map(|x| orbit_points(x).iter().map(|p| packer.pack(p)).collect()).collect::<Result<_>>()?;
    let g0 = o.green(&origin)?;
    let exact: Vec<Option<f64>> = xs
        .iter()
        .map(|x| {
            let gx = o.green(x)?;
            Ok(match cfg.relation {
                Relation::Hit | Relation::L | Relation::R => Some(gx / g0),
                Relation::M => Some(1.0 - (-u * 2.0 * gx / (g0 * (g0 + gx))).exp()),
                Relation::C => None,
            })
        })
        .collect::<Result<_>>()?;

    // pooled over the orbit of each point: successes summed over orbit points
    let pooled = |hit: &(dyn Fn(u64) -> Result<FxHashSet<u64>> + Sync)| -> Result<Vec<Estimate>> {
        let counts: Vec<Vec<u64>> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let set = hit(r)?;
                Ok(orbits.iter().map(|o| o.iter().filter(|k| set.contains(k)).count() as u64).collect())
            })
            .collect::<Result<_>>()?;
        orbits
            .iter()
            .enumerate()
            .map(|(i, o)| Estimate::wilson(counts.iter().map(|c| c[i]).sum(), cfg.replicas * o.len() as u64))
            .collect()
    };
    let estimates: Vec<Estimate> = match cfg.relation {
        Relation::Hit => pooled(&|r| {
            let mut rng = stream(cfg.seed, Domain::Replica, r);
            Ok(simulate_forward(&origin, cfg.escape_radius, &mut rng)?.keys().iter().copied().collect())
        })?,
        Relation::L => pooled(&|r| {
            let mut fam = VertexWalkFamily::new(d, replica_seed(cfg, r), cfg.escape_radius)?;
            fam.materialize(&origin)?;
            Ok(fam.trace(&origin).cloned().unwrap_or_default())
        })?,
        Relation::M => {
            let table = equilibrium(&o, &[origin])?;
            pooled(&|r| {
                let soup = crate::soup::sample_soup(&table, cfg.u_low, cfg.u_high, cfg.escape_radius, replica_seed(cfg, r))?;
                Ok(soup.trajectories().iter().flat_map(|t| t.trace().iter().copied()).collect())
            })?
        }
        Relation::R => {
            let okey = packer.pack(&origin)?;
            let hits: Vec<Vec<bool>> = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| {
                    let mut fam = VertexWalkFamily::new(d, replica_seed(cfg, r), cfg.escape_radius)?;
                    xs.iter()
                        .map(|x| {
                            fam.materialize(x)?;
                            Ok(fam.trace(x).is_some_and(|t| t.contains(&okey)))
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            (0..xs.len())
                .map(|i| Estimate::wilson(hits.iter().filter(|h| h[i]).count() as u64, cfg.replicas))
                .collect::<Result<_>>()?
        }
        Relation::C => {
            if top > cfg.base_radius {
                return Err(Error::Config { field: "baseRadius".into(), reason: format!("must contain the largest distance {top}") });
            }
            xs.iter()
                .enumerate()
                .map(|(i, x)| {
                    estimate_composition(
                        &o,
                        &CompositionSetup {
                            n: cfg.n,
                            x: origin,
                            y: *x,
                            u,
                            base: Base::ball(d, cfg.base_radius)?,
                            replicas: cfg.replicas,
                            seed: child_seed(cfg.seed, Domain::Replica, i as u64),
                            escape: cfg.escape_radius,
                        },
                    )
                })
                .collect::<Result<_>>()?
        }
    };

    let mut cols = with_estimate(&["gauge", "x", "orbitSize"]);
    cols.push("exact".into());
    let mut t = Table { name: "decay".into(), columns: cols, rows: Vec::new() };
    for (i, e) in estimates.iter().enumerate() {
        let mut row = vec![json!(gauges[i] + 1), json!(point_text(&xs[i])), json!(orbits[i].len())];
        row.extend(estimate_cells(e));
        row.push(json!(exact[i]));
        t.push(row);
    }
    rep.tables.push(t);

    let samples: Vec<DecaySample> = gauges
        .iter()
        .zip(&estimates)
        .map(|(&g, e)| DecaySample { gauge: g as u64 + 1, successes: e.successes, trials: e.trials })
        .collect();
    let rel_dim = match cfg.relation {
        Relation::C => 2 * cfg.n,
        _ => 2,
    };
    let expected = expected_slope(d, rel_dim);
    let mut fits = Table::new("fit", &["source", "slope", "intercept", "slopeCiLow", "slopeCiHigh", "pointsUsed", "expected"]);
    let fit = fit_decay_exponent(&samples);
    match &fit {
        Ok(f) => {
            fits.push(vec![json!("simulation"), json!(f.slope), json!(f.intercept), json!(f.slope_ci.0), json!(f.slope_ci.1), json!(f.points_used.len()), json!(expected)]);
            rep.notes.extend(f.notes.iter().cloned());
            fit_verdict(rep, "slope-simulation", f, expected, cfg.tolerance);
        }
        Err(e) => rep.inconclusive("slope-simulation", format!("no fit: {e}")),
    }
    if exact.iter().all(Option::is_some) {
        let pts: Vec<(f64, f64, f64)> = gauges.iter().zip(&exact).map(|(&g, e)| (((g + 1) as f64).ln(), e.unwrap().ln(), 1.0)).collect();
        let f = weighted_fit(pts, Vec::new());
        fits.push(vec![json!("exact"), json!(f.slope), json!(f.intercept), Value::Null, Value::Null, json!(gauges.len()), json!(expected)]);
        let ok = (f.slope - expected).abs() <= cfg.exact_tolerance;
        rep.verdict("slope-exact", ok, format!("slope {:.4}, expected {expected} ± {}", f.slope, cfg.exact_tolerance));
    }
    rep.tables.push(fits);
    truncation(rep, "decay probabilities", cfg.escape_radius, None, "visits after a walk leaves the escape ball are not seen, so estimates are biased low");
    if matches!(cfg.relation, Relation::Hit | Relation::L | Relation::M) {
        rep.notes.push("orbit points of one replica are pooled as separate trials; the interval ignores their dependence".into());
    }
    if cfg.plots {
        let gx: Vec<f64> = gauges.iter().map(|&g| (g + 1) as f64).collect();
        let mut p = Plot::new("decay", "Decay with distance", "gauge", "probability")
            .log_log()
            .with("simulation", gx.iter().copied().zip(estimates.iter().map(|e| e.p)).collect(), false);
        if let Some(e) = exact.iter().copied().collect::<Option<Vec<f64>>>() {
            p = p.with("exact", gx.iter().copied().zip(e).collect(), true);
        }
        rep.plots.push(p);
    }
    Ok(())
}

pub(super) fn generations(cfg: &ExperimentConfig, rep: &mut ExperimentReport, out: Option<&Path>) -> Result<()> {
    let o = oracle(cfg)?;
    let u = cfg.u_high - cfg.u_low;
    let opts = |r: u64| GenerationOptions {
        u,
        max_k: cfg.depth,
        escape_radius: cfg.escape_radius,
        seed: replica_seed(cfg, r),
        clip: (cfg.clip > 0).then_some(cfg.clip),
        large_sets: LargeSets::Fail,
    };
    let stacks = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| grow_generations(&o, cfg.d, &opts(r)))
        .collect::<Result<Vec<_>>>()?;
    for (r, st) in stacks.iter().enumerate().take(cfg.persist as usize) {
        if let Some(dir) = out {
            let file = format!("soup-gen-{r:04}.jsonl");
            let mut buf = Vec::new();
            for (k, g) in st.generations.iter().enumerate() {
                crate::soup::write_jsonl(g, Some(k), &mut buf)?;
            }
            std::fs::write(dir.join(&file), buf)?;
            rep.artifacts.push(file);
        }
    }
    let mut t = Table::new("generations", &["replica", "k", "count", "capHitSet", "capAvoidSet", "mean", "vSetSize"]);
    let cap0 = 1.0 / o.green(&Point::origin(cfg.d)?)?;
    let mut sums = vec![(0.0f64, 0.0f64, 0u64); cfg.depth + 1];
    let mut incomplete = 0;
    let mut gen0 = Vec::new();
    for (r, st) in stacks.iter().enumerate() {
        if !st.is_complete() {
            incomplete += 1;
            continue;
        }
        gen0.push(st.generations[0].len() as u64);
        for k in 0..st.generations.len() {
            let hit = st.caps[k];
            let avoid = if k == 0 { Some(0.0) } else { st.caps[k - 1] };
            let mean = hit.zip(avoid).map(|(h, a)| u * (h - a));
            if let Some(m) = mean {
                sums[k].0 += st.generations[k].len() as f64 - m;
                sums[k].1 += m;
                sums[k].2 += 1;
            }
            t.push(vec![json!(r), json!(k), json!(st.generations[k].len()), json!(hit), json!(if k == 0 { None } else { avoid }), json!(mean), json!(st.v_sets[k].len())]);
        }
    }
    rep.tables.push(t);
    let mut z = Table::new("conditional-counts", &["k", "stacks", "sumObservedMinusMean", "sumMean", "z"]);
    for (k, &(dev, mean, n)) in sums.iter().enumerate() {
        if n == 0 || mean <= 0.0 {
            continue;
        }
        let zk = dev / mean.sqrt();
        z.push(vec![json!(k), json!(n), json!(dev), json!(mean), json!(zk)]);
        rep.verdict(&format!("conditional-count-{k}"), zk.abs() <= 3.0, format!("z = {zk:.3} over {n} stacks"));
    }
    rep.tables.push(z);
    if gen0.len() >= 20 {
        let gof = poisson_gof(&gen0, u * cap0)?;
        rep.verdict("generation-0-poisson", gof.passes(), format!("Poisson({:.4}) goodness of fit p = {:.4}", u * cap0, gof.p_value));
    }
    if incomplete > 0 {
        rep.complete = false;
        rep.notes.push(format!("{incomplete} stacks stopped at the {MAX_SET_SIZE}-point equilibrium limit"));
    }
    let bound = return_bound(&o, 1.0 / o.green(&Point::origin(cfg.d)?)?, 0, cfg.escape_radius)?;
    truncation(rep, "hit and avoid tests", cfg.escape_radius, Some(bound), "per-point return bound; sets are tested on recorded traces only");

    if cfg.m >= 1 && !cfg.gauges.is_empty() && cfg.replicas >= 100 {
        let mut rt = Table { name: "reach".into(), columns: with_estimate(&["gauge", "x", "m", "escapeRadius"]), rows: Vec::new() };
        let mut samples = Vec::new();
        let mut ps = Vec::new();
        for (i, &g) in cfg.gauges.iter().enumerate() {
            let x = balanced_tuple(cfg.d, g)?;
            let escape = cfg.escape_radius.max(4 * g);
            let e = reach_probability(&o, cfg.m, &x, u, cfg.replicas, child_seed(cfg.seed, Domain::Generation, 1000 + i as u64), escape)?;
            let mut row = vec![json!(g + 1), json!(point_text(&x)), json!(cfg.m), json!(escape)];
            row.extend(estimate_cells(&e));
            rt.push(row);
            samples.push(DecaySample { gauge: g as u64 + 1, successes: e.successes, trials: e.trials });
            ps.push(e.p);
        }
        rep.tables.push(rt);
        let decreasing = ps.windows(2).all(|w| w[1] < w[0]);
        rep.verdict("reach-decreasing", decreasing, format!("estimates {ps:?}"));
        let expected = expected_slope(cfg.d, 2 * cfg.m);
        match fit_decay_exponent(&samples) {
            Ok(f) => fit_verdict(rep, "reach-slope", &f, expected, cfg.tolerance),
            Err(e) => rep.inconclusive("reach-slope", format!("no fit: {e}")),
        }
    }
    Ok(())
}

pub(super) fn poisson_checks(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    let mus = [10.0, 100.0, 1000.0, 10000.0];
    let mut t = Table::new("shift-distance", &["mu0", "s", "mu", "distance", "errorBound"]);
    let mut monotone = true;
    let mut worst_last: f64 = 0.0;
    for mu0 in [0.5, 1.0, 2.0, 5.0, 10.0] {
        for s in [0u64, 1, 2, 5] {
            let vals: Vec<f64> = mus
                .iter()
                .filter(|&&mu| mu > mu0)
                .map(|&mu| {
                    let r = poisson_shift_distance(PoissonPair::new(mu, mu0, s)?);
                    t.push(vec![json!(mu0), json!(s), json!(mu), json!(r.value), json!(r.error_bound)]);
                    Ok(r.value)
                })
                .collect::<Result<_>>()?;
            monotone &= vals.windows(2).all(|w| w[1] < w[0]);
            worst_last = worst_last.max(*vals.last().unwrap());
        }
    }
    rep.tables.push(t);
    rep.verdict("shift-distance-monotone", monotone, "strictly decreasing in mu for every (mu0, s)");
    rep.verdict("shift-distance-small", worst_last < 0.05, format!("largest value at mu = 10^4: {worst_last:.4}"));

    if (cfg.replicas as usize) < MIN_REPLICAS {
        rep.inconclusive("nested-counts", format!("needs at least {MIN_REPLICAS} replicas"));
        return Ok(());
    }
    let o = oracle(cfg)?;
    let origin = Point::origin(cfg.d)?;
    let cap_k = 1.0 / o.green(&origin)?;
    let u = cfg.u_high - cfg.u_low;
    let mut rows = Table::new("nested", &["rho", "escapeRadius", "s", "events", "tv", "kolmogorov", "shiftTv", "shiftTestP"]);
    let mut ind = Table::new("nested-independence", &["rho", "statistic", "df", "p", "differenceGofP"]);
    let mut ks0 = Vec::new();
    let mut rhos = cfg.rhos.clone();
    rhos.sort_unstable();
    for &rho in &rhos {
        let base = Base::ball(cfg.d, rho)?;
        let sampler = SoupSampler::prepare(&o, &base)?;
        let escape = cfg.escape_radius.max(2 * rho);
        let pts = base.to_points();
        let k = [origin];
        let pairs: Vec<(u64, u64)> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| Ok(nested_counts(&sampler.sample(cfg.u_low, cfg.u_high, escape, replica_seed(cfg, r))?, &k, &pts)))
            .collect::<Result<_>>()?;
        let report = nested_count_check(&pairs, 2)?;
        rep.notes.extend(report.notes.iter().map(|n| format!("rho = {rho}: {n}")));
        let gof = match sampler.capacity() {
            Some(c) => {
                let diff: Vec<u64> = pairs.iter().map(|p| p.1 - p.0).collect();
                let g = poisson_gof(&diff, u * (c - cap_k))?;
                rep.verdict(&format!("difference-poisson-{rho}"), g.passes(), format!("eta_B − eta_K against Poisson({:.3}): p = {:.4}", u * (c - cap_k), g.p_value));
                Some(g.p_value)
            }
            None => None,
        };
        ind.push(vec![json!(rho), json!(report.independence.statistic), json!(report.independence.df), json!(report.independence.p_value), json!(gof)]);
        rep.verdict(&format!("independence-{rho}"), report.independence.passes(), format!("contingency p = {:.4}", report.independence.p_value));
        for row in &report.rows {
            rows.push(vec![json!(rho), json!(escape), json!(row.s), json!(row.events), json!(row.tv), json!(row.kolmogorov), json!(row.shift_tv), json!(row.shift_test.p_value)]);
            rep.verdict(&format!("shift-identity-{rho}-{}", row.s), row.shift_test.passes(), format!("two-sample p = {:.4}", row.shift_test.p_value));
        }
        ks0.push(report.rows.iter().find(|r| r.s == 0).map_or(f64::NAN, |r| r.kolmogorov));
    }
    rep.tables.push(rows);
    rep.tables.push(ind);
    let decreasing = ks0.windows(2).all(|w| w[1] < w[0]);
    rep.verdict("conditional-distance-decreasing", decreasing, format!("Kolmogorov distance at s = 0 over rho {rhos:?}: {ks0:?}"));
    truncation(rep, "hitting counts", cfg.escape_radius, None, "escape radius max(escapeRadius, 2 rho) per ball");
    Ok(())
}

pub(super) fn density(cfg: &ExperimentConfig, rep: &mut ExperimentReport) -> Result<()> {
    if cfg.replicas < 2 {
        return Err(Error::Config { field: "replicas".into(), reason: "density needs at least two replicas".into() });
    }
    let o = oracle(cfg)?;
    let origin = Point::origin(cfg.d)?;
    let cap0 = equilibrium(&o, &[origin])?.capacity();
    let u = cfg.u_high - cfg.u_low;
    let base = Base::ball(cfg.d, cfg.base_radius)?;
    let sampler = SoupSampler::prepare(&o, &base)?;
    let ray: Vec<Point> = (0..=cfg.window_radius as i32).map(|n| Point::axis(cfg.d, 0, n)).collect::<Result<_>>()?;
    let window = Ball::centered(cfg.d, cfg.window_radius)?.points();
    let rows: Vec<(Vec<bool>, Vec<bool>)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let soup = sampler.sample(cfg.u_low, cfg.u_high, cfg.escape_radius, replica_seed(cfg, r))?;
            Ok((occupation(&soup, &ray), occupation(&soup, &window)))
        })
        .collect::<Result<_>>()?;
    let (ray_rows, win_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let ray_rep = line_density(&ray_rows, u, cap0)?;
    let win_rep = line_density(&win_rows, u, cap0)?;
    let win_cap = if window.len() <= MAX_SET_SIZE { equilibrium(&o, &window)?.capacity() } else { f64::NAN };
    let bound = return_bound(&o, win_cap, cfg.window_radius, cfg.escape_radius)?;
    let mut t = Table::new("density", &["points", "count", "replicas", "terminal", "standardError", "target", "z", "ciLow", "ciHigh", "ciMethod"]);
    for (name, n, r) in [("ray", ray.len(), &ray_rep), ("window", window.len(), &win_rep)] {
        t.push(vec![
            json!(name),
            json!(n),
            json!(r.replicas),
            json!(r.terminal),
            json!(r.standard_error),
            json!(r.target),
            json!(r.z),
            json!(r.terminal - 1.96 * r.standard_error),
            json!(r.terminal + 1.96 * r.standard_error),
            json!("replica-normal-95"),
        ]);
        let ok = (r.terminal - r.target).abs() <= 3.0 * r.standard_error + bound;
        rep.verdict(&format!("density-{name}"), ok, format!("z = {:.3} (3 sd plus truncation bound {bound:.2e})", r.z));
    }
    rep.tables.push(t);
    let mut run = Table::new("running", &["n", "x", "runningAverage"]);
    for (i, v) in ray_rep.running.iter().enumerate() {
        run.push(vec![json!(i + 1), json!(point_text(&ray[i])), json!(v)]);
    }
    rep.tables.push(run);
    truncation(rep, "occupation", cfg.escape_radius, Some(bound), "revisits to the window after leaving the escape ball are missed");
    if cfg.plots {
        rep.plots.push(
            Plot::new("density", "Running occupation average along the ray", "n", "average")
                .with("running", ray_rep.running.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect(), true)
                .with("1 − exp(−u cap{0})", vec![(1.0, ray_rep.target), (ray.len() as f64, ray_rep.target)], true),
        );
    }
    Ok(())
}
