//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything (about half an hour
//! on one core). Criterion numbers given as arguments restrict the run, e.g.
//! `-- 1 5 7`. The exit status is nonzero on a FAIL only when
//! `LQG_ACCEPTANCE_STRICT=1`; otherwise the lines are the verdict.
//! Sample files and the equivalence report are kept under the cargo target tmpdir.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use lqg::constructions::{location_table, three_point_s, ConstructionTag, LocationInput};
use lqg::geometry::{pt, GammaParams, Point, I};
use lqg::gff::{cached_sampler, circle_average_weights, Grid, GridField};
use lqg::gmc::{boundary_gmc, bulk_gmc};
use lqg::green::{green_disk, green_disk_dirichlet, green_halfdisk, green_halfplane, BoundaryCondition};
use lqg::harness::{
    anderson_darling_normal, run_equivalence, run_replicas, ComparisonReport, ExperimentConfig, SampleRecord,
    SamplerSpec, Verdict, WeightedSample,
};
use lqg::rng;
use rand::Rng;
use statrs::function::gamma::gamma as gamma_fn;

type Outcome = Result<(bool, String), String>;

const GRID: usize = 129;
const SAMPLES: usize = 2000;

fn out_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

// ---------------------------------------------------------------- kernels

fn kernels() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut fd: f64 = 0.0;
    worst = worst.max((green_disk(pt(0.0, 0.0), pt(0.5, 0.0)).map_err(e)? - 2f64.ln()).abs());
    worst = worst.max((green_halfplane(I, 2.0 * I).map_err(e)? + 3f64.ln()).abs());
    let mut g = rng::stream(1, &[0xacc, 1]);
    let disk = |g: &mut rand_chacha::ChaCha8Rng| {
        Point::from_polar(0.98 * g.random::<f64>().sqrt(), 2.0 * PI * g.random::<f64>())
    };
    for _ in 0..100 {
        let (x, y) = (disk(&mut g), disk(&mut g));
        let hx = pt(6.0 * g.random::<f64>() - 3.0, 3.0 * g.random::<f64>() + 1e-3);
        let hy = pt(6.0 * g.random::<f64>() - 3.0, 3.0 * g.random::<f64>() + 1e-3);
        let (bx, by) = (0.6 * x, 0.6 * y);
        let (bx, by) = (pt(bx.re, bx.im.abs()), pt(by.re, by.im.abs()));
        let sym = [
            green_disk(x, y).map_err(e)? - green_disk(y, x).map_err(e)?,
            green_disk_dirichlet(x, y).map_err(e)? - green_disk_dirichlet(y, x).map_err(e)?,
            green_halfplane(hx, hy).map_err(e)? - green_halfplane(hy, hx).map_err(e)?,
            green_halfdisk(bx, by, 0.25).map_err(e)? - green_halfdisk(by, bx, 0.25).map_err(e)?,
        ];
        // zero values on the circle and on the arc of radius 2
        let c = Point::from_polar(1.0, 2.0 * PI * g.random::<f64>());
        let arc = Point::from_polar(2.0, PI * g.random::<f64>());
        // free boundaries: invariance under reflection in the real line
        let refl = [
            green_halfplane(hx, hy).map_err(e)? - green_halfplane(hx.conj(), hy).map_err(e)?,
            green_halfdisk(bx, by, 0.25).map_err(e)? - green_halfdisk(bx.conj(), by, 0.25).map_err(e)?,
        ];
        let zero = [
            green_disk_dirichlet(x, c).map_err(e)?,
            green_halfdisk(bx, arc, 0.25).map_err(e)?,
        ];
        for v in sym.iter().chain(&refl).chain(&zero) {
            worst = worst.max(v.abs());
        }
        // the free disk kernel has constant outward normal derivative -1 on the circle
        let step = 1e-5;
        let d =
            (green_disk(c * (1.0 + step), x).map_err(e)? - green_disk(c * (1.0 - step), x).map_err(e)?) / (2.0 * step);
        fd = fd.max((d + 1.0).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-12 && fd <= 1e-6 && secs < 1.0,
        format!("max error {worst:.2e}, normal derivative error {fd:.2e}, {secs:.3} s"),
    ))
}

// ---------------------------------------------------------------- fields

fn disk_dirichlet_grid() -> Result<Arc<Grid>, String> {
    Grid::disk(GRID, false).map(Arc::new).map_err(e)
}

fn half_disk_grid() -> Result<Arc<Grid>, String> {
    Grid::half_disk(1.0, GRID).map(Arc::new).map_err(e)
}

/// Streams `n` fields through `visit` in batches.
fn for_fields(
    grid: &Arc<Grid>,
    bc: BoundaryCondition,
    seed: u64,
    n: usize,
    mut visit: impl FnMut(&GridField),
) -> Result<(), String> {
    let s = cached_sampler(grid.clone(), bc, None, None, "").map_err(e)?;
    let mut r = 0u64;
    while r < n as u64 {
        let hi = (r + 256).min(n as u64);
        for f in s.sample_batch(seed, r..hi) {
            visit(&f);
        }
        r = hi;
    }
    Ok(())
}

fn covariance_check(
    grid: &Arc<Grid>,
    bc: BoundaryCondition,
    targets: &[(Point, Point)],
    oracle: impl Fn(Point, Point) -> lqg::error::Result<f64>,
) -> Result<(usize, f64), String> {
    let pairs: Vec<(usize, usize)> = targets
        .iter()
        .map(|(a, b)| match (grid.locate(*a), grid.locate(*b)) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(format!("{a} or {b} is off the grid")),
        })
        .collect::<Result<_, _>>()?;
    let mut prod = vec![(0.0, 0.0); pairs.len()];
    let mut n = 0.0;
    for_fields(grid, bc, 0xc0f, SAMPLES, |f| {
        n += 1.0;
        for (k, &(x, y)) in pairs.iter().enumerate() {
            let p = f.values[x] * f.values[y];
            prod[k].0 += p;
            prod[k].1 += p * p;
        }
    })?;
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for (k, &(x, y)) in pairs.iter().enumerate() {
        let mean = prod[k].0 / n;
        let se = ((prod[k].1 / n - mean * mean) / (n - 1.0)).sqrt();
        let z = (mean - oracle(grid.nodes[x], grid.nodes[y]).map_err(e)?) / se;
        worst = worst.max(z.abs());
        if z.abs() > 3.0 {
            bad += 1;
        }
    }
    Ok((bad, worst))
}

fn gff_covariance() -> Outcome {
    let t = Instant::now();
    let disk_pairs: Vec<(Point, Point)> = (0..10)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / 10.0;
            (
                Point::from_polar(0.1 + 0.08 * k as f64, a),
                Point::from_polar(0.5, a + 0.3 + 0.2 * k as f64),
            )
        })
        .collect();
    let (bad_d, z_d) = covariance_check(
        &disk_dirichlet_grid()?,
        BoundaryCondition::Dirichlet,
        &disk_pairs,
        green_disk_dirichlet,
    )?;
    let half_pairs: Vec<(Point, Point)> = (0..10)
        .map(|k| {
            let x = -0.8 + 0.16 * k as f64;
            // every other pair has a point on the free diameter
            let y = if k % 2 == 0 { 0.0 } else { 0.3 };
            (pt(x, y), pt(0.5 - 0.1 * k as f64, 0.2 + 0.05 * k as f64))
        })
        .collect();
    let (bad_h, z_h) = covariance_check(&half_disk_grid()?, BoundaryCondition::Mixed, &half_pairs, |x, y| {
        green_halfdisk(x, y, 1.0)
    })?;
    let secs = t.elapsed().as_secs_f64();
    Ok((
        bad_d == 0 && bad_h == 0 && secs < 300.0,
        format!(
            "pairs beyond 3 SE: disk {bad_d}/10 (max |z| {z_d:.2}), half-disk {bad_h}/10 (max |z| {z_h:.2}); {secs:.0} s"
        ),
    ))
}

fn circle_average_variance() -> Outcome {
    let grid = half_disk_grid()?;
    let n = 5000;
    let mut msg = Vec::new();
    let mut ok = true;
    let exact = cached_sampler(grid.clone(), BoundaryCondition::Mixed, None, None, "").map_err(e)?;
    for r in [0.5, 0.1] {
        let w = circle_average_weights(&grid, pt(0.0, 0.0), r).map_err(e)?;
        let discrete = exact.factor.variance_of(&w);
        let mut xs = Vec::with_capacity(n);
        for_fields(&grid, BoundaryCondition::Mixed, 0xc1c, n, |f| {
            xs.push(w.iter().map(|&(k, c)| c * f.values[k]).sum::<f64>());
        })?;
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let target = 2.0 * (1.0 / r).ln();
        let rel = v / target - 1.0;
        ok &= rel.abs() <= 0.05;
        msg.push(format!(
            "r={r}: variance {v:.4} vs {target:.4} ({:+.2}%, grid value {discrete:.4})",
            100.0 * rel
        ));
    }
    Ok((ok, msg.join("; ")))
}

fn gmc_expected_mass() -> Outcome {
    let gammas = [0.5, 1.0, 1.5];
    let params: Vec<GammaParams> = gammas
        .iter()
        .map(|g| GammaParams::new(*g))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let mut bulk = vec![Vec::with_capacity(SAMPLES); 3];
    let mut bdry = vec![Vec::with_capacity(SAMPLES); 3];
    let mut err = None;
    for_fields(
        &disk_dirichlet_grid()?,
        BoundaryCondition::Dirichlet,
        0x6c1,
        SAMPLES,
        |f| {
            for (k, p) in params.iter().enumerate() {
                match bulk_gmc(f, p) {
                    Ok(c) => bulk[k].push(c.iter().map(|c| c.mass).sum::<f64>()),
                    Err(x) => err = Some(e(x)),
                }
            }
        },
    )?;
    for_fields(&half_disk_grid()?, BoundaryCondition::Mixed, 0x6c2, SAMPLES, |f| {
        for (k, p) in params.iter().enumerate() {
            match boundary_gmc(f, p) {
                Ok(c) => bdry[k].push(c.iter().map(|c| c.mass).sum::<f64>()),
                Err(x) => err = Some(e(x)),
            }
        }
    })?;
    if let Some(x) = err {
        return Err(x);
    }
    let stat = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (
            m,
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt(),
        )
    };
    let mut ok = true;
    let mut msg = Vec::new();
    for (k, g) in gammas.iter().enumerate() {
        // E mu(D) = int_D (1 - |z|^2)^{g^2/2} dz, E nu(L) = int_{-1}^{1} (1 - x^2)^{g^2/4} dx
        let a = g * g / 2.0;
        let want_bulk = PI / (1.0 + a);
        let b = g * g / 4.0;
        let want_bdry = PI.sqrt() * gamma_fn(b + 1.0) / gamma_fn(b + 1.5);
        let (mb, sb) = stat(&bulk[k]);
        let (md, sd) = stat(&bdry[k]);
        let (zb, zd) = ((mb - want_bulk) / sb, (md - want_bdry) / sd);
        ok &= zb.abs() <= 3.0 && zd.abs() <= 3.0;
        msg.push(format!("gamma {g}: bulk z {zb:+.2}, boundary z {zd:+.2}"));
    }
    Ok((ok, msg.join("; ")))
}

fn shift_identities() -> Outcome {
    let grid = half_disk_grid()?;
    let mut g = rng::stream(5, &[0xacc, 5]);
    let mut worst: f64 = 0.0;
    let mut fields = Vec::new();
    for_fields(&grid, BoundaryCondition::Mixed, 0x5f1, 8, |f| fields.push(f.clone()))?;
    for f in &fields {
        let c = 10.0 * g.random::<f64>() - 5.0;
        let p = GammaParams::new(0.1 + 1.85 * g.random::<f64>()).map_err(e)?;
        let shifted = f.shifted(c);
        let rel = |a: f64, b: f64, k: f64| (b / (a * k) - 1.0).abs();
        for (x, y) in bulk_gmc(f, &p)
            .map_err(e)?
            .iter()
            .zip(&bulk_gmc(&shifted, &p).map_err(e)?)
        {
            worst = worst.max(rel(x.mass, y.mass, (p.gamma * c).exp()));
        }
        for (x, y) in boundary_gmc(f, &p)
            .map_err(e)?
            .iter()
            .zip(&boundary_gmc(&shifted, &p).map_err(e)?)
        {
            worst = worst.max(rel(x.mass, y.mass, (0.5 * p.gamma * c).exp()));
        }
    }
    Ok((
        worst <= 1e-12,
        format!("max relative error per cell {worst:.2e} over 8 fields"),
    ))
}

// ---------------------------------------------------------------- radial law

fn bessel_radial_law() -> Outcome {
    let gamma = 1.2;
    let p = GammaParams::new(gamma).map_err(e)?;
    let (window, dt) = (20.0, 1e-3);
    let mut rates = Vec::new();
    let mut slopes = Vec::new();
    for seed in 0..200u64 {
        let path = lqg::bessel::sample_radial_excursion(&p, window, dt, seed).map_err(e)?;
        let v = &path.values;
        let qv: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        rates.push(qv / (2.0 * window));
        // slope away from the maximum over the outer half of each side
        let n = v.len();
        let mid = n / 2;
        let quarter = mid / 2;
        let half_t = window / 2.0;
        slopes.push((v[n - 1] - v[mid + quarter]) / half_t);
        slopes.push((v[0] - v[mid - quarter]) / half_t);
    }
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let se =
        (slopes.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64 / slopes.len() as f64).sqrt();
    let z = (m + p.drift()) / se;
    Ok((
        lo >= 1.9 && hi <= 2.1 && z.abs() <= 3.0,
        format!(
            "quadratic variation per unit time in [{lo:.4}, {hi:.4}]; drift {m:.4} vs {:.4} (z {z:+.2})",
            -p.drift()
        ),
    ))
}

// ---------------------------------------------------------------- shared samplers

fn battery() -> Result<(ExperimentConfig, ComparisonReport, Vec<SampleRecord>), String> {
    let config = ExperimentConfig {
        grid: vec![GRID],
        eps: vec![1e-3],
        delta: vec![0.5, 0.3, 0.1],
        n: SAMPLES,
        seed: 1,
        alpha: 0.01,
        output: out_dir().join("equivalence"),
        ..ExperimentConfig::default()
    };
    let t = Instant::now();
    let report = run_equivalence(&config).map_err(e)?;
    let records = lqg::harness::read_samples(&config.output.join("samples.tsv")).map_err(e)?;
    println!(
        "     (battery: {} records in {:.0} s, report in {})",
        records.len(),
        t.elapsed().as_secs_f64(),
        config.output.display()
    );
    Ok((config, report, records))
}

fn rooted_level(records: &[SampleRecord]) -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    for gamma in [1.0, 2f64.sqrt(), 1.8] {
        let s = three_point_s(&GammaParams::new(gamma).map_err(e)?);
        let set: Vec<&SampleRecord> = records
            .iter()
            .filter(|r| r.tag == ConstructionTag::SharedWeighted && r.gamma == gamma && r.delta == Some(0.1))
            .collect();
        if set.is_empty() {
            return Err(format!("no shared weighted records at gamma {gamma}"));
        }
        let mut z = Vec::new();
        for r in &set {
            match (r.a_eps, r.log_d) {
                (Some(a), Some(ld)) if ld > 0.0 => z.push((a - s * ld) / ld.sqrt()),
                _ => return Err(format!("replica {} lacks A_eps or log_d", r.replica)),
            }
        }
        let x = WeightedSample::from_log_weights(z, &set.iter().map(|r| r.log_weight).collect::<Vec<_>>());
        let (m, se, v) = (x.mean(), x.mean_se(), x.variance());
        let ad = anderson_darling_normal(&x, 0.01).map_err(e)?;
        let pass = (m / se).abs() <= 3.0 && (v - 1.0).abs() <= 0.1 && !ad.reject;
        ok &= pass;
        msg.push(format!(
            "gamma {gamma:.3}: mean {m:+.3} (se {se:.3}), variance ratio {v:.3}, AD {:.3}/{:.3}",
            ad.statistic, ad.critical
        ));
    }
    Ok((ok, msg.join("; ")))
}

fn tv_bound(report: &ComparisonReport) -> Outcome {
    let sec = report
        .sections
        .iter()
        .find(|s| s.gamma == 1.0)
        .ok_or("no gamma = 1 section")?;
    let rows = &sec.tv;
    let within = rows.iter().all(|r| r.within_bound);
    let decreasing = rows.windows(2).all(|w| w[0].delta > w[1].delta && w[0].tv > w[1].tv);
    let cells: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "delta {}: tv {:.4} (se {:.4}) bound {:.4}",
                r.delta, r.tv, r.se, r.bound
            )
        })
        .collect();
    Ok((
        within && decreasing && rows.len() == 3,
        format!("{}; within bound {within}, decreasing {decreasing}", cells.join(", ")),
    ))
}

fn equivalence(report: &ComparisonReport) -> Outcome {
    let c = &report.calibration;
    let mut msg = vec![format!(
        "calibration {}/{} at alpha {} ({})",
        c.rejections,
        c.repetitions,
        c.alpha,
        if c.pass { "ok" } else { "failed" }
    )];
    let mut ok = c.pass;
    for sec in &report.sections {
        for p in &sec.comparisons {
            let rejected: Vec<&str> = p
                .tests
                .iter()
                .filter(|(_, t)| t.reject)
                .map(|(n, _)| n.as_str())
                .collect();
            let short = |s: &str| s.split(' ').next().unwrap_or("").to_string();
            let v = match &p.verdict {
                Verdict::Pass => "pass".to_string(),
                Verdict::Fail => format!("fail [{}]", rejected.join(",")),
                Verdict::Withheld(w) => format!("withheld ({w})"),
            };
            ok &= p.verdict == Verdict::Pass;
            msg.push(format!("gamma {:.3} {}~{}: {v}", sec.gamma, short(&p.a), short(&p.b)));
        }
    }
    Ok((ok, msg.join("; ")))
}

fn location_trends() -> Outcome {
    let gamma = 2f64.sqrt();
    let mut rows = Vec::new();
    for eps in [1e-1, 1e-2, 1e-3] {
        let spec = SamplerSpec {
            tag: ConstructionTag::SharedWeighted,
            gamma,
            grid: GRID,
            eps: Some(eps),
            delta: Some(0.3),
        };
        let recs = run_replicas(&spec, SAMPLES, 10).map_err(e)?;
        lqg::harness::write_samples(&out_dir().join(format!("location_{eps:e}.tsv")), &recs).map_err(e)?;
        for r in recs {
            rows.push(LocationInput {
                eps,
                gamma,
                log_weight: r.log_weight,
                t_root: r.t_root.ok_or("record lacks t_root")?,
                a_band: r.a_band.ok_or("record lacks A_band")?,
            });
        }
    }
    let t = location_table(&rows).map_err(e)?;
    let cells: Vec<String> = t
        .rows
        .iter()
        .map(|r| {
            format!(
                "eps {:.0e}: H {:.3}±{:.3}, median {:.3}±{:.3}",
                r.eps, r.h_freq, r.h_se, r.ratio_quartiles[1], r.median_se
            )
        })
        .collect();
    Ok((
        t.h_increasing == Some(true) && t.median_decreasing == Some(true),
        format!(
            "{}; H increasing {:?}, median decreasing {:?}",
            cells.join(", "),
            t.h_increasing,
            t.median_decreasing
        ),
    ))
}

// ---------------------------------------------------------------- driver

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |k: usize| wanted.is_empty() || wanted.contains(&k);
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |k: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if !on(k) {
            return;
        }
        let t = Instant::now();
        let o = f();
        let line = match &o {
            Ok((true, m)) => format!("PASS {k:>2} {name}: {m}"),
            Ok((false, m)) => format!("FAIL {k:>2} {name}: {m}"),
            Err(m) => format!("FAIL {k:>2} {name}: error: {m}"),
        };
        println!("{line}  [{:.1} s]", t.elapsed().as_secs_f64());
        results.push((k, name, o));
    };
    run(1, "kernel exactness", &mut kernels);
    run(2, "field covariance", &mut gff_covariance);
    run(3, "semicircle average variance", &mut circle_average_variance);
    run(4, "expected measure mass", &mut gmc_expected_mass);
    run(5, "shift identities", &mut shift_identities);
    run(7, "radial part law", &mut bessel_radial_law);
    if on(6) || on(8) || on(9) {
        match battery() {
            Ok((_, report, records)) => {
                run(6, "rooted level statistics", &mut || rooted_level(&records));
                run(8, "weighted vs unweighted TV", &mut || tv_bound(&report));
                run(9, "equivalence battery", &mut || equivalence(&report));
            }
            Err(m) => {
                for (k, name) in [
                    (6, "rooted level statistics"),
                    (8, "weighted vs unweighted TV"),
                    (9, "equivalence battery"),
                ] {
                    run(k, name, &mut || Err(m.clone()));
                }
            }
        }
    }
    run(10, "location trends", &mut location_trends);
    let failed: Vec<usize> = results
        .iter()
        .filter(|(_, _, o)| !matches!(o, Ok((true, _))))
        .map(|(k, _, _)| *k)
        .collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing {failed:?}")
        }
    );
    let strict = std::env::var("LQG_ACCEPTANCE_STRICT")
        .map(|v| v == "1")
        .unwrap_or(false);
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
