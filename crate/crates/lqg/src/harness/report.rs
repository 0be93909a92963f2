//! Running samplers over replicas and turning sample records into reports.

use std::fmt::Write as _;
use std::fs;

use rand::Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::records::{write_samples, SampleRecord};
use super::stats::{
    bootstrap_se, calibrate, moment_table, reweighting_tv, two_sample_test, Calibration, KsTest, WeightedSample,
};
use super::OBSERVABLES;
use crate::bessel::UnitBoundaryOptions;
use crate::constructions::{
    location_table, sample_dms_direct, sample_hrv_direct, sample_hrv_unit_area, sample_shared_limiting, three_point_s,
    ConstructionTag, DiskSample, LimitingConfig, LocationInput, LocationTable, StripResolution, DEFAULT_POINTS,
};
use crate::error::{LqgError, Result};
use crate::geometry::GammaParams;
use crate::gmc::MomentEstimate;
use crate::rng;

/// Resamples behind the standard error of the TV estimate.
const TV_RESAMPLES: usize = 200;
const TV_BINS: usize = 10;
const CALIBRATION_REPS: usize = 100;
const CALIBRATION_N: usize = 1000;

/// One sampler at one setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerSpec {
    pub tag: ConstructionTag,
    pub gamma: f64,
    pub grid: usize,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
}

impl SamplerSpec {
    fn key(&self) -> u64 {
        let mut g = rng::stream(
            self.gamma.to_bits(),
            &[
                self.tag as u64,
                self.grid as u64,
                self.eps.map(f64::to_bits).unwrap_or(0),
                self.delta.map(f64::to_bits).unwrap_or(0),
            ],
        );
        g.random()
    }

    /// Seed of replica `replica` under master seed `master`.
    pub fn replica_seed(&self, master: u64, replica: u64) -> u64 {
        rng::stream(master, &[rng::MOD_HARNESS, self.key(), replica]).random()
    }

    pub fn draw(&self, seed: u64) -> Result<DiskSample> {
        let params = GammaParams::new(self.gamma)?;
        let res = StripResolution::new(self.grid);
        let limiting = || match (self.eps, self.delta) {
            (Some(e), Some(d)) => LimitingConfig::new(e, d),
            _ => Err(LqgError::Config(format!("{} needs eps and delta", self.tag))),
        };
        match self.tag {
            ConstructionTag::Hrv => sample_hrv_direct(&params, &DEFAULT_POINTS, &res, seed),
            ConstructionTag::HrvUnitArea => sample_hrv_unit_area(&params, &DEFAULT_POINTS, &res, seed),
            ConstructionTag::Dms => {
                sample_dms_direct(&params, &DEFAULT_POINTS, &res, &UnitBoundaryOptions::default(), seed)
            }
            ConstructionTag::SharedWeighted => sample_shared_limiting(&params, &limiting()?, true, &res, seed),
            ConstructionTag::SharedUnweighted => sample_shared_limiting(&params, &limiting()?, false, &res, seed),
        }
    }

    pub fn label(&self) -> String {
        match (self.eps, self.delta) {
            (Some(e), Some(d)) => format!("{} (eps {e:e}, delta {d})", self.tag),
            _ => self.tag.to_string(),
        }
    }

    fn matches(&self, r: &SampleRecord) -> bool {
        let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.abs().max(y.abs()),
            (None, None) => true,
            // direct samplers carry no eps or delta
            _ => !matches!(
                self.tag,
                ConstructionTag::SharedWeighted | ConstructionTag::SharedUnweighted
            ),
        };
        r.tag == self.tag
            && r.gamma == self.gamma
            && r.grid == self.grid
            && same(self.eps, r.eps)
            && same(self.delta, r.delta)
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("LQG_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| LqgError::Config(format!("thread pool: {e}")))
}

/// `n` replicas of `spec`, in replica order whatever the number of workers
/// (`LQG_THREADS`). Errors name the sampler and replica.
pub fn run_replicas(spec: &SamplerSpec, n: usize, master: u64) -> Result<Vec<SampleRecord>> {
    worker_pool()?.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|r| {
                let seed = spec.replica_seed(master, r);
                spec.draw(seed)
                    .map(|s| SampleRecord::from_sample(&s, spec.grid, seed, r))
                    .map_err(|e| LqgError::Tagged {
                        sampler: spec.label(),
                        replica: r,
                        source: Box::new(e),
                    })
            })
            .collect()
    })
}

fn observable_sample(records: &[SampleRecord], k: usize) -> WeightedSample {
    WeightedSample::from_log_weights(
        records.iter().map(|r| r.observables[k]).collect(),
        &records.iter().map(|r| r.log_weight).collect::<Vec<_>>(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    Withheld(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub ess_a: f64,
    pub ess_b: f64,
    pub tests: Vec<(String, KsTest)>,
    pub verdict: Verdict,
}

/// Weighted KS on each observable in `observables`; no verdict when either
/// effective sample size is below a tenth of its sample size, or when the
/// test is not calibrated.
pub fn compare_records(
    a: &[SampleRecord],
    b: &[SampleRecord],
    observables: &[usize],
    alpha: f64,
    seed: u64,
    calibrated: bool,
) -> Result<PairComparison> {
    if a.is_empty() || b.is_empty() {
        return Err(LqgError::EmptySample);
    }
    let mut tests = Vec::new();
    for &k in observables {
        let t = two_sample_test(
            &observable_sample(a, k),
            &observable_sample(b, k),
            alpha,
            seed.wrapping_add(k as u64),
        )?;
        tests.push((OBSERVABLES[k].to_string(), t));
    }
    let ess = |r: &[SampleRecord]| {
        WeightedSample::from_log_weights(vec![0.0; r.len()], &r.iter().map(|x| x.log_weight).collect::<Vec<_>>()).ess()
    };
    let (ess_a, ess_b) = (ess(a), ess(b));
    let verdict = if !calibrated {
        Verdict::Withheld("test calibration failed".into())
    } else if ess_a < a.len() as f64 / 10.0 || ess_b < b.len() as f64 / 10.0 {
        Verdict::Withheld(format!(
            "effective sample size {ess_a:.0} / {ess_b:.0} below a tenth of the sample"
        ))
    } else if tests.iter().any(|(_, t)| t.reject) {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    let label = |r: &[SampleRecord]| {
        let x = &r[0];
        SamplerSpec {
            tag: x.tag,
            gamma: x.gamma,
            grid: x.grid,
            eps: x.eps,
            delta: x.delta,
        }
        .label()
    };
    Ok(PairComparison {
        a: label(a),
        b: label(b),
        n_a: a.len(),
        n_b: b.len(),
        ess_a,
        ess_b,
        tests,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TvRow {
    pub delta: f64,
    /// largest over observables of the binned TV between the unweighted law and
    /// its reweighting by the raw boundary length
    pub tv: f64,
    pub se: f64,
    /// `tanh(gamma delta)`
    pub bound: f64,
    pub within_bound: bool,
    /// the weighted sampler's observable means agree with the reweighted
    /// unweighted means within 3 SE (all observables)
    pub means_agree: bool,
    /// largest KS distance between the two samplers' outputs
    pub ks_between: f64,
}

/// TV gap between the weighted and unweighted third-point laws at each band
/// width. Input per row: `(delta, unweighted records, weighted records)`.
pub fn tv_trend(
    sets: &[(f64, &[SampleRecord], &[SampleRecord])],
    gamma: f64,
    observables: &[usize],
    seed: u64,
) -> Result<Vec<TvRow>> {
    let mut rows = Vec::new();
    for (delta, un, we) in sets {
        if un.is_empty() || we.is_empty() {
            return Err(LqgError::EmptySample);
        }
        let ratio: Vec<f64> = un
            .iter()
            .map(|r| {
                r.nu_raw
                    .ok_or_else(|| LqgError::Config("unweighted records lack nu_raw".into()))
            })
            .collect::<Result<_>>()?;
        let tv_of = |x: &[SampleRecord], idx: Option<&[usize]>| -> Result<f64> {
            let mut best: f64 = 0.0;
            for &k in observables {
                let s = observable_sample(x, k);
                let r: Vec<f64> = match idx {
                    Some(idx) => idx.iter().map(|&i| ratio[i]).collect(),
                    None => ratio.clone(),
                };
                best = best.max(reweighting_tv(&s, &r, TV_BINS)?);
            }
            Ok(best)
        };
        let tv = tv_of(un, None)?;
        let index = WeightedSample::unweighted((0..un.len()).map(|i| i as f64).collect());
        let se = bootstrap_se(&index, TV_RESAMPLES, seed ^ delta.to_bits(), |_, idx| {
            let sub: Vec<SampleRecord> = idx.iter().map(|&i| un[i].clone()).collect();
            tv_of(&sub, Some(idx))
        })?;
        let mut means_agree = true;
        let mut ks_between: f64 = 0.0;
        for &k in observables {
            let u = observable_sample(un, k);
            let rw = WeightedSample {
                values: u.values.clone(),
                weights: u.weights.iter().zip(&ratio).map(|(w, r)| w * r).collect(),
            };
            let w = observable_sample(we, k);
            let gap = (rw.mean() - w.mean()).abs();
            if gap > 3.0 * rw.mean_se().hypot(w.mean_se()) {
                means_agree = false;
            }
            ks_between = ks_between.max(super::stats::ks_statistic(&u, &w)?);
        }
        let bound = (gamma * delta).tanh();
        rows.push(TvRow {
            delta: *delta,
            tv,
            se,
            bound,
            within_bound: tv <= bound + 3.0 * se,
            means_agree,
            ks_between,
        });
    }
    Ok(rows)
}

/// Summary of one sampler's records.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSummary {
    pub label: String,
    pub n: usize,
    pub ess: f64,
    pub mean_attempts: f64,
    pub weight_range: (f64, f64),
    pub moments: Vec<(String, Vec<MomentEstimate>)>,
}

fn summarize(records: &[SampleRecord], observables: &[usize], seed: u64) -> Result<SamplerSummary> {
    let x = &records[0];
    let spec = SamplerSpec {
        tag: x.tag,
        gamma: x.gamma,
        grid: x.grid,
        eps: x.eps,
        delta: x.delta,
    };
    let params = GammaParams::new(x.gamma)?;
    let qs = [-2.0 * three_point_s(&params) / params.gamma, 0.5, 1.0, 2.0];
    let mut moments = Vec::new();
    for &k in observables {
        let s = observable_sample(records, k);
        // negative moments only for the total area
        moments.push((
            OBSERVABLES[k].to_string(),
            moment_table(&s, &qs, OBSERVABLES[k] == "mu_total", seed)?,
        ));
    }
    let w: Vec<f64> = records.iter().map(|r| r.weight).collect();
    Ok(SamplerSummary {
        label: spec.label(),
        n: records.len(),
        ess: observable_sample(records, 0).ess(),
        mean_attempts: records.iter().map(|r| r.attempts as f64).sum::<f64>() / records.len() as f64,
        weight_range: (
            w.iter().cloned().fold(f64::INFINITY, f64::min),
            w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        ),
        moments,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaSection {
    pub gamma: f64,
    pub samplers: Vec<SamplerSummary>,
    /// HRV vs shared weighted, DMS vs shared unweighted, HRV vs DMS
    pub comparisons: Vec<PairComparison>,
    pub tv: Vec<TvRow>,
    pub location: Option<LocationTable>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub calibration: Calibration,
    pub sections: Vec<GammaSection>,
}

/// Every sampler setting the battery needs for one `gamma`.
fn plan(config: &ExperimentConfig, gamma: f64) -> Vec<SamplerSpec> {
    let grid = *config.grid.last().expect("validated");
    let eps_min = config.eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta_min = config.delta.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut v = vec![
        SamplerSpec {
            tag: ConstructionTag::Hrv,
            gamma,
            grid,
            eps: None,
            delta: None,
        },
        SamplerSpec {
            tag: ConstructionTag::Dms,
            gamma,
            grid,
            eps: None,
            delta: None,
        },
    ];
    for &d in &config.delta {
        for tag in [ConstructionTag::SharedWeighted, ConstructionTag::SharedUnweighted] {
            v.push(SamplerSpec {
                tag,
                gamma,
                grid,
                eps: Some(eps_min),
                delta: Some(d),
            });
        }
    }
    for &e in config.eps.iter().filter(|e| **e != eps_min) {
        v.push(SamplerSpec {
            tag: ConstructionTag::SharedWeighted,
            gamma,
            grid,
            eps: Some(e),
            delta: Some(delta_min),
        });
    }
    v
}

/// Builds the report from records alone (so a report can be recomputed from
/// the sample file).
pub fn report_from_records(config: &ExperimentConfig, records: &[SampleRecord]) -> Result<ComparisonReport> {
    config.validate()?;
    let calibration = calibrate(config.alpha, CALIBRATION_REPS, CALIBRATION_N, config.seed)?;
    let obs = config.observable_indices();
    let eps_min = config.eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta_min = config.delta.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid = *config.grid.last().expect("validated");
    let mut sections = Vec::new();
    for (gi, &gamma) in config.gamma.iter().enumerate() {
        let pick = |tag, eps, delta| -> Result<Vec<SampleRecord>> {
            let spec = SamplerSpec {
                tag,
                gamma,
                grid,
                eps,
                delta,
            };
            let v: Vec<SampleRecord> = records.iter().filter(|r| spec.matches(r)).cloned().collect();
            if v.is_empty() {
                return Err(LqgError::Config(format!("no records for {}", spec.label())));
            }
            Ok(v)
        };
        let seed = config.seed.wrapping_add(1000 * gi as u64);
        let hrv = pick(ConstructionTag::Hrv, None, None)?;
        let dms = pick(ConstructionTag::Dms, None, None)?;
        let sw = pick(ConstructionTag::SharedWeighted, Some(eps_min), Some(delta_min))?;
        let su = pick(ConstructionTag::SharedUnweighted, Some(eps_min), Some(delta_min))?;
        let ok = calibration.pass;
        let comparisons = vec![
            compare_records(&hrv, &sw, &obs, config.alpha, seed + 1, ok)?,
            compare_records(&dms, &su, &obs, config.alpha, seed + 2, ok)?,
            compare_records(&hrv, &dms, &obs, config.alpha, seed + 3, ok)?,
        ];
        let mut deltas = config.delta.clone();
        deltas.sort_by(|a, b| b.total_cmp(a));
        let mut by_delta = Vec::new();
        for &d in &deltas {
            by_delta.push((
                d,
                pick(ConstructionTag::SharedUnweighted, Some(eps_min), Some(d))?,
                pick(ConstructionTag::SharedWeighted, Some(eps_min), Some(d))?,
            ));
        }
        let sets: Vec<(f64, &[SampleRecord], &[SampleRecord])> =
            by_delta.iter().map(|(d, u, w)| (*d, &u[..], &w[..])).collect();
        let tv = tv_trend(&sets, gamma, &obs, seed + 4)?;
        let mut loc = Vec::new();
        for &e in &config.eps {
            for r in pick(ConstructionTag::SharedWeighted, Some(e), Some(delta_min))? {
                loc.push(LocationInput {
                    eps: e,
                    gamma,
                    log_weight: r.log_weight,
                    t_root: r.t_root.unwrap_or(f64::NAN),
                    a_band: r.a_band.unwrap_or(f64::NAN),
                });
            }
        }
        let location = Some(location_table(&loc)?);
        let mut samplers = Vec::new();
        for spec in plan(config, gamma) {
            samplers.push(summarize(&pick(spec.tag, spec.eps, spec.delta)?, &obs, seed + 5)?);
        }
        sections.push(GammaSection {
            gamma,
            samplers,
            comparisons,
            tv,
            location,
        });
    }
    Ok(ComparisonReport {
        config: config.clone(),
        calibration,
        sections,
    })
}

/// Runs every sampler of the battery, writes `samples.tsv`, `columns.dat`
/// and `report.txt` under the configured output directory, and returns the report.
pub fn run_equivalence(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let mut records = Vec::new();
    for &gamma in &config.gamma {
        for spec in plan(config, gamma) {
            records.extend(run_replicas(&spec, config.n, config.seed)?);
        }
    }
    fs::create_dir_all(&config.output)?;
    write_samples(&config.output.join("samples.tsv"), &records)?;
    fs::write(config.output.join("columns.dat"), column_dump(&records))?;
    let report = report_from_records(config, &records)?;
    fs::write(config.output.join("report.txt"), report.to_text())?;
    Ok(report)
}

/// Whitespace-separated columns for plotting tools.
pub fn column_dump(records: &[SampleRecord]) -> String {
    let mut s = String::from("# tag gamma eps delta replica log_w arc1 arc2 arc3 mu_total mu_ball\n");
    for r in records {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e} {:.10e}",
            r.tag,
            r.gamma,
            r.eps.map(|e| e.to_string()).unwrap_or("-".into()),
            r.delta.map(|e| e.to_string()).unwrap_or("-".into()),
            r.replica,
            r.log_weight,
            r.observables[0],
            r.observables[1],
            r.observables[2],
            r.observables[3],
            r.observables[4]
        );
    }
    s
}

impl PairComparison {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} vs {}  (n {} / {}, ESS {:.1} / {:.1})",
            self.a, self.b, self.n_a, self.n_b, self.ess_a, self.ess_b
        );
        for (name, t) in &self.tests {
            let _ = writeln!(
                s,
                "  {name:<9} KS {:.4}  p {:.4}{}",
                t.statistic,
                t.p_value,
                if t.reject { "  reject" } else { "" }
            );
        }
        let _ = writeln!(s, "  verdict: {:?}", self.verdict);
        s
    }
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# equivalence report\n\n## configuration\n{}", self.config.to_text());
        let c = &self.calibration;
        let _ = writeln!(
            s,
            "## calibration\nsize at alpha {}: {}/{} rejections (rate {:.3}, 3 SE {:.3}): {}\n",
            c.alpha,
            c.rejections,
            c.repetitions,
            c.rate,
            3.0 * c.se,
            if c.pass { "ok" } else { "FAILED" }
        );
        for sec in &self.sections {
            let _ = writeln!(s, "## gamma = {}\n\n### samplers", sec.gamma);
            for m in &sec.samplers {
                let _ = writeln!(
                    s,
                    "{}: n {}, ESS {:.1}, mean attempts {:.2}, weights [{:.6e}, {:.6e}]",
                    m.label, m.n, m.ess, m.mean_attempts, m.weight_range.0, m.weight_range.1
                );
                for (name, ms) in &m.moments {
                    let cells: Vec<String> = ms
                        .iter()
                        .map(|e| format!("q={:.3}: {:.4e} [{:.4e}, {:.4e}]", e.q, e.estimate, e.ci.0, e.ci.1))
                        .collect();
                    let _ = writeln!(s, "  {name:<9} {}", cells.join("  "));
                }
            }
            let _ = writeln!(s, "\n### two-sample tests");
            for p in &sec.comparisons {
                s.push_str(&p.to_text());
            }
            let _ = writeln!(s, "\n### weighted vs unweighted third point (TV by delta)");
            let _ = writeln!(s, "delta   tv       se       tanh(gamma delta)  within  means  ks");
            for r in &sec.tv {
                let _ = writeln!(
                    s,
                    "{:<7} {:.5}  {:.5}  {:.5}            {:<6}  {:<5}  {:.4}",
                    r.delta, r.tv, r.se, r.bound, r.within_bound, r.means_agree, r.ks_between
                );
            }
            if let Some(t) = &sec.location {
                let _ = writeln!(s, "\n### location of the third point");
                let _ = writeln!(
                    s,
                    "eps       n     ESS      |log w|/|log eps|^(2/3) q25/q50/q75 (se)     H freq (se)"
                );
                for r in &t.rows {
                    let q = r.ratio_quartiles;
                    let _ = writeln!(
                        s,
                        "{:<9.1e} {:<5} {:<8.1} {:.4}/{:.4}/{:.4} ({:.4})        {:.4} ({:.4})",
                        r.eps, r.n, r.ess, q[0], q[1], q[2], r.median_se, r.h_freq, r.h_se
                    );
                }
                if let (Some(h), Some(m)) = (t.h_increasing, t.median_decreasing) {
                    let _ = writeln!(s, "H frequency increasing: {h}; median decreasing: {m}");
                }
            }
            let _ = writeln!(s);
        }
        s
    }
}
