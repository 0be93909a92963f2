use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lqg::constructions::{location_table, ConstructionTag, LocationInput};
use lqg::error::{LqgError, Result};
use lqg::harness::{
    calibrate, compare_records, read_samples, run_equivalence, run_replicas, selftest, write_samples, ExperimentConfig,
    SamplerSpec, Verdict,
};

#[derive(Parser)]
#[command(name = "lqg", version, about = "Quantum disk samplers and equivalence tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Construction {
    Hrv,
    Dms,
    SharedWeighted,
    SharedUnweighted,
    HrvUnitArea,
}

impl From<Construction> for ConstructionTag {
    fn from(c: Construction) -> Self {
        match c {
            Construction::Hrv => ConstructionTag::Hrv,
            Construction::Dms => ConstructionTag::Dms,
            Construction::SharedWeighted => ConstructionTag::SharedWeighted,
            Construction::SharedUnweighted => ConstructionTag::SharedUnweighted,
            Construction::HrvUnitArea => ConstructionTag::HrvUnitArea,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw replicas from one sampler and write them as sample records.
    Sample {
        #[arg(long, value_enum)]
        construction: Construction,
        #[arg(long)]
        gamma: f64,
        /// strip grid size (rows across the strip)
        #[arg(long, default_value_t = 129)]
        grid: usize,
        /// only used by the shared samplers
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted two-sample KS on every observable of two sample files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full battery from a config file; writes samples and report to its output directory.
    Equivalence {
        #[arg(long)]
        config: PathBuf,
    },
    /// Location of the third point and band frequencies, by eps.
    Diagnose {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Exact identities and kernel checks.
    Selftest,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sample {
            construction,
            gamma,
            grid,
            eps,
            delta,
            n,
            seed,
            out,
        } => {
            let spec = SamplerSpec {
                tag: construction.into(),
                gamma,
                grid,
                eps,
                delta,
            };
            let records = run_replicas(&spec, n, seed)?;
            write_samples(&out, &records)?;
            eprintln!(
                "{} records of {} written to {}",
                records.len(),
                spec.label(),
                out.display()
            );
            Ok(true)
        }
        Command::Compare { a, b, alpha, seed, out } => {
            if !(alpha > 0.0 && alpha <= 0.1) {
                return Err(LqgError::Config(format!("alpha = {alpha} outside (0, 0.1]")));
            }
            let (ra, rb) = (read_samples(&a)?, read_samples(&b)?);
            let cal = calibrate(alpha, 100, 1000, seed)?;
            let cmp = compare_records(&ra, &rb, &[0, 1, 2, 3, 4], alpha, seed, cal.pass)?;
            let text = format!(
                "calibration at alpha {}: {}/{} rejections: {}\n{}",
                alpha,
                cal.rejections,
                cal.repetitions,
                if cal.pass { "ok" } else { "FAILED" },
                cmp.to_text()
            );
            match out {
                Some(p) => std::fs::write(p, &text)?,
                None => print!("{text}"),
            }
            Ok(cmp.verdict == Verdict::Pass)
        }
        Command::Equivalence { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_equivalence(&cfg)?;
            print!("{}", report.to_text());
            Ok(report
                .sections
                .iter()
                .all(|s| s.comparisons.iter().all(|c| c.verdict == Verdict::Pass)))
        }
        Command::Diagnose { input } => {
            let rows: Vec<LocationInput> = read_samples(&input)?
                .into_iter()
                .filter(|r| r.tag == ConstructionTag::SharedWeighted)
                .map(|r| match (r.eps, r.t_root, r.a_band) {
                    (Some(eps), Some(t_root), Some(a_band)) => Ok(LocationInput {
                        eps,
                        gamma: r.gamma,
                        log_weight: r.log_weight,
                        t_root,
                        a_band,
                    }),
                    _ => Err(LqgError::Config(format!(
                        "replica {} lacks eps, t_root or A_band",
                        r.replica
                    ))),
                })
                .collect::<Result<_>>()?;
            let t = location_table(&rows)?;
            println!("eps        n      ESS       ratio q25/q50/q75          median se  H freq  H se");
            for r in &t.rows {
                let q = r.ratio_quartiles;
                println!(
                    "{:<10.1e} {:<6} {:<9.1} {:.4}/{:.4}/{:.4}    {:.4}     {:.4}  {:.4}",
                    r.eps, r.n, r.ess, q[0], q[1], q[2], r.median_se, r.h_freq, r.h_se
                );
            }
            if let (Some(h), Some(m)) = (t.h_increasing, t.median_decreasing) {
                println!("H frequency increasing as eps decreases: {h}");
                println!("median ratio decreasing as eps decreases: {m}");
            }
            Ok(true)
        }
        Command::Selftest => {
            let checks = selftest();
            for c in &checks {
                println!("{} {:<32} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
