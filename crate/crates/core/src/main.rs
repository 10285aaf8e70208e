use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rpms::bench::{
    compute_measures, decide, derive_seed, generate_budgeted_instance, generate_small_instance, max_alpha,
    read_instance, read_results, rolling_horizon, run_experiment, write_ecdf, write_instance, write_measures,
    write_results, ExperimentConfig, Family, Policy, ResultRow,
};
use rpms::bounds::{bound_rh_ph, bound_sa_ph, BoundInputs};
use rpms::model::{Instance, State};
use rpms::uncertainty::UncertaintySet;
use rpms::{Error, Result};

/// Robust makespan scheduling on parallel machines.
#[derive(Parser)]
#[command(name = "rpms", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate random instances into a directory.
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Budget of budgeted instances.
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        /// Scenarios per discrete instance.
        #[arg(long, default_value_t = 15)]
        scenarios: usize,
        #[arg(long, default_value_t = 1)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance at time zero, or simulate a policy on one scenario.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        policy: Policy,
        /// Comma-separated realized durations.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Run an experiment described by a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Ratio bounds of a two-machine budgeted instance.
    Bounds {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Performance measures from a results CSV.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Measures CSV; stdout when omitted.
        #[arg(long)]
        measures: Option<PathBuf>,
        /// Tidy ECDF CSV.
        #[arg(long)]
        ecdf: Option<PathBuf>,
    },
}

fn labels(tasks: &[usize]) -> String {
    tasks.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" ")
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Gen { family, n, m, gamma, scenarios, instances, seed, out } => {
            std::fs::create_dir_all(&out)?;
            for k in 0..instances {
                let s = derive_seed(&[seed, k as u64]);
                let inst = match family {
                    Family::Budgeted => generate_budgeted_instance(s, n, m, gamma)?,
                    f if m == 2 => generate_small_instance(s, n, scenarios, f)?,
                    _ => return Err(Error::InvalidInput("discrete families are generated for two machines".into())),
                };
                let path = out.join(format!("instance-{k:04}.toml"));
                write_instance(&path, &inst)?;
                println!("{}", path.display());
            }
        }
        Cmd::Solve { instance, policy, scenario } => {
            let inst = read_instance(&instance)?;
            match scenario {
                Some(s) => {
                    let d = s
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("{v:?}: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    if !inst.set.contains(&d) {
                        eprintln!("warning: scenario lies outside the uncertainty set");
                    }
                    let r = rolling_horizon(policy, &inst, &d, None)?;
                    println!("promised {}", r.promised);
                    println!("realized {}", r.realized);
                    println!("first_decision {}", labels(&r.first_decision));
                }
                None => {
                    let dec = if inst.set.is_discrete() {
                        decide(policy, &inst, &State::<i64>::initial())?
                    } else {
                        decide(policy, &inst, &State::<f64>::initial())?
                    };
                    println!("value {}", dec.value);
                    println!("first_decision {}", labels(&dec.tasks));
                }
            }
        }
        Cmd::Simulate { config } => {
            let cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(&config)?)?;
            let records = run_experiment(&cfg)?;
            let rows: Vec<ResultRow> = records.iter().map(ResultRow::from).collect();
            write_results(output(cfg.output.as_ref())?, &rows)?;
        }
        Cmd::Bounds { instance } => {
            let inst: Instance = read_instance(&instance)?;
            let UncertaintySet::Budgeted(b) = &inst.set else {
                return Err(Error::UnsupportedSet("bounds are defined for budgeted sets".into()));
            };
            if inst.m != 2 {
                return Err(Error::InvalidInput("bounds are defined for two machines".into()));
            }
            let alpha = max_alpha(b);
            let inputs = BoundInputs::new(b.nominal.clone(), alpha, b.budget)?;
            println!("alpha {alpha}");
            if b.deviation.iter().zip(&b.nominal).any(|(d, n)| (d / n - alpha).abs() > 1e-12) {
                println!("note: deviation ratios differ by task; alpha is their maximum");
            }
            println!("sa_ph {}", bound_sa_ph(&inputs)?);
            println!("rh_ph {}", bound_rh_ph(&inputs)?);
        }
        Cmd::Report { results, measures, ecdf } => {
            let rows = read_results(File::open(&results)?)?;
            let ms = compute_measures(&rows)?;
            write_measures(output(measures.as_ref())?, &ms)?;
            if let Some(path) = ecdf {
                write_ecdf(output(Some(&path))?, &ms)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
