use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use amec_bench::complexity::{run_complexity, write_timing_csv};
use amec_bench::rows::{aggregate, write_csv};
use amec_bench::sweep::{parse_schemes, parse_values, run_instance, run_sweep, Axis, PrimalKind, RunOptions, SweepSpec};
use amec_bench::validate::{replay, run_validate, save_failure, ValidateOptions};
use amec_bench::{capacity_hint, BenchError, Result, SolveSummary};
use amec_core::baselines::Scheme;
use amec_core::gbd::{self, GbdStatus};
use amec_core::scenario::{generate_scenario, load_config, save_report, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "amec", version, about = "Energy-minimal scheduling for wireless-powered edge computing")]
struct Cli {
    /// Worker threads; falls back to AMEC_THREADS, then to all cores.
    #[arg(long, global = true, env = "AMEC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON scenario config; defaults to K = 10 reference settings.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Instance seed (base seed for multi-seed commands).
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    out: Option<PathBuf>,

    /// Relative decomposition gap.
    #[arg(long)]
    eps_gbd: Option<f64>,

    /// Decomposition iteration limit.
    #[arg(long)]
    max_iter: Option<usize>,

    /// Fixed-schedule solver: joint or bcd.
    #[arg(long, default_value = "joint")]
    primal: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance with the decomposition.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one axis over seeds and schemes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: String,
        /// Comma-separated values or an inclusive integer range `a..b`.
        #[arg(long)]
        values: String,
        /// Number of seeds, counting up from --seed.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value = "Proposed,JSORA,Sync,Random")]
        schemes: String,
    },
    /// Compare schemes on one instance.
    Baselines {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        schemes: String,
    },
    /// Randomized invariant checks.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        instances: usize,
        #[arg(long, default_value_t = 6)]
        k_max: usize,
        /// Scale the allocator's task prices before rebuilding frequencies.
        #[arg(long)]
        perturb_duals: bool,
        /// Re-run the checks on a saved failing instance.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Time the frequency allocator against the interior-point reference.
    Complexity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 41)]
        reps: usize,
    },
}

fn load(common: &Common) -> Result<(ScenarioConfig, RunOptions)> {
    let mut cfg = match &common.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::with_k(10),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(e) = common.eps_gbd {
        if !(e > 0.0 && e.is_finite()) {
            return Err(BenchError::config("eps-gbd", format!("must be positive, got {e}")));
        }
        cfg.tolerances.eps_gbd = e;
    }
    if let Some(m) = common.max_iter {
        if m == 0 {
            return Err(BenchError::config("max-iter", "must be at least 1"));
        }
        cfg.tolerances.max_iter_gbd = m;
    }
    cfg.validate()?;
    let mut run = RunOptions::from_config(&cfg);
    run.primal = common.primal.parse::<PrimalKind>()?;
    Ok((cfg, run))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_solve(common: &Common) -> Result<()> {
    let (cfg, run) = load(common)?;
    let scn = generate_scenario(&cfg, cfg.seed)?;
    let report = match gbd::run(&scn, &run.primal.solver(), &run.gbd) {
        Ok(r) => r,
        Err(e) if e.is_infeasible() => {
            let hint = capacity_hint(&scn)?;
            let mut msg = format!(
                "infeasible: F_max = {:.6e} Hz; every schedule needs at least {:.6e} Hz (total cycles over T)",
                scn.f_max, hint.lower
            );
            match hint.sufficient {
                Some(s) => msg += &format!(
                    "; with the slot durations it uses under unlimited capacity, the identity schedule needs {s:.6e} Hz"
                ),
                None => msg += "; the energy-causality constraints fail even with unlimited capacity",
            }
            eprintln!("{msg}");
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let summary = SolveSummary::new(&scn, &report);
    print!("{}", summary.render());
    if let Some(p) = &common.out {
        save_report(p, &summary)?;
    }
    if report.status == GbdStatus::IterationLimit {
        return Err(amec_core::Error::IterationLimit {
            iterations: report.iterations,
            gap: report.gap(),
        }
        .into());
    }
    Ok(())
}

fn cmd_sweep(common: &Common, axis: &str, values: &str, seeds: u64, schemes: &str) -> Result<()> {
    let (cfg, run) = load(common)?;
    let spec = SweepSpec {
        axis: axis.parse()?,
        values: parse_values(values)?,
        seeds: (cfg.seed..cfg.seed + seeds).collect(),
        schemes: parse_schemes(schemes)?,
    };
    let out = run_sweep(&cfg, &spec, &run)?;
    write_csv(sink(&common.out)?, &out.rows, &out.aggregates)
}

fn cmd_baselines(common: &Common, schemes: &str) -> Result<()> {
    let (cfg, run) = load(common)?;
    let mut schemes = parse_schemes(schemes)?;
    if cfg.k > run.exhaustive_cap {
        if schemes.len() == Scheme::ALL.len() {
            schemes.retain(|&s| s != Scheme::Exhaustive);
        } else if schemes.contains(&Scheme::Exhaustive) {
            return Err(BenchError::config(
                "schemes",
                format!("Exhaustive needs K <= {}, got K = {}", run.exhaustive_cap, cfg.k),
            ));
        }
    }
    let rows = run_instance(&cfg, Axis::K, cfg.k as f64, cfg.seed, &schemes, &run)?;
    let reference = rows.iter().find(|r| r.scheme == Scheme::Proposed && r.is_ok()).map(|r| r.energy_j);
    println!("{:<11} {:<16} {:<18} {:>10}", "scheme", "status", "energy_J", "vs_Proposed");
    for r in &rows {
        let rel = match reference {
            Some(e) if r.is_ok() => format!("{:+.2}%", 100.0 * (r.energy_j - e) / e),
            _ => "-".into(),
        };
        println!("{:<11} {:<16} {:<18.9e} {:>10}", r.scheme.name(), r.status.name(), r.energy_j, rel);
    }
    if let Some(p) = &common.out {
        write_csv(File::create(p)?, &rows, &aggregate(&rows))?;
    }
    Ok(())
}

fn cmd_validate(common: &Common, instances: usize, k_max: usize, perturb: bool, replay_path: Option<&Path>) -> Result<()> {
    let (cfg, run) = load(common)?;
    if let Some(p) = replay_path {
        let (case, rep) = replay(p, &run)?;
        println!("replaying seed {} (recorded failure: {} {})", case.seed, case.check, case.detail);
        for c in &rep.checks {
            println!("  {:<24} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
        }
        let failed = rep.checks.iter().filter(|c| !c.passed).count();
        return if failed == 0 {
            Ok(())
        } else {
            Err(BenchError::Validation {
                failed,
                checked: rep.checks.len(),
            })
        };
    }
    if !(2..=8).contains(&k_max) {
        return Err(BenchError::config("k-max", format!("must lie in 2..=8, got {k_max}")));
    }
    let opts = ValidateOptions {
        instances,
        k_max,
        base_seed: cfg.seed,
        perturb_duals: perturb,
        run,
    };
    let report = run_validate(&cfg, &opts)?;
    println!(
        "{} instances ({} infeasible, skipped), {} checks",
        report.instances.len(),
        report.infeasible(),
        report.checked()
    );
    for (name, passed, failed) in report.tally() {
        println!("  {name:<24} {passed:>5} pass {failed:>5} fail");
    }
    if let Some(case) = &report.first_failure {
        let path = common.out.clone().unwrap_or_else(|| PathBuf::from("amec_validate_failure.json"));
        save_failure(&path, case)?;
        eprintln!(
            "first failure: seed {} check {} ({}); instance saved to {}",
            case.seed,
            case.check,
            case.detail,
            path.display()
        );
        return Err(BenchError::Validation {
            failed: report.failed(),
            checked: report.checked(),
        });
    }
    Ok(())
}

fn cmd_complexity(common: &Common, seeds: u64, reps: usize) -> Result<()> {
    let (cfg, _) = load(common)?;
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + seeds).collect();
    let (rows, summary) = run_complexity(&cfg, &seeds, reps)?;
    write_timing_csv(sink(&common.out)?, &rows, &summary)?;
    if common.out.is_some() {
        for s in &summary {
            println!("transition {:>3}: n={:<3} median speedup {:.1}x", s.transition, s.count, s.median_ratio);
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(BenchError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| BenchError::config("threads", e.to_string()))?;
    }
    match &cli.command {
        Command::Solve { common } => cmd_solve(common),
        Command::Sweep {
            common,
            axis,
            values,
            seeds,
            schemes,
        } => cmd_sweep(common, axis, values, *seeds, schemes),
        Command::Baselines { common, schemes } => cmd_baselines(common, schemes),
        Command::Validate {
            common,
            instances,
            k_max,
            perturb_duals,
            replay,
        } => cmd_validate(common, *instances, *k_max, *perturb_duals, replay.as_deref()),
        Command::Complexity { common, seeds, reps } => cmd_complexity(common, *seeds, *reps),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
