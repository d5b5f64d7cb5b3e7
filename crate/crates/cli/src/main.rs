use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use faultmortar::analysis::{infsup_csv, infsup_entry, saddle_operators};
use faultmortar::benchmarks::{run_benchmark, write_step_outputs, BenchOptions, BENCHMARKS};
use faultmortar::config::RunConfig;
use faultmortar::mortar::MultiplierSpace;
use faultmortar::solver::{Model, SimulationState, StepResult};

#[derive(Parser)]
#[command(name = "faultmortar", version, about = "Frictional contact on non-conforming hexahedral meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Disable the traction-jump stabilization.
        #[arg(long)]
        no_stab: bool,
        /// Multiplier space: p0 or nodal.
        #[arg(long)]
        multiplier: Option<MultiplierSpace>,
        /// Output directory (overrides the config).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write the mortar face pairs of every interface as CSV.
        #[arg(long)]
        dump_pairs: bool,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Run a packaged benchmark and compare with its reference values.
    Bench {
        /// One of: patch, sliding, fracture, twoblock, infsup, layered.
        name: String,
        #[arg(long)]
        no_stab: bool,
        #[arg(long)]
        multiplier: Option<MultiplierSpace>,
        /// Number of load steps for the multi-step benchmarks.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Numerical inf-sup test for a single-interface configuration; prints CSV.
    Infsup {
        config: PathBuf,
        /// Also write the CSV to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            config,
            no_stab,
            multiplier,
            output,
            dump_pairs,
            restart,
        } => {
            run(&config, no_stab, multiplier, output, dump_pairs, restart.as_deref())?;
            Ok(true)
        }
        Command::Bench {
            name,
            no_stab,
            multiplier,
            steps,
            output,
        } => {
            if !BENCHMARKS.contains(&name.as_str()) {
                bail!("unknown benchmark '{name}' (choose from {})", BENCHMARKS.join(", "));
            }
            let opts = BenchOptions {
                no_stabilization: no_stab,
                multiplier,
                steps,
            };
            let report = run_benchmark(&name, &opts, output.as_deref())?;
            print!("{}", report.text());
            Ok(report.passed())
        }
        Command::Infsup { config, output } => {
            let (cfg, base) = RunConfig::load(&config)?;
            let mut problem = cfg.into_problem(&base)?;
            problem.solver.stabilization = true;
            problem.solver.multiplier_space = MultiplierSpace::P0;
            let model = Model::new(problem)?;
            let ops = saddle_operators(&model)?;
            let csv = infsup_csv(&[infsup_entry(&ops, false)?, infsup_entry(&ops, true)?]);
            print!("{csv}");
            if let Some(path) = output {
                std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(true)
        }
    }
}

fn run(
    config: &Path,
    no_stab: bool,
    multiplier: Option<MultiplierSpace>,
    output: Option<PathBuf>,
    dump_pairs: bool,
    restart: Option<&Path>,
) -> Result<()> {
    let (cfg, base) = RunConfig::load(config).with_context(|| format!("reading {}", config.display()))?;
    let out = output
        .or_else(|| cfg.output.dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from("output"));
    let dump_pairs = dump_pairs || cfg.output.dump_pairs;
    let mut problem = cfg.into_problem(&base)?;
    if no_stab {
        problem.solver.stabilization = false;
    }
    if let Some(m) = multiplier {
        problem.solver.multiplier_space = m;
    }
    let model = Model::new(problem)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    if dump_pairs {
        for it in &model.interfaces {
            let path = out.join(format!("pairs_{}.csv", it.def.name));
            std::fs::write(&path, it.coupling.pairs_csv(&it.topo))?;
        }
    }
    let mut state = match restart {
        Some(p) => SimulationState::from_checkpoint(&model, &std::fs::read_to_string(p)?)?,
        None => model.initial_state(),
    };
    let mut log = String::new();
    while state.step < model.problem.loads.steps {
        let res = match model.solve_load_step(&state) {
            Ok(r) => r,
            Err(e) => {
                std::fs::write(out.join("checkpoint.txt"), state.to_checkpoint())?;
                std::fs::write(out.join("report.txt"), &log)?;
                bail!("step {} failed: {e}; last converged state saved to checkpoint.txt", state.step + 1);
            }
        };
        summarize(&mut log, &res);
        write_step_outputs(&out, &model, std::slice::from_ref(&res))?;
        std::fs::write(out.join("checkpoint.txt"), res.state.to_checkpoint())?;
        eprint!("{}", log.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
        state = res.state;
    }
    std::fs::write(out.join("report.txt"), &log)?;
    Ok(())
}

fn summarize(log: &mut String, res: &StepResult) {
    let counts: Vec<String> = res
        .state
        .contact
        .iter()
        .map(|c| {
            use faultmortar::friction::Regime::*;
            format!("stick {} slip {} open {}", c.count(Stick), c.count(Slip), c.count(Open))
        })
        .collect();
    let _ = writeln!(
        log,
        "step {}: newton {:?}, active-set updates {}, residual {:.3e}, {}",
        res.report.step,
        res.report.newton_iterations,
        res.report.active_set_updates,
        res.report.final_residual,
        counts.join("; ")
    );
    for w in &res.report.warnings {
        let _ = writeln!(log, "  warning: {w}");
    }
}
