use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tfqss_cli::{preset, resolve, run_scenario, Layer, Mode, Origin, Resolved};

/// Secret-key rates of twin-field DPS quantum secret sharing with
/// independently adjustable source intensities.
#[derive(Parser)]
#[command(name = "tfqss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the finite-key rate at one operating point.
    Rate,
    /// Optimize the intensities at every total distance of a grid.
    Sweep,
    /// Optimize the intensities for one channel.
    Optimize,
    /// Run the Monte Carlo and compare it with the closed form.
    Simulate,
    /// Sweep with independent and with equal intensities and compare.
    Compare,
    /// Run the scenarios behind a figure (fig3, fig4 or fig5); `--out` names a directory.
    Preset { name: String },
}

#[derive(Args)]
struct Overrides {
    /// Scenario file (flat key = value document).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path, or output directory for presets.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the simulator and the optimizer.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the resolved scenario, annotated with where each value came from, and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[arg(long, global = true)]
    mu_a: Option<f64>,
    #[arg(long, global = true)]
    mu_b: Option<f64>,
    #[arg(long, global = true)]
    l_a: Option<f64>,
    #[arg(long, global = true)]
    l_b: Option<f64>,
    #[arg(long, global = true)]
    delta_km: Option<f64>,
    #[arg(long, global = true)]
    n_pulses: Option<f64>,
    #[arg(long, global = true)]
    e_d: Option<f64>,
    #[arg(long, global = true)]
    test_fraction: Option<f64>,
    /// Let the optimizer also choose the test fraction.
    #[arg(long, global = true)]
    optimize_test_fraction: bool,
    #[arg(long, global = true)]
    l_min: Option<f64>,
    #[arg(long, global = true)]
    l_max: Option<f64>,
    #[arg(long, global = true)]
    l_step: Option<f64>,
    #[arg(long, global = true)]
    n_slots: Option<u64>,
    #[arg(long, global = true)]
    population: Option<u32>,
    #[arg(long, global = true)]
    generations: Option<u32>,
}

fn int(key: &str, v: u64) -> Result<i64> {
    i64::try_from(v).with_context(|| format!("invalid `{key}`: {v} is too large"))
}

impl Overrides {
    /// Command-line settings other than `--out`.
    fn layer(&self) -> Result<Layer> {
        let mut l = Layer::new(Origin::CommandLine);
        l.set_opt("mu_a", self.mu_a)
            .set_opt("mu_b", self.mu_b)
            .set_opt("l_a", self.l_a)
            .set_opt("l_b", self.l_b)
            .set_opt("delta_km", self.delta_km)
            .set_opt("n_pulses", self.n_pulses)
            .set_opt("e_d", self.e_d)
            .set_opt("test_fraction", self.test_fraction)
            .set_opt(
                "optimize_test_fraction",
                self.optimize_test_fraction.then_some(true),
            )
            .set_opt("l_min", self.l_min)
            .set_opt("l_max", self.l_max)
            .set_opt("l_step", self.l_step)
            .set_opt("population", self.population.map(i64::from))
            .set_opt("generations", self.generations.map(i64::from));
        if let Some(seed) = self.seed {
            l.set("rng_seed", int("rng_seed", seed)?);
        }
        if let Some(n) = self.n_slots {
            l.set("n_slots", int("n_slots", n)?);
        }
        Ok(l)
    }

    fn file_layer(&self) -> Result<Option<Layer>> {
        self.config
            .as_ref()
            .map(|path| {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Layer::parse(&text, Origin::ConfigFile)
                    .with_context(|| format!("in {}", path.display()))
            })
            .transpose()
    }
}

fn execute(resolved: &Resolved, print_config: bool) -> Result<()> {
    if print_config {
        print!("{}", resolved.annotated()?);
        return Ok(());
    }
    let outcome = run_scenario(&resolved.config)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let files: Vec<String> = outcome
        .files
        .iter()
        .map(|f| f.display().to_string())
        .collect();
    println!("{} -> {}", outcome.summary, files.join(", "));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let opts = &cli.opts;
    let base: Vec<Layer> = opts.file_layer()?.into_iter().collect();
    let overrides = opts.layer()?;
    let mode = match &cli.command {
        Command::Rate => Mode::Rate,
        Command::Sweep => Mode::Sweep,
        Command::Optimize => Mode::Optimize,
        Command::Simulate => Mode::Simulate,
        Command::Compare => Mode::Compare,
        Command::Preset { name } => {
            let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("."));
            for run in preset(name)? {
                let mut target = Layer::new(Origin::Preset);
                target.set(
                    "out",
                    dir.join(format!("{}.csv", run.label)).display().to_string(),
                );
                let mut layers = base.clone();
                layers.extend([run.layer, overrides.clone(), target]);
                let resolved =
                    resolve(&layers).with_context(|| format!("preset run {}", run.label))?;
                if opts.print_config {
                    println!("# --- {} ---", run.label);
                }
                execute(&resolved, opts.print_config)
                    .with_context(|| format!("preset run {}", run.label))?;
            }
            return Ok(());
        }
    };
    let mut cli_layer = overrides;
    cli_layer.set("mode", mode.as_str());
    if let Some(out) = &opts.out {
        cli_layer.set("out", out.display().to_string());
    }
    let mut layers = base;
    layers.push(cli_layer);
    execute(&resolve(&layers)?, opts.print_config)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
