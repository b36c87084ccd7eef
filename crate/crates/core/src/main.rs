use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use koopdamp::pipeline::{self, ExperimentPlan, RunManifest};
use koopdamp::Result;

#[derive(Parser)]
#[command(name = "koopdamp", version, about = "Koopman-mode damping experiments on a simulated room")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the open-loop simulation.
    Simulate(Common),
    /// Fit EDMD spectra and select the oscillatory mode per dictionary.
    Fit(Common),
    /// Run (and calibrate) the closed-loop simulations.
    Control(Common),
    /// Project trajectories onto the level sets and compute the metrics.
    Evaluate(Common),
    /// All four stages in order.
    All(Common),
    /// Print the default experiment plan.
    Plan,
}

#[derive(Args)]
struct Common {
    /// Experiment plan (TOML). Defaults to `<out>/plan.toml` when present, else built-in defaults.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Run directory; overrides the plan's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

impl Common {
    fn plan(&self) -> Result<ExperimentPlan> {
        let stored = self.out.as_ref().map(|o| o.join("plan.toml")).filter(|p| p.exists());
        let mut plan = match (&self.plan, stored) {
            (Some(p), _) => ExperimentPlan::load(p)?,
            (None, Some(p)) => ExperimentPlan::load(&p)?,
            (None, None) => ExperimentPlan::default(),
        };
        if let Some(out) = &self.out {
            plan.out_dir = out.clone();
        }
        Ok(plan)
    }
}

fn summarize(m: &RunManifest) {
    let r = &m.results;
    if let Some(o) = &r.open_loop {
        println!("open loop: mean probe {:.3} C, amplitude {:.4} C, dominant period {:.2} min", o.mean_probe_temp, o.amplitude, o.dominant_period_s / 60.0);
    }
    for (k, f) in &r.fit {
        println!("fit {k}: period {:.2} min, nu = {:.3e} {:+.3e}i", f.period_s / 60.0, f.nu_re, f.nu_im);
    }
    for (k, c) in &r.control {
        println!("control {k}: D = {:.4e}, energy norm {:.4}, amplitude {:.4} ({:+.1}%)", c.d, c.energy_norm, c.amplitude, -100.0 * c.amplitude_reduction);
    }
    for (k, e) in &r.evaluate {
        println!("evaluate {k}: invariance {:.4}, D_hat {:.3e} (R^2 {:.3})", e.invariance_open_loop, e.d_hat, e.d_hat_r_squared);
    }
    if let Some(c) = &r.comparison {
        println!("comparison: nonlinear {:.4} vs linear {:.4} at norm mismatch {:.2}%", c.nonlinear_amplitude, c.linear_amplitude, 100.0 * c.relative_norm_mismatch);
    } else if let Some(why) = &r.comparison_absent {
        println!("comparison absent: {why}");
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, stage): (&Common, fn(&ExperimentPlan, bool) -> Result<RunManifest>) = match &cli.command {
        Command::Plan => {
            print!("{}", ExperimentPlan::default().to_toml()?);
            return Ok(());
        }
        Command::Simulate(c) => (c, pipeline::run_open_loop),
        Command::Fit(c) => (c, pipeline::run_fit),
        Command::Control(c) => (c, pipeline::run_closed_loop),
        Command::Evaluate(c) => (c, pipeline::run_evaluate),
        Command::All(c) => (c, pipeline::run_all),
    };
    let plan = common.plan()?;
    let manifest = stage(&plan, common.force)?;
    summarize(&manifest);
    println!("manifest: {}", plan.out_dir.join(pipeline::MANIFEST_FILE).display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
