use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use invitesim::experiment::{
    self, preset, presets, run_acceptance, AcceptanceSettings, ExperimentConfig, OutputKind, SUITES,
};

#[derive(Debug, Parser)]
#[command(name = "invitesim", version, about = "Invitation queue simulator, fluid and diffusion limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// JSON config file; defaults to the matching compiled-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; `out` for runs. Acceptance reports are written only when given.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for replications; all cores when omitted.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the CTMC and write its trajectory.
    Simulate(Common),
    /// Solve the fluid model from each initial state.
    Fluid(Common),
    /// Moment equations and an SDE sample path.
    Diffusion(Common),
    /// Long-run batch-means estimates.
    Stationary(Common),
    /// Simulation against the fluid limit.
    Compare(Common),
    /// Deviation from the fluid limit across scales.
    Sweep(Common),
    /// Run a compiled-in preset, or print it.
    Preset {
        /// Preset name.
        name: Option<String>,
        /// Print the preset config as JSON instead of running it.
        #[arg(long)]
        export: bool,
        /// List preset names.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run an acceptance suite, or `all`.
    Acceptance {
        suite: String,
        #[command(flatten)]
        common: Common,
    },
}

fn default_preset(kinds: &[OutputKind]) -> &'static str {
    match kinds {
        [OutputKind::DiffusionMoments] => "diffusion",
        [OutputKind::Stationary] => "stationary",
        [OutputKind::Sweep] => "sweep",
        _ => "fig2a",
    }
}

fn load(common: &Common, kinds: &[OutputKind]) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => preset(default_preset(kinds))?,
    };
    cfg.outputs = kinds.to_vec();
    Ok(cfg)
}

fn execute(mut cfg: ExperimentConfig, common: &Common) -> Result<ExitCode> {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let manifest = experiment::run(&cfg, &out, common.workers)?;
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    println!("{}", out.join("manifest.json").display());
    for f in &manifest.files {
        println!("  {} {} {}", f.sha256, f.bytes, f.path);
    }
    Ok(ExitCode::SUCCESS)
}

fn acceptance(suite: &str, common: &Common) -> Result<ExitCode> {
    let mut settings = AcceptanceSettings {
        workers: common.workers,
        ..AcceptanceSettings::default()
    };
    if let Some(seed) = common.seed {
        settings.seed = seed;
    }
    if suite != "all" && !SUITES.contains(&suite) {
        bail!("unknown acceptance suite '{suite}' (expected one of: all, {})", SUITES.join(", "));
    }
    let summary = run_acceptance(suite, &settings)?;
    let text = serde_json::to_string_pretty(&summary)?;
    if common.config.is_some() {
        log::warn!("--config is ignored by acceptance suites");
    }
    if let Some(out) = &common.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(format!("acceptance_{suite}.json"));
        std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{text}");
    for s in &summary.suites {
        for c in &s.criteria {
            eprintln!("{}", c.summary_line());
        }
    }
    Ok(acceptance_exit(summary.pass))
}

fn acceptance_exit(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    use OutputKind::*;
    let (kinds, common) = match cli.command {
        Command::Simulate(c) => (vec![Trajectory], c),
        Command::Fluid(c) => (vec![Fluid], c),
        Command::Diffusion(c) => (vec![DiffusionMoments], c),
        Command::Stationary(c) => (vec![Stationary], c),
        Command::Compare(c) => (vec![Trajectory, Fluid, Compare], c),
        Command::Sweep(c) => (vec![Sweep], c),
        Command::Preset {
            name,
            export,
            list,
            common,
        } => {
            if list {
                for p in presets() {
                    println!("{}", p.name);
                }
                return Ok(ExitCode::SUCCESS);
            }
            let Some(name) = name else {
                bail!("preset name required (use --list to see them)");
            };
            let cfg = preset(&name)?;
            if export {
                println!("{}", cfg.to_json());
                return Ok(ExitCode::SUCCESS);
            }
            return execute(cfg, &common);
        }
        Command::Acceptance { suite, common } => return acceptance(&suite, &common),
    };
    execute(load(&common, &kinds)?, &common)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
