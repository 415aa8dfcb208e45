mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::{ConfigError, Suite};

#[derive(Parser)]
#[command(name = "css", version, about = "Experiments on inverse-square potentials singular on subspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// experiment configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// artifact directory (default: the config's "out", else ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// multiplies every check tolerance
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    Spectrum,
    Solve,
    Almgren,
    Asymptotics,
    Project,
    Verify {
        /// all, hardy or pohozaev; overrides the config
        #[arg(long)]
        suite: Option<Suite>,
    },
    BoundCheck,
    Report,
}

fn context(cli: &Cli) -> Result<Ctx> {
    let path = cli.config.as_ref().ok_or_else(|| ConfigError("--config is required".into()))?;
    let loaded = config::load(path)?;
    let tol = cli.tolerance_scale.or(loaded.config.tolerance_scale).unwrap_or(1.0);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ConfigError(format!("tolerance scale {tol} must be positive")).into());
    }
    let out = match (&cli.out, &loaded.config.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => loaded.base.join(o),
        (None, None) => PathBuf::from("out"),
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(Ctx::new(loaded, out, tol))
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let ctx = context(cli)?;
    let summary = match &cli.command {
        Command::Report => {
            let (pass, _) = commands::report(&ctx)?;
            println!("report: {}", if pass { "pass" } else { "FAIL" });
            return Ok(pass);
        }
        Command::Verify { suite } => commands::verify(&ctx, suite.unwrap_or(ctx.loaded.config.verify.suite))?,
        Command::Spectrum => commands::run(&ctx, "spectrum")?,
        Command::Solve => commands::run(&ctx, "solve")?,
        Command::Almgren => commands::run(&ctx, "almgren")?,
        Command::Asymptotics => commands::run(&ctx, "asymptotics")?,
        Command::Project => commands::run(&ctx, "project")?,
        Command::BoundCheck => commands::run(&ctx, "bound-check")?,
    };
    for c in &summary.checks {
        println!("{} {}: {}", summary.command, c.name, if c.pass { "pass" } else { "FAIL" });
    }
    Ok(summary.pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
