use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use shadowseg_core::{load_config, ConfigError, PipelineConfig};

#[derive(Debug, Parser)]
#[command(name = "shadowseg", version, about = "Segment images from per-light shadow masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline and write a project directory.
    Run(RunArgs),
    /// Start the HTTP service for interactive refinement.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Directory holding one mask image per light, named `<id>.<ext>`.
    pub mask_dir: PathBuf,
    /// Lights file listing `<id> directional x y z` or `<id> point u v`.
    #[arg(long)]
    pub lights: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub params: ParamFlags,
    /// Run every stage on the current thread.
    #[arg(long)]
    pub sequential: bool,
}

/// Per-key overrides; a flag beats the config file, which beats the default.
#[derive(Debug, Default, Args)]
pub struct ParamFlags {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub t_low: Option<f64>,
    #[arg(long)]
    pub t_high: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub a_min: Option<f64>,
    #[arg(long)]
    pub omega_cos_min: Option<f64>,
    #[arg(long)]
    pub shadow_reject_frac: Option<f64>,
    #[arg(long)]
    pub prune_alpha: Option<f64>,
    #[arg(long)]
    pub foreground_mask: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Project directory written by `shadowseg run`, loaded at startup.
    #[arg(long)]
    pub project: Option<PathBuf>,
    /// Port to bind; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory served at `/` instead of the bundled page.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

/// Builds the effective config: defaults, then the config file, then flags.
pub fn resolve_config(config: Option<&Path>, flags: &ParamFlags, cwd: &Path) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    let numbers = [
        ("beta", flags.beta),
        ("t_low", flags.t_low),
        ("t_high", flags.t_high),
        ("kappa", flags.kappa),
        ("a_min", flags.a_min),
        ("omega_cos_min", flags.omega_cos_min),
        ("shadow_reject_frac", flags.shadow_reject_frac),
        ("prune_alpha", flags.prune_alpha),
    ];
    for (key, value) in numbers {
        if let Some(v) = value {
            cfg.set(key, &v.to_string(), cwd)?;
        }
    }
    if let Some(path) = &flags.foreground_mask {
        cfg.set("foreground_mask", &path.to_string_lossy(), cwd)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        std::fs::write(&path, "kappa = 0.5\nbeta = 2\n").unwrap();
        let flags = ParamFlags {
            kappa: Some(1.5),
            ..ParamFlags::default()
        };
        let cfg = resolve_config(Some(&path), &flags, dir.path()).unwrap();
        assert_eq!(cfg.kappa, 1.5);
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.a_min, PipelineConfig::default().a_min);
    }

    #[test]
    fn flag_values_are_validated() {
        let flags = ParamFlags {
            t_low: Some(0.9),
            ..ParamFlags::default()
        };
        assert!(resolve_config(None, &flags, Path::new(".")).is_err());
    }

    #[test]
    fn parses_run_and_serve() {
        let cli = Cli::try_parse_from([
            "shadowseg",
            "run",
            "masks",
            "--lights",
            "l.txt",
            "-o",
            "out",
            "--t-low",
            "0.2",
        ])
        .unwrap();
        match cli.command {
            Command::Run(r) => {
                assert_eq!(r.params.t_low, Some(0.2));
                assert_eq!(r.mask_dir, PathBuf::from("masks"));
            }
            _ => panic!("expected run"),
        }
        let cli = Cli::try_parse_from(["shadowseg", "serve", "--port", "0"]).unwrap();
        assert!(matches!(cli.command, Command::Serve(ServeArgs { port: 0, .. })));
    }
}
