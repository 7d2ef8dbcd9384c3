use clap::{Parser, Subcommand};
use squintcal::sim::config::{ScenarioConfig, PRESETS, THREADS_ENV};
use squintcal::sim::curves::{aggregate, write_curves};
use squintcal::sim::experiment::{read_csv, run_experiment, write_csv};
use squintcal::sim::compression_ratio;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "squintcal", about = "Channel estimation with online array calibration")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a Monte Carlo sweep and write results.csv and manifest.json.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        #[arg(long, value_parser = PRESETS)]
        preset: Option<String>,
        /// Override the trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Check a config and print the resolved settings.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = PRESETS)]
        preset: Option<String>,
    },
    /// Average a results CSV into per-point curves.
    Curves {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> squintcal::Result<ScenarioConfig> {
    match (config, preset) {
        (Some(path), None) => ScenarioConfig::from_file(&path),
        (Some(path), Some(p)) => {
            let text = std::fs::read_to_string(path)?;
            let mut table: toml::Table = toml::from_str(&text)?;
            table.insert("preset".into(), toml::Value::String(p));
            ScenarioConfig::from_toml_str(&toml::to_string(&table).expect("table serializes"))
        }
        (None, p) => ScenarioConfig::preset(p.as_deref().unwrap_or("desk")),
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}

fn main() -> squintcal::Result<()> {
    env_logger::init();
    match Cli::parse().cmd {
        Cmd::Run { config, out, seed, threads, preset, trials } => {
            let mut cfg = load(config, preset)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            std::fs::create_dir_all(&out)?;
            let threads = threads.unwrap_or(0);
            let rows = run_experiment(&cfg, threads)?;
            write_csv(std::fs::File::create(out.join("results.csv"))?, &rows)?;
            let manifest = serde_json::json!({
                "config": cfg,
                "seed": cfg.seed,
                "threads": threads,
                "git": git_describe(),
                "rows": rows.len(),
            });
            squintcal::io::write_json(&out.join("manifest.json"), &manifest)?;
            write_curves(std::fs::File::create(out.join("curves.csv"))?, &aggregate(&rows))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Cmd::Validate { config, preset } => {
            let cfg = load(config, preset)?;
            cfg.validate()?;
            let link = cfg.system.link()?;
            let grid = cfg.algorithm.grid.unwrap_or_else(|| squintcal::ongrid::GridSpec::oversampled(&link));
            println!("{}", cfg.to_toml_string()?);
            println!("# compression ratio: {:.3}", compression_ratio(&cfg.system));
            println!("# dictionary atoms: {}", grid.n_atoms());
            for (name, geom, r) in [("bs", link.bs, cfg.algorithm.radii_bs), ("ue", link.ue, cfg.algorithm.radii_ue)] {
                let m = squintcal::coupling::CouplingModel::new(&geom, r)?;
                println!("# {name} coupling params: toeplitz {} + non-toeplitz {}", m.n_toeplitz(), m.n_non_toeplitz());
            }
        }
        Cmd::Curves { input, out } => {
            let rows = read_csv(std::fs::File::open(&input)?)?;
            let pts = aggregate(&rows);
            match out {
                Some(p) => write_curves(std::fs::File::create(p)?, &pts)?,
                None => write_curves(std::io::stdout().lock(), &pts)?,
            }
        }
    }
    Ok(())
}
