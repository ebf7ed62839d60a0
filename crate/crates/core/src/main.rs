use clap::{Parser, Subcommand};
use rvehom::config::RunConfig;
use rvehom::driver;
use rvehom::Result;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "rvehom", version, about = "RVE computational homogenisation for fibre composites")]
struct Cli {
    /// Validate a mesh-model file, print its statistics, write nothing.
    #[arg(long, value_name = "FILE", global = true)]
    check_mesh: Option<PathBuf>,
    /// Worker threads for sweeps (overrides the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Layout generator seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the configured load program; write curve, fields, manifest.
    Run { config: PathBuf },
    /// Run one variant per value of a swept scalar and merge the curves.
    Sweep {
        config: PathBuf,
        /// Dotted config path of the swept scalar, e.g. `cohesive.ft`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; `inf` is accepted for strengths.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Generate the fibre layout and mesh only.
    Gen { config: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            driver::exit_code(&e)
        }
    });
}

fn load(path: &Path, seed: Option<u64>) -> Result<(RunConfig, PathBuf)> {
    let (mut cfg, base) = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok((cfg, base))
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(path) = &cli.check_mesh {
        print!("{}", driver::check_mesh(path)?);
        return Ok(0);
    }
    let Some(cmd) = cli.cmd else {
        return Err(rvehom::Error::Config(
            "no command given; try `run`, `sweep`, `gen`, or `--check-mesh` (see --help)".into(),
        ));
    };
    match cmd {
        Cmd::Run { config } => {
            let (cfg, base) = load(&config, cli.seed)?;
            let s = driver::run(&cfg, &base)?;
            println!("{} steps solved; outputs in {}", s.records.len(), s.out_dir.display());
            Ok(0)
        }
        Cmd::Gen { config } => {
            let (cfg, base) = load(&config, cli.seed)?;
            let s = driver::generate_only(&cfg, &base)?;
            println!("mesh written to {}", s.out_dir.display());
            Ok(0)
        }
        Cmd::Sweep { config, axis, values } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                rvehom::Error::Config(format!("cannot read {}: {e}", config.display()))
            })?;
            let base = config.parent().unwrap_or(Path::new(".")).to_path_buf();
            let threads = match cli.threads {
                Some(t) => t,
                None => RunConfig::parse(&text)?.threads,
            };
            let s = driver::sweep(&text, &base, &axis, &values, threads, cli.seed)?;
            for v in &s.variants {
                match &v.result {
                    Ok(r) => println!("{axis} = {}: ok ({} steps)", v.value, r.len()),
                    Err(e) => println!("{axis} = {}: FAILED: {e}", v.value),
                }
            }
            println!("merged curve: {}", s.merged_csv.display());
            Ok(s.first_failure.unwrap_or(0))
        }
    }
}
