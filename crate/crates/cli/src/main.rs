use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ubssd::datagen::make_scene;
use ubssd::harness::{self, parse_methods, CellKey, ExperimentConfig, SweepOptions};
use ubssd::metrics::format_percent;
use ubssd::pipelines::Method;
use ubssd::{FirFilter, TimeSeries};

#[derive(Parser)]
#[command(name = "ubssd", version, about = "Undercomplete blind subspace deconvolution benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment description (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CellArgs {
    /// Sample size; defaults to the first of the config.
    #[arg(long)]
    t: Option<usize>,
    /// Filter degree; defaults to the first of the config.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed_index: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one scene and cache sources, observation and mixing filter.
    Gen {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Run the configured methods on a single cell (or a cached observation).
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        cell: CellArgs,
        /// Comma-separated subset of lpa,tcc.
        #[arg(long)]
        methods: Option<String>,
        /// Binary observation from `gen` instead of a fresh scene.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Mixing filter (JSON from `gen`) to evaluate `--input` against.
        #[arg(long, requires = "input")]
        mixing: Option<PathBuf>,
    },
    /// Run every (T, L, seed) cell and write the CSV/plot summaries.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Number of seeds per (T, L).
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        methods: Option<String>,
        /// Keep cells that are already on disk.
        #[arg(long)]
        resume: bool,
    },
    /// Rebuild the summaries from the cell files on disk.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> ubssd::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn cell_key(cfg: &ExperimentConfig, cell: &CellArgs) -> CellKey {
    CellKey {
        t: cell.t.unwrap_or_else(|| cfg.sample_sizes()[0]),
        l: cell.l.unwrap_or(cfg.l[0]),
        seed_index: cell.seed_index,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> ubssd::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn gen(common: &Common, cell: &CellArgs) -> ubssd::Result<ExitCode> {
    let cfg = load_config(common)?;
    let key = cell_key(&cfg, cell);
    let seed = key.seed(cfg.master_seed);
    let scene = make_scene(&cfg.database, &cfg.dims(key.l, key.t)?, seed)?;
    std::fs::create_dir_all(&cfg.output)?;
    scene.observation.write_binary(cfg.output.join("observation.bssd"))?;
    scene.sources.write_binary(cfg.output.join("sources.bssd"))?;
    write_json(&cfg.output.join("mixing.json"), &scene.mixing)?;
    let meta = serde_json::json!({
        "cell": key,
        "seed": seed,
        "dims": scene.dims,
        "digest": scene.digest(),
    });
    write_json(&cfg.output.join("scene.json"), &meta)?;
    println!("{}", scene.digest());
    Ok(ExitCode::SUCCESS)
}

fn run(
    common: &Common,
    cell: &CellArgs,
    methods: Option<&str>,
    input: Option<&Path>,
    mixing: Option<&Path>,
) -> ubssd::Result<ExitCode> {
    let cfg = load_config(common)?;
    let methods: Vec<Method> = match methods {
        Some(list) => parse_methods(list)?,
        None => cfg.methods.clone(),
    };
    let key = cell_key(&cfg, cell);
    let seed = key.seed(cfg.master_seed);
    let (observation, truth, dims) = match input {
        Some(path) => {
            let x = TimeSeries::read_binary(path)?;
            let truth: Option<FirFilter> = match mixing {
                Some(p) => Some(serde_json::from_str(&std::fs::read_to_string(p)?)?),
                None => None,
            };
            let l = truth.as_ref().map_or(key.l, |h| h.degree());
            let mut dims = cfg.dims(l, x.len())?;
            dims.dx = x.dim();
            (x, truth, dims)
        }
        None => {
            let scene = make_scene(&cfg.database, &cfg.dims(key.l, key.t)?, seed)?;
            (scene.observation.clone(), Some(scene.mixing.clone()), scene.dims)
        }
    };
    std::fs::create_dir_all(&cfg.output)?;
    let mut failed = false;
    for method in methods {
        match method.run(&observation, &dims, seed, truth.as_ref()) {
            Ok(res) => {
                let r = res.amari.map_or("-".into(), format_percent);
                println!("{method}: Amari index {r}% in {:.2}s", res.total_seconds());
                let name = format!("run_{}.json", method.as_str().to_lowercase());
                write_json(&cfg.output.join(name), &res.summary())?;
                res.estimates
                    .write_binary(cfg.output.join(format!("estimates_{}.bssd", method.as_str().to_lowercase())))?;
            }
            Err(e) => {
                eprintln!("{method}: {e}");
                failed = true;
            }
        }
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn sweep(common: &Common, seeds: Option<usize>, methods: Option<&str>, resume: bool) -> ubssd::Result<ExitCode> {
    let mut cfg = load_config(common)?;
    if let Some(n) = seeds {
        cfg.seeds = n;
    }
    if let Some(list) = methods {
        cfg.methods = parse_methods(list)?;
    }
    let out = harness::run_sweep(&cfg, SweepOptions { resume })?;
    print!("{}", std::fs::read_to_string(&out.csv_path)?);
    if out.reused > 0 {
        eprintln!("reused {} finished cells", out.reused);
    }
    if out.failures > 0 {
        eprintln!("{} run(s) failed; see {}", out.failures, cfg.output.join(harness::CELLS_DIR).display());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn report(common: &Common) -> ubssd::Result<ExitCode> {
    let mut cfg = load_config(common)?;
    // the sweep echoes its effective configuration (after command-line
    // overrides) next to its results
    let echo = cfg.output.join(harness::CONFIG_ECHO_FILE);
    if echo.exists() {
        let output = cfg.output.clone();
        cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(echo)?)?;
        cfg.output = output;
    }
    harness::report_from_disk(&cfg)?;
    print!("{}", std::fs::read_to_string(cfg.output.join(harness::CSV_FILE))?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen { common, cell } => gen(common, cell),
        Command::Run { common, cell, methods, input, mixing } => {
            run(common, cell, methods.as_deref(), input.as_deref(), mixing.as_deref())
        }
        Command::Sweep { common, seeds, methods, resume } => sweep(common, *seeds, methods.as_deref(), *resume),
        Command::Report { common } => report(common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
