use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use mlfair::audit::{AuditMode, Auditor};
use mlfair::counterfactual::{CounterfactualConfig, NoiseSource};
use mlfair::experiments::{
    emit_results, run_adult_study, run_synthetic_study, seed_from_env, AdultStudyConfig, SyntheticStudyConfig,
};
use mlfair::graph::{parse_graph_spec, CausalGraph};
use mlfair::pse::{compute_pse_linear, mc_counterfactual_oracle_with, OracleOptions, PseQuery};
use mlfair::sem::{fit_params_report, sample_dataset_with, Dataset, ParamSet, RootConfig, SemModel};
use mlfair::ExecPolicy;

#[derive(Parser)]
#[command(
    name = "mlfair",
    version,
    about = "Multi-level path-specific counterfactual fairness"
)]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Retrained,
    SharedModel,
}

impl From<Mode> for AuditMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Retrained => AuditMode::Retrained,
            Mode::SharedModel => AuditMode::SharedModel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic multi-level study.
    Simulate {
        /// JSON study config; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adult income study.
    Adult {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON study config (data path is taken from --data).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit every structural equation and write the parameters.
    Fit {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form path-specific effect, optionally checked by simulation.
    Pse {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Monte-Carlo replicates for the oracle (0 = skip).
        #[arg(long, default_value_t = 0)]
        oracle: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Residual unfairness and accuracy over a β grid.
    Audit {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        cf: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        beta_grid: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Parameters to use instead of fitting on --data.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Noise record matching --data, for recorded-noise counterfactuals.
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "retrained")]
        mode: Mode,
    },
    /// Sample a dataset (with its noise record) from a parameterised graph.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        params: PathBuf,
        /// JSON map of root distributions; implied by the parameters if absent.
        #[arg(long)]
        roots: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        noise_out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_graph(path: &Path) -> Result<CausalGraph> {
    parse_graph_spec(&read(path)?).with_context(|| format!("graph {}", path.display()))
}

fn load_data(path: &Path, graph: &CausalGraph) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Dataset::read_csv(BufReader::new(f), Some(graph)).with_context(|| format!("data {}", path.display()))
}

fn load_model(graph: CausalGraph, params: &Path) -> Result<SemModel> {
    let ps = ParamSet::from_json(&read(params)?).with_context(|| format!("params {}", params.display()))?;
    Ok(SemModel::new(graph, ps)?)
}

fn fit(graph: &CausalGraph, data: &Dataset, policy: ExecPolicy) -> Result<SemModel> {
    let report = fit_params_report(graph, data, policy)?;
    for w in &report.params.warnings {
        log::warn!("{w}");
    }
    Ok(SemModel::new(graph.clone(), report.params)?)
}

fn run(cli: Cli) -> Result<()> {
    let policy = if cli.sequential {
        ExecPolicy::Sequential
    } else {
        ExecPolicy::Parallel
    };
    match cli.command {
        Command::Simulate { config, out } => {
            let mut cfg = match config {
                Some(p) => SyntheticStudyConfig::from_json(&read(&p)?)?,
                None => SyntheticStudyConfig::default(),
            };
            if let Some(seed) = seed_from_env()? {
                cfg.master_seed = seed;
            }
            let study = run_synthetic_study(&cfg, policy)?;
            for f in &study.failures {
                log::warn!("run {} failed: {}", f.run, f.error);
            }
            for p in emit_results(&study.output(), &out)? {
                println!("{}", p.display());
            }
        }
        Command::Adult { data, out, config } => {
            let mut cfg = match config {
                Some(p) => serde_json::from_str(&read(&p)?).context("adult config")?,
                None => AdultStudyConfig::default(),
            };
            cfg.data_path = data;
            if let Some(seed) = seed_from_env()? {
                cfg.seed = seed;
            }
            let study = run_adult_study(&cfg, policy)?;
            for p in emit_results(&study.output(), &out)? {
                println!("{}", p.display());
            }
        }
        Command::Fit { graph, data, out } => {
            let g = load_graph(&graph)?;
            let ds = load_data(&data, &g)?;
            let model = fit(&g, &ds, policy)?;
            fs::write(&out, model.params().to_json() + "\n")?;
        }
        Command::Pse {
            graph,
            params,
            query,
            oracle,
            seed,
        } => {
            let model = load_model(load_graph(&graph)?, &params)?;
            let q = PseQuery::from_json(&read(&query)?)?;
            let r = compute_pse_linear(&model, &q)?;
            let mut out = serde_json::to_value(&r)?;
            if let Some(or) = r.odds_ratio() {
                out["odds_ratio"] = or.into();
            }
            if oracle > 0 {
                let est = mc_counterfactual_oracle_with(
                    &model,
                    &q,
                    oracle,
                    seed,
                    OracleOptions {
                        policy,
                        ..Default::default()
                    },
                )?;
                out["oracle"] = serde_json::json!({
                    "estimate": est.estimate,
                    "standard_error": est.standard_error,
                    "replicates": est.replicates,
                });
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Audit {
            graph,
            data,
            query,
            cf,
            beta_grid,
            out,
            params,
            noise,
            mode,
        } => {
            if beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
                bail!("beta grid must lie in [0, 1]");
            }
            let g = load_graph(&graph)?;
            let mut ds = load_data(&data, &g)?;
            if let Some(n) = noise {
                ds.read_noise_csv(BufReader::new(File::open(&n)?))?;
            }
            let model = match params {
                Some(p) => load_model(g.clone(), &p)?,
                None => fit(&g, &ds, policy)?,
            };
            let q = PseQuery::from_json(&read(&query)?)?;
            let cf_cfg = CounterfactualConfig::from_json(&read(&cf)?)?;
            if cf_cfg.noise_source == NoiseSource::Recorded && !ds.has_noise() {
                bail!("counterfactual config asks for recorded noise but no --noise file was given");
            }
            let report = Auditor::new(&model, &ds, &cf_cfg, policy)?.sweep(&model, &q, &beta_grid, mode.into())?;
            report.write_csv(BufWriter::new(File::create(&out)?))?;
        }
        Command::Sample {
            graph,
            params,
            roots,
            n,
            seed,
            out,
            noise_out,
        } => {
            let model = load_model(load_graph(&graph)?, &params)?;
            let roots: RootConfig = match roots {
                Some(p) => serde_json::from_str(&read(&p)?).context("roots")?,
                None => model.implied_roots(),
            };
            let seed = seed_from_env()?.unwrap_or(seed);
            let ds = sample_dataset_with(&model, n, seed, &roots, policy)?;
            ds.write_csv(BufWriter::new(File::create(&out)?))?;
            if let Some(p) = noise_out {
                ds.write_noise_csv(BufWriter::new(File::create(&p)?))?;
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
