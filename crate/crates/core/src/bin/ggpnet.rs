//! Batch frontend: simulate graphs, fit the model, predict held-out links,
//! run the asymptotics experiments, and summarize traces.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 numeric failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ggpnet::archive::{read_archive, write_archive, SampleRecord};
use ggpnet::asymptotics::{
    degree_ratio_experiment, nested_growth_experiment, overlap_cosine_experiment,
    write_json,
};
use ggpnet::config::RunConfig;
use ggpnet::diagnostics::{ess, mean, split_psrf};
use ggpnet::generative::{simulate_count_graph, GroundTruth};
use ggpnet::graph::ObservedGraph;
use ggpnet::inference::{run_mcmc, RetainedSample};
use ggpnet::postproc::predict_links;
use ggpnet::rng::stream;
use ggpnet::trace::{read_trace, write_trace, TraceRecord};
use ggpnet::{Error, Result};

#[derive(Parser)]
#[command(name = "ggpnet", version, about = "GGP Poisson factorization of networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a graph from the generative model
    Simulate(RunArgs),
    /// Run MCMC on an observed graph
    Fit(RunArgs),
    /// Posterior link probabilities for held-out entries
    Predict(RunArgs),
    /// Growth / degree-ratio / overlap experiments
    Asymptotics(RunArgs),
    /// Trace diagnostics: per-chain means, split-chain PSRF, ESS
    Summarize {
        /// trace CSV files, one per chain
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// report destination (stdout when absent)
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<u64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.mcmc.seed = seed;
        }
        if let Some(chains) = self.chains {
            cfg.mcmc.chains = chains;
        }
        if let Some(iterations) = self.iterations {
            cfg.mcmc.iterations = iterations;
        }
        if let Some(burn_in) = self.burn_in {
            cfg.mcmc.burn_in = burn_in;
        }
        if let Some(thin) = self.thin {
            cfg.mcmc.thin = thin;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() {
    let cli = Cli::parse();
    let status = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric { .. } | Error::SamplerRetries { .. } | Error::Invariant(_) => 3,
                _ => 2,
            }
        }
    };
    std::process::exit(status);
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(&args.load()?),
        Cmd::Fit(args) => cmd_fit(&args.load()?),
        Cmd::Predict(args) => cmd_predict(&args.load()?),
        Cmd::Asymptotics(args) => cmd_asymptotics(&args.load()?),
        Cmd::Summarize { traces, output } => cmd_summarize(&traces, output.as_deref()),
    }
}

fn required<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T> {
    field
        .as_ref()
        .ok_or_else(|| Error::Config(format!("{name} is required for this command")))
}

#[derive(Serialize)]
struct SimulationRecord {
    k_n: usize,
    truth: GroundTruth,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let theta = cfg.model.hyperparams()?;
    let q = Default::default();
    let mut rng = stream(cfg.mcmc.seed, 0);
    let (mut graph, truth) = simulate_count_graph(&mut rng, data.n, &theta, &q)?;
    if !data.directed {
        graph = graph.symmetrize();
    }
    if !data.weighted {
        graph = graph.binarize();
    }
    let edge_path = required(&cfg.output.edge_list_path, "output.edge_list_path")?;
    graph.write_edge_list(edge_path)?;
    if let Some(path) = &cfg.output.ground_truth_path {
        write_json(
            &SimulationRecord {
                k_n: truth.ensemble.len(),
                truth,
            },
            path,
        )?;
    }
    Ok(())
}

fn load_graph(cfg: &RunConfig) -> Result<ObservedGraph> {
    let data = required(&cfg.data, "data")?;
    let mut graph =
        ObservedGraph::read_edge_list(&data.path, data.n, data.directed, data.weighted)?;
    if let Some(mask) = &data.mask_path {
        graph.apply_mask_file(mask)?;
    }
    Ok(graph)
}

/// Insert a chain suffix before the file extension.
fn chain_path(path: &Path, chain: u64) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let name = match path.extension().and_then(|s| s.to_str()) {
        Some(ext) => format!("{stem}_chain{chain}.{ext}"),
        None => format!("{stem}_chain{chain}"),
    };
    path.with_file_name(name)
}

#[derive(Serialize)]
struct ParamSummary {
    mean: f64,
    q025: f64,
    q50: f64,
    q975: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize_values(mut values: Vec<f64>) -> ParamSummary {
    values.sort_by(f64::total_cmp);
    ParamSummary {
        mean: mean(&values),
        q025: quantile(&values, 0.025),
        q50: quantile(&values, 0.5),
        q975: quantile(&values, 0.975),
    }
}

const PARAM_NAMES: [&str; 5] = ["sigma0", "kappa", "tau", "alpha", "k_n"];

fn param_series(trace: &[TraceRecord], name: &str) -> Vec<f64> {
    trace
        .iter()
        .map(|r| match name {
            "sigma0" => r.sigma0,
            "kappa" => r.kappa,
            "tau" => r.tau,
            "alpha" => r.alpha,
            "k_n" => r.k_n as f64,
            _ => unreachable!(),
        })
        .collect()
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let graph = load_graph(cfg)?;
    let chains = run_mcmc(&graph, &cfg.model, &cfg.mcmc)?;
    let trace_path = required(&cfg.output.trace_path, "output.trace_path")?;
    for (c, chain) in chains.iter().enumerate() {
        write_trace(&chain.trace, &chain_path(trace_path, c as u64))?;
    }
    if let Some(path) = &cfg.output.samples_path {
        let mut records = Vec::new();
        for (c, chain) in chains.iter().enumerate() {
            for s in &chain.samples {
                records.push(SampleRecord::new(c as u64, s, cfg.output.sparse_top_k));
            }
        }
        write_archive(&records, path)?;
    }
    if let Some(path) = &cfg.output.summary_path {
        let mut summary: BTreeMap<&str, ParamSummary> = BTreeMap::new();
        for name in PARAM_NAMES {
            let pooled: Vec<f64> = chains
                .iter()
                .flat_map(|c| param_series(&c.trace, name))
                .collect();
            if !pooled.is_empty() {
                summary.insert(name, summarize_values(pooled));
            }
        }
        write_json(&summary, path)?;
    }
    Ok(())
}

fn cmd_predict(cfg: &RunConfig) -> Result<()> {
    let data = required(&cfg.data, "data")?;
    let graph = load_graph(cfg)?;
    let archive_path = required(&cfg.output.samples_path, "output.samples_path")?;
    let samples: Vec<RetainedSample> = read_archive(archive_path)?
        .iter()
        .map(|rec| {
            Ok(RetainedSample {
                iter: rec.iter,
                communities: rec.to_communities(data.n)?,
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<_> = graph.holdout().collect();
    let probs = predict_links(&samples, &pairs, graph.directed())?;
    let out_path = required(&cfg.output.predictions_path, "output.predictions_path")?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(out_path)?);
    use std::io::Write;
    writeln!(w, "i,j,probability")?;
    for (&(i, j), p) in pairs.iter().zip(&probs) {
        writeln!(w, "{i},{j},{p:.16e}")?;
    }
    Ok(())
}

fn cmd_asymptotics(cfg: &RunConfig) -> Result<()> {
    let asym = required(&cfg.asymptotics, "asymptotics")?;
    let theta = cfg.model.hyperparams()?;
    let report_path = required(&cfg.output.report_path, "output.report_path")?;
    let mut rng = stream(cfg.mcmc.seed, 0);
    let n_grid: Vec<usize> = asym.n_grid.iter().map(|&n| n as usize).collect();
    let n_last = *n_grid.last().ok_or_else(|| {
        Error::Config("asymptotics.n_grid must not be empty".into())
    })?;
    let replicates = asym.replicates as usize;
    match asym.experiment.as_deref().unwrap_or("growth") {
        "growth" => {
            let report = nested_growth_experiment(&theta, &n_grid, replicates, &mut rng)?;
            write_json(&report, report_path)?;
            report.write_csv(&report_path.with_extension("csv"))?;
        }
        "degree_ratio" => {
            let j_max = asym.j_max.unwrap_or(10) as usize;
            let table = degree_ratio_experiment(&theta, n_last, replicates, j_max, &mut rng)?;
            write_json(&table, report_path)?;
        }
        "overlap" => {
            let report = overlap_cosine_experiment(&theta, n_last, replicates, &mut rng)?;
            write_json(&report, report_path)?;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown asymptotics.experiment {other:?} \
                 (expected growth, degree_ratio, or overlap)"
            )));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TraceDiagnostics {
    per_chain_means: BTreeMap<&'static str, Vec<f64>>,
    split_psrf: BTreeMap<&'static str, f64>,
    ess: BTreeMap<&'static str, f64>,
}

fn cmd_summarize(traces: &[PathBuf], output: Option<&Path>) -> Result<()> {
    let chains: Vec<Vec<TraceRecord>> = traces
        .iter()
        .map(|p| read_trace(p))
        .collect::<Result<_>>()?;
    if chains.iter().any(|c| c.is_empty()) {
        return Err(Error::Config("empty trace file".into()));
    }
    let min_len = chains.iter().map(|c| c.len()).min().unwrap();
    let mut report = TraceDiagnostics {
        per_chain_means: BTreeMap::new(),
        split_psrf: BTreeMap::new(),
        ess: BTreeMap::new(),
    };
    for name in PARAM_NAMES {
        let series: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| param_series(&c[..min_len], name))
            .collect();
        report
            .per_chain_means
            .insert(name, series.iter().map(|s| mean(s)).collect());
        if min_len >= 4 {
            report.split_psrf.insert(name, split_psrf(&series)?);
        }
        report
            .ess
            .insert(name, series.iter().map(|s| ess(s)).sum());
    }
    match output {
        Some(path) => write_json(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}
