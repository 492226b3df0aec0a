//! Command line interface shared by the `asl` binary.

use std::ffi::OsString;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use super::compare::compare_theory;
use super::config::{ExperimentConfig, NetworkSpec, Overrides};
use super::experiment::run_experiment;
use super::verify::{run_all, run_suite, SUITES};
use crate::error::{Error, Result};
use crate::inverse::{default_grid, scan_delta, BeliefSeries};
use crate::learning::{Estimator, Strategy};
use crate::models::{cluster_informativeness, HOMOGENEITY_TOL};
use crate::sbm::{read_matrix_csv, read_network, sample_block_model, sample_sbm, write_combination_csv, write_network};
use crate::theory::{
    exact_recovery_infeasible, expected_rho, threshold_report, NetworkLaw, RhoKind, DEFAULT_TRUNCATION_TOL,
};

#[derive(Debug, Parser)]
#[command(name = "asl", version, about = "Adaptive social learning over stochastic block models")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Adaptive step size; replaces the configured strategy and sweep.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Condition every replicate on one graph draw.
    #[arg(long, global = true)]
    pub fixed_graph: bool,
    #[arg(long, global = true, value_enum)]
    pub estimator: Option<Estimator>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Private,
    Public,
}

impl From<KindArg> for RhoKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Private => RhoKind::Private,
            KindArg::Public => RhoKind::Public,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TraceFormat {
    /// `iter,agent,cluster,log_ratio,...` as written by `simulate`.
    Trace,
    /// `step,agent,log_ratio`, possibly sparse.
    Generic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a network from the configured block model.
    Generate,
    /// Run the configured Monte Carlo experiment.
    Simulate {
        /// Extra tolerance added to the 3 standard error band of the
        /// theory comparison.
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
    },
    /// Step-size thresholds for the configured two-block network.
    Thresholds {
        /// Apply the symmetric formula even to asymmetric parameters.
        #[arg(long)]
        force_symmetric: bool,
    },
    /// Expected steady-state log-belief ratios.
    Predict {
        #[arg(long, value_enum, default_value = "private")]
        kind: KindArg,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_TOL)]
        tol: f64,
    },
    /// Estimate the step size behind a recorded trace.
    FitDelta {
        /// Trace CSV.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value = "trace")]
        format: TraceFormat,
        /// Network file giving the combination matrix.
        #[arg(long, conflicts_with = "combination")]
        network: Option<PathBuf>,
        /// Combination matrix CSV.
        #[arg(long)]
        combination: Option<PathBuf>,
        /// First validation step; defaults to half the trace.
        #[arg(long)]
        split: Option<usize>,
        /// Comma-separated step sizes; defaults to 0.025, 0.05, ..., 0.975.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Also score traditional learning.
        #[arg(long)]
        traditional: bool,
    },
    /// Run the built-in property and oracle suites.
    Verify {
        /// Run only these suites.
        #[arg(long, value_delimiter = ',')]
        suite: Option<Vec<String>>,
    },
}

/// Files written by one invocation, recorded in `manifest.json`.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s)
    }

    fn with<F: FnOnce(&mut Vec<u8>) -> Result<()>>(&mut self, name: &str, f: F) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, buf)
    }

    fn finish(mut self, command: &str, extra: Value) -> Result<()> {
        let mut files = std::mem::take(&mut self.files);
        files.push("manifest.json".into());
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "files": files,
            "details": extra,
        });
        self.json("manifest.json", &manifest)
    }
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            replicates: self.replicates,
            delta: self.delta,
            fixed_graph: self.fixed_graph,
            estimator: self.estimator,
        }
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("this subcommand needs --config".into()))?;
        let mut cfg = ExperimentConfig::load(path)?;
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&ExperimentConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.map(|c| c.output.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn network_law(cfg: &ExperimentConfig) -> Result<NetworkLaw> {
    Ok(match &cfg.network {
        NetworkSpec::Sbm(p) => NetworkLaw::Sbm(*p),
        NetworkSpec::Blocks(m) => NetworkLaw::Blocks(m.clone()),
        NetworkSpec::File { .. } => NetworkLaw::Explicit(cfg.load_network_file()?.combination),
    })
}

fn strategy_dir(s: Strategy) -> String {
    match s {
        Strategy::Traditional => "traditional".into(),
        Strategy::Asl { delta } => format!("delta_{delta}"),
    }
}

fn generate(common: &Common, out: &mut Output) -> Result<Value> {
    let cfg = common.load()?;
    let seed = cfg.run.seed;
    let net = match &cfg.network {
        NetworkSpec::Sbm(p) => sample_sbm(p, seed, true, cfg.run.max_retries)?,
        NetworkSpec::Blocks(m) => sample_block_model(m, seed, true, cfg.run.max_retries)?,
        NetworkSpec::File { .. } => return Err(Error::Config("generate needs a block-model network".into())),
    };
    out.with("network.txt", |w| write_network(&net, w))?;
    out.with("combination.csv", |w| write_combination_csv(&net.combination, w))?;
    println!("{} agents, {} draw(s)", net.size(), net.draws);
    Ok(json!({ "seed": seed, "draws": net.draws, "sizes": net.sizes, "network": cfg.network }))
}

fn simulate(common: &Common, slack: f64, out: &mut Output) -> Result<Value> {
    let cfg = common.load()?;
    let strategies = cfg.strategies()?;
    let sweep = strategies.len() > 1;
    let mut runs = Vec::new();
    for s in strategies {
        let report = run_experiment(&cfg, s)?;
        let prefix = if sweep { format!("{}/", strategy_dir(s)) } else { String::new() };
        out.json(&format!("{prefix}summary.json"), &report.summary)?;
        out.write(&format!("{prefix}error_report.csv"), report.summary.errors.to_csv())?;
        out.write(&format!("{prefix}curves.csv"), report.curves_csv())?;
        let mut comparison = None;
        if let Strategy::Asl { delta } = s {
            if !report.summary.steady_state.is_empty() {
                let pred = expected_rho(
                    &network_law(&cfg)?,
                    &cfg.profile(&report.clusters)?,
                    delta,
                    cfg.run.pair,
                    DEFAULT_TRUNCATION_TOL,
                    RhoKind::Private,
                )?;
                let cmp = compare_theory(&report, &pred, slack)?;
                out.write(&format!("{prefix}theory_comparison.csv"), cmp.to_csv())?;
                comparison = Some(cmp);
            }
        }
        for (r, t) in report.traces.iter().enumerate() {
            out.with(&format!("{prefix}trace_{r}.csv"), |w| t.write_csv(w))?;
            out.with(&format!("{prefix}trace_{r}.json"), |w| t.write_meta(w))?;
        }
        println!(
            "{s}: {}/{} replicates, steady state {}",
            report.summary.completed,
            report.summary.replicates,
            report
                .summary
                .steady_state
                .iter()
                .map(|c| format!("c{}={:+.4}", c.cluster, c.mean_private))
                .collect::<Vec<_>>()
                .join(" ")
        );
        runs.push(json!({
            "strategy": s,
            "completed": report.summary.completed,
            "failures": report.summary.failures,
            "flagged": comparison.as_ref().map(|c| c.any_flagged()),
        }));
    }
    let mut config = serde_json::to_value(&cfg)?;
    if let Some(o) = config.as_object_mut() {
        o.remove("output");
    }
    Ok(json!({ "config": config, "runs": runs }))
}

fn thresholds(common: &Common, force_symmetric: bool, out: &mut Output) -> Result<Value> {
    let cfg = common.load()?;
    let NetworkSpec::Sbm(params) = &cfg.network else {
        return Err(Error::Config("thresholds need a two-block `sbm` network".into()));
    };
    let sizes = [params.n0, params.n1];
    let clusters: Vec<usize> = (0..params.n0 + params.n1).map(|k| usize::from(k >= params.n0)).collect();
    let profile = cfg.profile(&clusters)?;
    let info = cluster_informativeness(&profile, &clusters, HOMOGENEITY_TOL)?;
    let (Some(d0), Some(d1)) = (info.d0, info.d1) else {
        return Err(Error::PreconditionFailed("informativeness needs two clusters and hypotheses".into()));
    };
    let report = threshold_report(params, d0, d1, force_symmetric)?;
    let recovery = if params.is_symmetric() {
        Some(exact_recovery_infeasible(sizes[0], params.p0, params.q0)?)
    } else {
        None
    };
    let delta_min = report.symmetric.or(report.asymmetric.as_ref().map(|a| a.delta0));
    out.json(
        "thresholds.json",
        &json!({
            "report": report,
            "delta_min": delta_min,
            "homogeneous": info.homogeneous,
            "exact_recovery": recovery,
        }),
    )?;
    match delta_min {
        Some(d) => println!("delta_min = {d:.4}"),
        None => println!(
            "no threshold: {}",
            report.precondition.clone().or(report.symmetric_error.clone()).unwrap_or_default()
        ),
    }
    Ok(json!({ "params": params, "d0": d0, "d1": d1 }))
}

fn predict(common: &Common, kind: KindArg, tol: f64, out: &mut Output) -> Result<Value> {
    let cfg = common.load()?;
    let sizes = cfg.sizes()?;
    let clusters: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    let profile = cfg.profile(&clusters)?;
    let law = network_law(&cfg)?;
    let mut rows = String::from("delta,agent,cluster,rho\n");
    let mut preds = Vec::new();
    for s in cfg.strategies()? {
        let Strategy::Asl { delta } = s else {
            return Err(Error::Config("predictions need an adaptive strategy".into()));
        };
        let pred = expected_rho(&law, &profile, delta, cfg.run.pair, tol, kind.into())?;
        for (k, v) in pred.values.iter().enumerate() {
            rows.push_str(&format!("{delta},{k},{},{v:.17e}\n", clusters[k]));
        }
        let means: Vec<f64> = (0..sizes.len())
            .filter_map(|c| pred.cluster_mean(&clusters, c))
            .collect();
        println!(
            "delta = {delta}: {}",
            means.iter().enumerate().map(|(c, m)| format!("c{c}={m:+.4}")).collect::<Vec<_>>().join(" ")
        );
        preds.push(json!({ "prediction": pred, "cluster_means": means }));
    }
    out.json("prediction.json", &preds)?;
    out.write("prediction.csv", rows)?;
    Ok(json!({ "network": cfg.network }))
}

#[allow(clippy::too_many_arguments)]
fn fit_delta(
    trace: &Path,
    format: TraceFormat,
    network: Option<&Path>,
    combination: Option<&Path>,
    split: Option<usize>,
    grid: Option<Vec<f64>>,
    traditional: bool,
    out: &mut Output,
) -> Result<Value> {
    let open = |p: &Path| -> Result<BufReader<fs::File>> {
        Ok(BufReader::new(
            fs::File::open(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        ))
    };
    let a = match (network, combination) {
        (Some(n), _) => read_network(open(n)?)?.combination,
        (None, Some(c)) => read_matrix_csv(open(c)?)?,
        (None, None) => return Err(Error::Config("fit-delta needs --network or --combination".into())),
    };
    let series = match format {
        TraceFormat::Trace => BeliefSeries::read_trace(open(trace)?, split)?,
        TraceFormat::Generic => BeliefSeries::read_generic_csv(open(trace)?, split)?,
    };
    let grid = grid.unwrap_or_else(default_grid);
    let scan = scan_delta(&series, &a, &grid, traditional)?;
    out.write("scan.csv", scan.to_csv())?;
    out.json("scan.json", &scan)?;
    println!("delta = {} (fit error {:.6e})", scan.argmin, scan.min_error);
    Ok(json!({
        "trace": trace,
        "steps": series.steps(),
        "split": series.split(),
        "argmin": scan.argmin,
    }))
}

fn verify(suite: Option<Vec<String>>, out: &mut Output) -> Result<Value> {
    let results = match suite {
        None => run_all(),
        Some(names) => names
            .iter()
            .map(|n| {
                run_suite(n).ok_or_else(|| {
                    Error::Config(format!("unknown suite `{n}` (available: {})", SUITES.join(", ")))
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    out.json("verify.json", &results)?;
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        return Err(Error::PreconditionFailed(format!("failed suites: {}", failed.join(", "))));
    }
    Ok(json!({ "suites": results.len() }))
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    let cfg_dir = match &cli.command {
        Command::Generate | Command::Simulate { .. } | Command::Thresholds { .. } | Command::Predict { .. } => {
            Some(common.load()?)
        }
        _ => None,
    };
    let mut out = Output::new(common.out_dir(cfg_dir.as_ref()))?;
    let (name, details) = match &cli.command {
        Command::Generate => ("generate", generate(common, &mut out)),
        Command::Simulate { slack } => ("simulate", simulate(common, *slack, &mut out)),
        Command::Thresholds { force_symmetric } => ("thresholds", thresholds(common, *force_symmetric, &mut out)),
        Command::Predict { kind, tol } => ("predict", predict(common, *kind, *tol, &mut out)),
        Command::FitDelta {
            trace,
            format,
            network,
            combination,
            split,
            grid,
            traditional,
        } => (
            "fit-delta",
            fit_delta(
                trace,
                *format,
                network.as_deref(),
                combination.as_deref(),
                *split,
                grid.clone(),
                *traditional,
                &mut out,
            ),
        ),
        Command::Verify { suite } => ("verify", verify(suite.clone(), &mut out)),
    };
    match details {
        Ok(d) => out.finish(name, d),
        Err(e) => {
            out.finish(name, json!({ "error": error_json(&e) }))?;
            Err(e)
        }
    }
}

pub fn error_json(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures are reported on stderr as `{"error": {"kind", "message"}}`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let mut err = std::io::stderr().lock();
            let _ = writeln!(err, "{}", json!({ "error": error_json(&e) }));
            1
        }
    }
}
