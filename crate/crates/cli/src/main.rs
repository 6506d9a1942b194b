use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use causal_copula::harness::{
    export_lp, import_external, run_analysis, run_simulation, EffectPreset, SimulationConfig, SimulationReport,
};
use causal_copula::solver::SolverKind;

#[derive(Parser)]
#[command(name = "causal-copula", version, about = "Design-based confidence intervals via the least-favorable copula")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Re-randomize a fixed population and tabulate coverage, power and widths.
    Simulate(RunArgs),
    /// Intervals for one realized experiment.
    Analyze(RunArgs),
    /// Write the imputation program of a realized experiment as an LP file.
    ExportLp {
        #[command(flatten)]
        run: RunArgs,
        /// Destination of the LP file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate an external solver's solution against an LP export.
    ImportSolution {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        lp: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Print a preset configuration as JSON.
    Config {
        #[arg(long, value_enum, default_value_t = Preset::Desk)]
        preset: Preset,
        /// Data file referenced by the preset.
        #[arg(long, default_value = "data/gdp_synthetic.csv")]
        data: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// N = 10, complete randomization of 5, 50 replications.
    Desk,
    /// Full panel, both designs, additive effects.
    PaperAdditive,
    /// Full panel, both designs, multiplicative effects.
    PaperMultiplicative,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration instead of a file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Data file for `--preset`.
    #[arg(long, default_value = "data/gdp_synthetic.csv")]
    data: PathBuf,
    #[arg(long)]
    solver: Option<String>,
    /// Per-solve time limit in seconds; 0 removes the limit.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report destinations, overriding the config.
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    quantiles: Option<PathBuf>,
}

fn preset(p: Preset, data: &Path) -> SimulationConfig {
    match p {
        Preset::Desk => SimulationConfig::desk(data),
        Preset::PaperAdditive => SimulationConfig::paper_scale(data, EffectPreset::PaperAdditive),
        Preset::PaperMultiplicative => SimulationConfig::paper_scale(data, EffectPreset::PaperMultiplicative),
    }
}

impl RunArgs {
    fn load(&self) -> Result<SimulationConfig> {
        let mut config = match (&self.config, self.preset) {
            (Some(path), _) => {
                SimulationConfig::load(path).with_context(|| format!("reading config {}", path.display()))?
            }
            (None, Some(p)) => preset(p, &self.data),
            (None, None) => bail!("pass --config <file> or --preset <name>"),
        };
        if let Some(s) = &self.solver {
            config.solver.kind = s.parse::<SolverKind>()?;
        }
        if let Some(t) = self.time_limit {
            config.solver.time_limit_secs = (t > 0.0).then_some(t);
        }
        if let Some(n) = self.node_limit {
            config.solver.node_limit = Some(n);
        }
        if let Some(r) = self.replications {
            config.replications = r;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if self.json.is_some() {
            config.output.json.clone_from(&self.json);
        }
        if self.csv.is_some() {
            config.output.csv.clone_from(&self.csv);
        }
        if self.quantiles.is_some() {
            config.output.quantiles.clone_from(&self.quantiles);
        }
        config.validate()?;
        Ok(config)
    }
}

fn fmt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "--".into(), |x| format!("{x:.digits$}"))
}

fn print_simulation(report: &SimulationReport) {
    println!(
        "{:<26} {:<14} {:<22} {:<17} {:>10} {:>8} {:>10} {:>8} {:>6} {:>7}",
        "design", "estimator", "effect", "method", "true_ci", "cover", "med_ci", "med_ci%", "power", "missing"
    );
    for r in &report.rows {
        println!(
            "{:<26} {:<14} {:<22} {:<17} {:>10} {:>8} {:>10} {:>8} {:>6} {:>7}",
            r.design,
            r.estimator,
            r.effect,
            r.method.as_str(),
            fmt(r.true_ci_width, 2),
            fmt(r.coverage, 3),
            fmt(r.median_ci_width, 2),
            fmt(r.median_ci_pct, 1),
            fmt(r.power, 2),
            r.missing
        );
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(args) => {
            let config = args.load()?;
            let report = run_simulation(&config)?;
            print_simulation(&report);
        }
        Command::Analyze(args) => {
            let config = args.load()?;
            let report = run_analysis(&config)?;
            println!("N = {} (N0 = {}, N1 = {}), point estimate {}", report.n, report.n0, report.n1, report.point_estimate);
            if let (Some(v), Some(e)) = (report.v_star, report.epsilon) {
                println!("V* = {v} at epsilon = {e} ({})", report.solver_status.as_deref().unwrap_or("unknown"));
            }
            for r in &report.intervals {
                match &r.ci {
                    Some(ci) => println!("{:<17} [{}, {}] width {}", r.method.as_str(), ci.lower, ci.upper, ci.width()),
                    None => println!("{:<17} missing: {}", r.method.as_str(), r.note.as_deref().unwrap_or("")),
                }
            }
        }
        Command::ExportLp { run, out } => {
            let config = run.load()?;
            let program = export_lp(&config, &out)?;
            println!("wrote {} ({} variables, {} rows)", out.display(), program.num_vars(), program.rows().count());
        }
        Command::ImportSolution { run, lp, solution } => {
            let config = run.load()?;
            let result = import_external(&config, &lp, &solution)?;
            println!("status {}", result.status);
            if let Some(v) = result.optimal_value {
                println!("V* = {v}");
            }
        }
        Command::Config { preset: p, data } => {
            println!("{}", serde_json::to_string_pretty(&preset(p, &data))?);
        }
    }
    Ok(())
}
