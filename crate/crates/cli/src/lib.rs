//! Command implementations behind the `semibandit` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use semibandit::instance::{gen_random_instance, lower_bound_value, make_disjoint_instance};
use semibandit::linalg::SymMatrix;
use semibandit::rates::{rate_report, ratio_sweep, SweepSpec};
use semibandit::simulation::{RunConfig, SimError};
use semibandit::{run_batch, Instance, InstanceFile, PolicyConfig, RandomSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(msg.to_string())
}

fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "semibandit", version, about = "Combinatorial semi-bandit experiments")]
pub struct Cli {
    /// Seed for generators; for `run` it replaces the config's master_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path prefix.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the final estimator state of replication 0 next to the CSV.
    #[arg(long, global = true)]
    pub dump_state: bool,
    /// Append a run stamp to output file names instead of overwriting.
    #[arg(long, global = true)]
    pub stamp: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Regret-rate report of an instance, or a P/d ratio sweep.
    Rates(RatesArgs),
    /// Minimax lower bound of an instance.
    Lowerbound {
        instance: PathBuf,
        #[arg(short = 'T', long = "horizon")]
        horizon: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Disjoint,
    Random,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub d: Option<usize>,
    /// Items per action (disjoint).
    #[arg(long)]
    pub m: Option<usize>,
    /// Gap of the best action (disjoint).
    #[arg(long)]
    pub delta: Option<f64>,
    /// 1-based index of the best action (disjoint).
    #[arg(long, default_value_t = 1)]
    pub best: usize,
    /// Item variance (disjoint).
    #[arg(long, default_value_t = 1.0)]
    pub var: f64,
    /// Correlation between items of the same action (disjoint).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rho: f64,
    /// Number of actions (random).
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub corr_bias: f64,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    /// Instance file.
    #[arg(required_unless_present = "sweep", conflicts_with = "sweep")]
    pub instance: Option<PathBuf>,
    /// JSON sweep spec: {d, p_values, m_max?, corr_bias?, replicates, scale?, seed?}.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
}

/// Generator section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorSpec {
    Disjoint {
        d: usize,
        m: usize,
        delta: f64,
        #[serde(default = "one_usize")]
        best: usize,
        #[serde(default = "one_f64")]
        var: f64,
        #[serde(default)]
        rho: f64,
    },
    Random {
        d: usize,
        p: usize,
        #[serde(default)]
        m_max: Option<usize>,
        #[serde(default)]
        corr_bias: f64,
        #[serde(default = "one_f64")]
        scale: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn one_usize() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceSource {
    Inline(InstanceFile),
    File(PathBuf),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub policies: Vec<PolicyConfig>,
    #[serde(rename = "T")]
    pub horizon: u64,
    #[serde(default = "one_usize")]
    pub replications: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "one_u64")]
    pub record_every: u64,
}

fn one_u64() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    /// Resolves the instance; relative file paths are taken from `base`.
    pub fn load_instance(&self, base: &Path) -> Result<Instance, CliError> {
        match &self.instance {
            InstanceSource::Inline(f) => Instance::from_file(f.clone()).map_err(|e| usage(format!("instance: {e}"))),
            InstanceSource::File(p) => read_instance(&base.join(p)),
            InstanceSource::Generator(g) => generate(g),
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<Instance, CliError> {
    match *spec {
        GeneratorSpec::Disjoint { d, m, delta, best, var, rho } => {
            if !(var > 0.0) || !(-1.0..=1.0).contains(&rho) {
                return Err(usage(format!("var must be > 0 and rho in [-1, 1] (got var={var}, rho={rho})")));
            }
            let sigma = SymMatrix::from_upper(d, |i, j| {
                if i == j {
                    var
                } else if m > 0 && i / m == j / m {
                    rho * var
                } else {
                    0.0
                }
            });
            make_disjoint_instance(d, m, sigma, best, delta).map_err(usage)
        }
        GeneratorSpec::Random { d, p, m_max, corr_bias, scale, seed } => {
            let spec = RandomSpec { d, p, m_max, corr_bias, scale };
            gen_random_instance(&spec, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(usage)
        }
    }
}

pub fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Instance::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Output naming: `prefix + suffix`, or `prefix-<unix seconds> + suffix` with `--stamp`.
#[derive(Debug, Clone)]
pub struct OutputNames {
    prefix: PathBuf,
    stamp: Option<u64>,
}

impl OutputNames {
    pub fn new(prefix: PathBuf, stamp: bool) -> Self {
        let stamp = stamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
        Self { prefix, stamp }
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        let mut name = self.prefix.as_os_str().to_owned();
        if let Some(s) = self.stamp {
            name.push(format!("-{s}"));
        }
        name.push(suffix);
        PathBuf::from(name)
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut say = |s: String| stdout.write_all(s.as_bytes()).map_err(runtime);
    match &cli.command {
        Command::Gen(args) => {
            let spec = gen_spec(args, cli.seed.unwrap_or(0))?;
            let inst = generate(&spec)?;
            let g = inst.gap_profile();
            let names = OutputNames::new(cli.out.clone().unwrap_or_else(|| inst.name.clone().into()), cli.stamp);
            let path = names.path(".json");
            write_file(&path, inst.to_json().as_bytes())?;
            say(format!(
                "wrote {} (d={}, {} actions)\noptimal action {} value {}\ndelta_min {}\ndelta_max {}\n",
                path.display(),
                inst.d(),
                inst.num_actions(),
                g.optimal_index,
                g.values[g.optimal_index],
                g.delta_min.map_or("none".into(), |v| v.to_string()),
                g.delta_max
            ))
        }
        Command::Run { config } => {
            let text = fs::read_to_string(config).map_err(|e| usage(format!("{}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let instance = cfg.load_instance(base)?;
            let mut run = RunConfig::new(instance, cfg.policies.clone(), cfg.horizon);
            run.replications = cfg.replications;
            run.master_seed = cli.seed.unwrap_or(cfg.master_seed);
            run.record_every = cfg.record_every;
            run.keep_snapshots = cli.dump_state;
            let result = run_batch(&run).map_err(|e| match e {
                SimError::Config(m) => usage(m),
                other => runtime(other),
            })?;
            let prefix = cli
                .out
                .clone()
                .or(cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("regret"));
            let names = OutputNames::new(prefix, cli.stamp);
            let csv = names.path(".csv");
            write_file(&csv, result.to_csv().as_bytes())?;
            if cli.dump_state {
                let states: Vec<_> = result
                    .policies
                    .iter()
                    .map(|p| serde_json::json!({ "policy": p.label, "state": p.snapshot }))
                    .collect();
                write_file(&names.path(".state.json"), to_json(&states).as_bytes())?;
            }
            let mut table = format!("wrote {}\n{:<16} {:>14} {:>14} {:>12}\n", csv.display(), "policy", "final_mean", "final_std", "exploration");
            for p in &result.policies {
                let expl: Vec<u64> = p.exploration_lengths.iter().flatten().copied().collect();
                let expl = if expl.is_empty() {
                    "-".to_string()
                } else {
                    format!("{:.1}", expl.iter().sum::<u64>() as f64 / expl.len() as f64)
                };
                table += &format!("{:<16} {:>14.4} {:>14.4} {:>12}\n", p.label, p.final_mean(), p.final_std(), expl);
            }
            say(table)
        }
        Command::Rates(args) => {
            if let Some(path) = &args.sweep {
                let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
                let mut spec: SweepSpec = serde_json::from_str(&text).map_err(|e| usage(format!("sweep: {e}")))?;
                if let Some(s) = cli.seed {
                    spec.seed = s;
                }
                let table = ratio_sweep(&spec).map_err(usage)?;
                for w in table.warnings() {
                    eprintln!("warning: {w}");
                }
                let csv = table.to_csv();
                match &cli.out {
                    Some(p) => {
                        let path = OutputNames::new(p.clone(), cli.stamp).path(".csv");
                        write_file(&path, csv.as_bytes())?;
                        say(format!("wrote {}\n", path.display()))
                    }
                    None => say(csv),
                }
            } else {
                let inst = read_instance(args.instance.as_deref().expect("clap enforces one source"))?;
                let report = to_json(&rate_report(&inst));
                if let Some(p) = &cli.out {
                    write_file(&OutputNames::new(p.clone(), cli.stamp).path(".json"), report.as_bytes())?;
                }
                say(report)
            }
        }
        Command::Lowerbound { instance, horizon } => {
            if *horizon == 0 {
                return Err(usage("horizon must be >= 1"));
            }
            let inst = read_instance(instance)?;
            let lb = lower_bound_value(&inst, *horizon).map_err(usage)?;
            let out = serde_json::json!({
                "bound": lb.bound,
                "radicand": lb.radicand,
                "horizon": horizon,
                "flags": { "negative_radicand": lb.negative_radicand, "degenerate": lb.degenerate },
            });
            say(to_json(&out))
        }
    }
}

fn required<T>(v: Option<T>, flag: &str, kind: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("--{flag} is required for --kind {kind}")))
}

fn gen_spec(a: &GenArgs, seed: u64) -> Result<GeneratorSpec, CliError> {
    Ok(match a.kind {
        GenKind::Disjoint => GeneratorSpec::Disjoint {
            d: required(a.d, "d", "disjoint")?,
            m: required(a.m, "m", "disjoint")?,
            delta: required(a.delta, "delta", "disjoint")?,
            best: a.best,
            var: a.var,
            rho: a.rho,
        },
        GenKind::Random => GeneratorSpec::Random {
            d: required(a.d, "d", "random")?,
            p: required(a.p, "p", "random")?,
            m_max: a.m_max,
            corr_bias: a.corr_bias,
            scale: a.scale,
            seed,
        },
    })
}
