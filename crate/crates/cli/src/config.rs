//! Run configuration: command-line flags layered over an optional TOML file
//! layered over defaults.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drpolicy_core::bench::{Application, Form, Regime, EVALUATION_POLICIES};
use drpolicy_core::estimators::EstimatorKind;
use drpolicy_core::policy_opt::{MuRule, SplitConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_NS: [usize; 4] = [1000, 2000, 5000, 10000];
pub const DEFAULT_SIMS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;
/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "DRPOLICY_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evaluate,
    Optimize,
    BenchPricing,
    BenchQuadratic,
    BenchResource,
    DumpData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Constant,
    Linear,
    Multitask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

macro_rules! value_names {
    ($ty:ty, $($v:path => $name:literal),+) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($v => $name,)+
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = CliError;
            fn from_str(s: &str) -> Result<Self, CliError> {
                <$ty as ValueEnum>::from_str(s.trim(), true).map_err(CliError::Config)
            }
        }
    };
}

value_names!(
    Command,
    Command::Evaluate => "evaluate",
    Command::Optimize => "optimize",
    Command::BenchPricing => "bench-pricing",
    Command::BenchQuadratic => "bench-quadratic",
    Command::BenchResource => "bench-resource",
    Command::DumpData => "dump-data"
);
value_names!(SpaceKind, SpaceKind::Constant => "constant", SpaceKind::Linear => "linear", SpaceKind::Multitask => "multitask");
value_names!(Format, Format::Csv => "csv", Format::Json => "json");

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub application: Application,
    pub forms: Vec<Form>,
    pub regime: Regime,
    pub ns: Vec<usize>,
    pub sims: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub policies: Vec<String>,
    pub spaces: Vec<SpaceKind>,
    pub mu_c: f64,
    pub delta: f64,
    pub splits: [f64; 3],
    pub cross_fit: bool,
    pub out: Option<String>,
    pub format: Format,
    pub emit_raw: bool,
    pub plot_data: bool,
}

impl RunConfig {
    pub fn mu_rule(&self) -> MuRule {
        MuRule { c: self.mu_c, delta: self.delta }
    }

    pub fn split(&self) -> SplitConfig {
        SplitConfig { fractions: self.splits, ..SplitConfig::default() }
    }

    /// Render as a config file that resolves back to `self`.
    pub fn to_toml(&self) -> String {
        let strings = |v: Vec<String>| Some(Value::Many(v.into_iter().map(Scalar::Str).collect()));
        let file = FileConfig {
            experiment: Some(ExperimentSection {
                command: Some(self.command.to_string()),
                application: Some(self.application.to_string()),
                form: strings(self.forms.iter().map(ToString::to_string).collect()),
                regime: Some(self.regime.to_string()),
                n: Some(Value::Many(self.ns.iter().map(|&n| seed_scalar(n as u64)).collect())),
                sims: Some(self.sims as u64),
                seed: Some(seed_scalar(self.seed)),
                estimators: strings(self.estimators.iter().map(ToString::to_string).collect()),
                policies: strings(self.policies.clone()),
                space: strings(self.spaces.iter().map(ToString::to_string).collect()),
                cross_fit: Some(self.cross_fit),
            }),
            learning: Some(LearningSection {
                mu_c: Some(self.mu_c),
                delta: Some(self.delta),
                splits: Some(Value::Many(self.splits.iter().map(|&f| Scalar::Float(f)).collect())),
            }),
            output: Some(OutputSection {
                out: self.out.clone(),
                format: Some(self.format.to_string()),
                emit_raw: Some(self.emit_raw),
                plot_data: Some(self.plot_data),
            }),
        };
        toml::to_string(&file).expect("config tables serialize")
    }
}

fn seed_scalar(v: u64) -> Scalar {
    i64::try_from(v).map_or_else(|_| Scalar::Str(v.to_string()), Scalar::Int)
}

#[derive(Debug, Parser)]
#[command(
    name = "drpolicy",
    version,
    about = "Doubly robust policy evaluation and learning benchmarks",
    arg_required_else_help = true
)]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Estimate fixed policies' values with each estimator
    Evaluate(Flags),
    /// Learn policies over a space and report their regret
    Optimize(Flags),
    /// Evaluation and regret on the linear-demand pricing problem
    BenchPricing(Flags),
    /// Evaluation and regret on the quadratic-revenue pricing problem
    BenchQuadratic(Flags),
    /// Multi-task lasso allocation policies
    BenchResource(Flags),
    /// Write one synthetic dataset as CSV
    DumpData(Flags),
}

impl CliCommand {
    pub fn split(self) -> (Command, Flags) {
        match self {
            CliCommand::Evaluate(f) => (Command::Evaluate, f),
            CliCommand::Optimize(f) => (Command::Optimize, f),
            CliCommand::BenchPricing(f) => (Command::BenchPricing, f),
            CliCommand::BenchQuadratic(f) => (Command::BenchQuadratic, f),
            CliCommand::BenchResource(f) => (Command::BenchResource, f),
            CliCommand::DumpData(f) => (Command::DumpData, f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with [experiment], [learning] and [output] tables
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub application: Option<Application>,
    /// One or more of quadratic, step, sigmoid, linear (default: all)
    #[arg(long, value_delimiter = ',')]
    pub form: Option<Vec<Form>>,
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Sample sizes
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<EstimatorKind>>,
    /// Evaluation policies: constant, linear, threshold, sin
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub space: Option<Vec<SpaceKind>>,
    #[arg(long)]
    pub mu_c: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Nuisance, validation and training fractions
    #[arg(long, value_delimiter = ',')]
    pub splits: Option<Vec<f64>>,
    #[arg(long)]
    pub cross_fit: bool,
    /// Output path (default: stdout)
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write per-replication records
    #[arg(long)]
    pub emit_raw: bool,
    /// Group JSON rows into one panel per (form, policy)
    #[arg(long)]
    pub plot_data: bool,
}

/// A TOML scalar that may stand for several config types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Many(Vec<Scalar>),
    One(Scalar),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub experiment: Option<ExperimentSection>,
    pub learning: Option<LearningSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub command: Option<String>,
    pub application: Option<String>,
    pub form: Option<Value>,
    pub regime: Option<String>,
    pub n: Option<Value>,
    pub sims: Option<u64>,
    pub seed: Option<Scalar>,
    pub estimators: Option<Value>,
    pub policies: Option<Value>,
    pub space: Option<Value>,
    pub cross_fit: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSection {
    pub mu_c: Option<f64>,
    pub delta: Option<f64>,
    pub splits: Option<Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub out: Option<String>,
    pub format: Option<String>,
    pub emit_raw: Option<bool>,
    pub plot_data: Option<bool>,
}

pub fn parse_config_file(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {}", e.message())))
}

pub fn parse_cli<I, T>(argv: I) -> Result<CliArgs, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Ok(CliArgs::try_parse_from(argv)?)
}

/// Parse `argv` (program name first), reading `--config` if given.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (command, flags) = parse_cli(argv)?.command.split();
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(parse_config_file(&text)?)
        }
        None => None,
    };
    resolve(command, flags, file.unwrap_or_default())
}

fn scalar_strings(v: &Value) -> Vec<String> {
    let one = |s: &Scalar| match s {
        Scalar::Str(s) => s.split(',').map(|p| p.trim().to_string()).collect(),
        Scalar::Int(i) => vec![i.to_string()],
        Scalar::Float(f) => vec![f.to_string()],
    };
    match v {
        Value::One(s) => one(s),
        Value::Many(items) => items.iter().flat_map(one).collect(),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &Value) -> Result<Vec<T>, CliError>
where
    T::Err: fmt::Display,
{
    scalar_strings(v)
        .iter()
        .map(|s| s.parse::<T>().map_err(|e| CliError::Config(format!("{key}: {e}"))))
        .collect()
}

fn parse_one<T: FromStr>(key: &str, s: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn parse_seed(s: &Scalar) -> Result<u64, CliError> {
    match s {
        Scalar::Int(i) => u64::try_from(*i).map_err(|_| CliError::Config(format!("seed: {i} is negative"))),
        Scalar::Str(s) => parse_one("seed", s.trim()),
        Scalar::Float(_) => Err(CliError::Config("seed: expected an integer".into())),
    }
}

fn dedup<T: PartialEq + Clone>(v: Vec<T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(v.len());
    for x in v {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

fn fixed_application(command: Command) -> Option<Application> {
    match command {
        Command::BenchPricing => Some(Application::PricingLinearDemand),
        Command::BenchQuadratic => Some(Application::PricingQuadraticRevenue),
        Command::BenchResource => Some(Application::ResourceAllocation),
        _ => None,
    }
}

/// Merge flags over file values over defaults and validate the result.
pub fn resolve(command: Command, flags: Flags, file: FileConfig) -> Result<RunConfig, CliError> {
    let exp = file.experiment.unwrap_or_default();
    let learn = file.learning.unwrap_or_default();
    let output = file.output.unwrap_or_default();

    if let Some(c) = &exp.command {
        let c: Command = parse_one("command", c)?;
        if c != command {
            return Err(CliError::Config(format!("config file is for '{c}', not '{command}'")));
        }
    }
    let file_app = exp.application.as_deref().map(|s| parse_one::<Application>("application", s)).transpose()?;
    let requested = flags.application.or(file_app);
    let application = match (fixed_application(command), requested) {
        (Some(fixed), Some(asked)) if fixed != asked => {
            return Err(CliError::Config(format!("{command} always uses {fixed}, got {asked}")))
        }
        (Some(fixed), _) => fixed,
        (None, asked) => asked.unwrap_or(Application::PricingLinearDemand),
    };

    let forms = match flags.form {
        Some(f) => f,
        None => match &exp.form {
            Some(v) => parse_list("form", v)?,
            None => Form::ALL.to_vec(),
        },
    };
    let regime = match flags.regime {
        Some(r) => r,
        None => exp.regime.as_deref().map(|s| parse_one("regime", s)).transpose()?.unwrap_or(Regime::Low),
    };
    let ns = match flags.n {
        Some(n) => n,
        None => match &exp.n {
            Some(v) => parse_list("n", v)?,
            None => DEFAULT_NS.to_vec(),
        },
    };
    let sims = match flags.sims {
        Some(s) => s,
        None => match exp.sims {
            Some(s) => usize::try_from(s).map_err(|_| CliError::Config("sims: too large".into()))?,
            None => DEFAULT_SIMS,
        },
    };
    let seed = match flags.seed {
        Some(s) => s,
        None => exp.seed.as_ref().map(parse_seed).transpose()?.unwrap_or(DEFAULT_SEED),
    };
    let estimators = match flags.estimators {
        Some(e) => e,
        None => match &exp.estimators {
            Some(v) => parse_list("estimators", v)?,
            None => EstimatorKind::ALL.to_vec(),
        },
    };
    let policies = match flags.policies {
        Some(p) => p,
        None => match &exp.policies {
            Some(v) => scalar_strings(v),
            None => EVALUATION_POLICIES.iter().map(|s| s.to_string()).collect(),
        },
    };
    let spaces = match flags.space {
        Some(s) => s,
        None => match &exp.space {
            Some(v) => parse_list("space", v)?,
            None if application == Application::ResourceAllocation => vec![SpaceKind::Multitask],
            None => vec![SpaceKind::Constant, SpaceKind::Linear],
        },
    };
    let defaults_mu = MuRule::default();
    let mu_c = flags.mu_c.or(learn.mu_c).unwrap_or(defaults_mu.c);
    let delta = flags.delta.or(learn.delta).unwrap_or(defaults_mu.delta);
    let split_list = match flags.splits {
        Some(s) => s,
        None => match &learn.splits {
            Some(v) => parse_list("splits", v)?,
            None => SplitConfig::default().fractions.to_vec(),
        },
    };
    let format = match flags.format {
        Some(f) => f,
        None => output.format.as_deref().map(|s| parse_one("format", s)).transpose()?.unwrap_or(Format::Csv),
    };

    let cfg = RunConfig {
        command,
        application,
        forms: dedup(forms),
        regime,
        ns: dedup(ns),
        sims,
        seed,
        estimators: dedup(estimators),
        policies: dedup(policies.into_iter().map(|p| p.trim().to_ascii_lowercase()).collect()),
        spaces: dedup(spaces),
        mu_c,
        delta,
        splits: <[f64; 3]>::try_from(split_list.as_slice())
            .map_err(|_| CliError::Config(format!("splits: need 3 fractions, got {}", split_list.len())))?,
        cross_fit: flags.cross_fit || exp.cross_fit.unwrap_or(false),
        out: flags.out.or(output.out),
        format,
        emit_raw: flags.emit_raw || output.emit_raw.unwrap_or(false),
        plot_data: flags.plot_data || output.plot_data.unwrap_or(false),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Config(m));
    if cfg.sims == 0 {
        return bad("sims must be at least 1".into());
    }
    if cfg.forms.is_empty() || cfg.ns.is_empty() || cfg.estimators.is_empty() {
        return bad("form, n and estimators lists must be nonempty".into());
    }
    let min_n = if cfg.command == Command::DumpData { 1 } else { 8 };
    if let Some(n) = cfg.ns.iter().find(|&&n| n < min_n) {
        return bad(format!("sample size {n} is below the minimum of {min_n}"));
    }
    if let Some(p) = cfg.policies.iter().find(|p| !EVALUATION_POLICIES.contains(&p.as_str())) {
        return bad(format!("unknown policy '{p}' (expected one of {})", EVALUATION_POLICIES.join(", ")));
    }
    if cfg.policies.is_empty() && matches!(cfg.command, Command::Evaluate | Command::BenchPricing | Command::BenchQuadratic) {
        return bad("policies list must be nonempty".into());
    }
    MuRule::new(cfg.mu_c, cfg.delta).map_err(|e| CliError::Config(e.to_string()))?;
    SplitConfig::new(cfg.splits, 0).map_err(|e| CliError::Config(e.to_string()))?;
    let resource = cfg.application == Application::ResourceAllocation;
    let learns = matches!(cfg.command, Command::Optimize | Command::BenchPricing | Command::BenchQuadratic | Command::BenchResource);
    if learns {
        if cfg.spaces.is_empty() {
            return bad("space list must be nonempty".into());
        }
        for s in &cfg.spaces {
            if (*s == SpaceKind::Multitask) != resource {
                return bad(format!("space '{s}' does not fit application {}", cfg.application));
            }
        }
    }
    if cfg.command == Command::Evaluate && resource {
        return bad("evaluate supports the pricing applications only".into());
    }
    if cfg.command == Command::DumpData && (cfg.ns.len() != 1 || cfg.forms.len() != 1) {
        return bad("dump-data needs exactly one --form and one --n".into());
    }
    if cfg.plot_data && cfg.format != Format::Json {
        return bad("--plot-data needs --format json".into());
    }
    if cfg.emit_raw && cfg.format == Format::Csv && cfg.out.is_none() {
        return bad("--emit-raw with CSV output needs --out".into());
    }
    Ok(())
}

/// Worker count from the environment, if set.
pub fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("{WORKERS_ENV}: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn args(s: &str) -> Vec<String> {
        std::iter::once("drpolicy".to_string()).chain(s.split_whitespace().map(String::from)).collect()
    }

    #[test]
    fn defaults() {
        let cfg = parse_config(args("bench-pricing")).unwrap();
        assert_eq!(cfg.ns, DEFAULT_NS);
        assert_eq!((cfg.sims, cfg.seed), (100, 42));
        assert_eq!(cfg.application, Application::PricingLinearDemand);
        assert_eq!(cfg.spaces, [SpaceKind::Constant, SpaceKind::Linear]);
        assert_eq!(cfg.forms, Form::ALL);
    }

    #[test]
    fn low_dim_step_cell() {
        let cfg = parse_config(args("bench-pricing --form step --regime low --sims 100")).unwrap();
        assert_eq!(cfg.forms, [Form::Step]);
        assert_eq!(cfg.regime, Regime::Low);
        assert_eq!(cfg.ns, [1000, 2000, 5000, 10000]);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(parse_config(args("")).unwrap_err().exit_code(), 2);
        assert_eq!(parse_config(args("evaluate --sims 0")).unwrap_err().exit_code(), 2);
        assert_eq!(parse_config(args("evaluate --bogus")).unwrap_err().exit_code(), 2);
        assert_eq!(parse_config(args("evaluate --form cubic")).unwrap_err().exit_code(), 2);
        assert_eq!(parse_config(args("bench-resource --space linear")).unwrap_err().exit_code(), 2);
        assert_eq!(parse_config(args("evaluate --splits 0.5,0.5")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let file = parse_config_file("[experiment]\nsims = 7\nseed = 9\nn = \"100,200\"\n[learning]\nmu_c = 3.0\n").unwrap();
        let (cmd, flags) = parse_cli(args("optimize --seed 5")).unwrap().command.split();
        let cfg = resolve(cmd, flags, file).unwrap();
        assert_eq!((cfg.sims, cfg.seed, cfg.mu_c), (7, 5, 3.0));
        assert_eq!(cfg.ns, [100, 200]);
        assert_eq!(cfg.delta, 0.1);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        assert!(parse_config_file("[experiment]\nsimz = 3\n").is_err());
        assert!(parse_config_file("[extra]\n").is_err());
        assert!(parse_config_file("").unwrap() == FileConfig::default());
    }

    #[test]
    fn mismatched_file_command_is_rejected() {
        let file = parse_config_file("[experiment]\ncommand = \"evaluate\"\n").unwrap();
        let (cmd, flags) = parse_cli(args("optimize")).unwrap().command.split();
        assert!(resolve(cmd, flags, file).is_err());
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        let cmds = prop::sample::select(vec![Command::Evaluate, Command::Optimize, Command::BenchPricing, Command::BenchQuadratic]);
        (
            cmds,
            prop::sample::subsequence(Form::ALL.to_vec(), 1..=4),
            any::<bool>(),
            prop::collection::btree_set(8usize..100_000, 1..5),
            1usize..1000,
            any::<u64>(),
            prop::sample::subsequence(EstimatorKind::ALL.to_vec(), 1..=4),
            prop::sample::subsequence(EVALUATION_POLICIES.to_vec(), 1..=4),
            prop::sample::subsequence(vec![SpaceKind::Constant, SpaceKind::Linear], 1..=2),
            (0.01f64..100.0, 0.001f64..0.999),
            (0.05f64..0.9, 0.05f64..0.9),
            (any::<bool>(), any::<bool>(), prop::option::of("[a-z/_.]{1,20}")),
        )
            .prop_map(|(command, forms, high, ns, sims, seed, estimators, policies, spaces, (mu_c, delta), (a, b), (cross_fit, emit_raw, out))| {
                let total = a + b + 0.1;
                let splits = [a / total, b / total, 1.0 - a / total - b / total];
                let application = match command {
                    Command::BenchQuadratic => Application::PricingQuadraticRevenue,
                    _ => Application::PricingLinearDemand,
                };
                RunConfig {
                    command,
                    application,
                    forms,
                    regime: if high { Regime::High } else { Regime::Low },
                    ns: ns.into_iter().collect(),
                    sims,
                    seed,
                    estimators,
                    policies: policies.into_iter().map(String::from).collect(),
                    spaces,
                    mu_c,
                    delta,
                    splits,
                    cross_fit,
                    emit_raw: emit_raw && out.is_some(),
                    out,
                    format: Format::Csv,
                    plot_data: false,
                }
            })
            .prop_filter("valid splits", |c| SplitConfig::new(c.splits, 0).is_ok())
    }

    proptest! {
        #[test]
        fn config_round_trips_through_toml(cfg in arb_config()) {
            let text = cfg.to_toml();
            let file = parse_config_file(&text).unwrap();
            let back = resolve(cfg.command, Flags::default(), file).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
