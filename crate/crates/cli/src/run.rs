//! Experiment dispatch and output writing.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use drpolicy_core::bench::{
    evaluation_policy, generate_data, resource_best_in_class, run_evaluation_experiment, run_regret_experiment,
    run_resource_experiment, Application, DgpConfig, ExperimentResult, RunOptions,
};
use drpolicy_core::PolicySpace;

use crate::config::{Command, Format, RunConfig, SpaceKind};
use crate::error::CliError;
use crate::output::{write_csv, write_json, write_plot_json, write_raw_csv, Table};

/// What happened during a run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub table: Table,
    /// Cells dropped for exceeding the failure rate.
    pub dropped: usize,
    /// Individual replication failures.
    pub failures: usize,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        i32::from(self.dropped > 0)
    }

    fn absorb(&mut self, result: &ExperimentResult, prefix: &str) {
        self.table.push(result, prefix);
        self.dropped += result.dropped.len();
        self.failures += result.failures.len();
        for f in &result.failures {
            eprintln!(
                "warning: {} {} n={} sim {}: {}",
                result.config.form, f.estimator, f.n, f.sim, f.message
            );
        }
    }
}

fn options(cfg: &RunConfig) -> RunOptions {
    RunOptions {
        sims: cfg.sims,
        seed: cfg.seed,
        cross_fit: cfg.cross_fit,
        split: cfg.split(),
        mu: cfg.mu_rule(),
        ..RunOptions::default()
    }
}

fn space_for(kind: SpaceKind, cfg: &DgpConfig) -> Option<PolicySpace> {
    match kind {
        SpaceKind::Constant => Some(PolicySpace::pricing_constant()),
        SpaceKind::Linear => Some(PolicySpace::pricing_linear(cfg.regime.context_dim())),
        SpaceKind::Multitask => None,
    }
}

/// Label prefix for rows from learned policies.
pub const LEARNED_PREFIX: &str = "learned_";

/// Run every experiment the config asks for and collect the rows.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let opts = options(cfg);
    let mut report = Report::default();
    let evaluate = matches!(cfg.command, Command::Evaluate | Command::BenchPricing | Command::BenchQuadratic);
    let learn = matches!(
        cfg.command,
        Command::Optimize | Command::BenchPricing | Command::BenchQuadratic | Command::BenchResource
    );
    for &form in &cfg.forms {
        let dgp = DgpConfig::new(cfg.application, form, cfg.regime, cfg.ns[0], cfg.seed);
        if evaluate {
            let policies = cfg
                .policies
                .iter()
                .map(|p| Ok((p.clone(), evaluation_policy(p, cfg.regime)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            let result = run_evaluation_experiment(&dgp, &cfg.ns, &policies, &cfg.estimators, &opts)?;
            report.absorb(&result, "");
        }
        if learn {
            if cfg.application == Application::ResourceAllocation {
                let result = run_resource_experiment(&dgp, &cfg.ns, &cfg.estimators, &opts)?;
                report.absorb(&result, LEARNED_PREFIX);
                let (_, best) = resource_best_in_class(cfg.regime, form)?;
                report.table.push_best_in_class(form, cfg.regime, best);
            } else {
                for &kind in &cfg.spaces {
                    let space = space_for(kind, &dgp)
                        .ok_or_else(|| CliError::Config(format!("space '{kind}' needs the allocation application")))?;
                    let result = run_regret_experiment(&dgp, &cfg.ns, &space, kind.as_str(), &cfg.estimators, &opts)?;
                    report.absorb(&result, LEARNED_PREFIX);
                }
            }
        }
    }
    report.table.sort();
    Ok(report)
}

fn io_err(path: &str) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_string(), source }
}

fn with_output<F>(out: Option<&str>, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match out {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            write(&mut w)?;
            w.flush().map_err(io_err(path))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w)?;
            w.flush().map_err(io_err("<stdout>"))
        }
    }
}

/// `results.csv` → `results.raw.csv`.
pub fn raw_path(out: &str) -> String {
    let p = Path::new(out);
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.raw.csv")).to_string_lossy().into_owned()
}

pub fn emit(cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    let out = cfg.out.as_deref();
    match cfg.format {
        Format::Csv => {
            with_output(out, |w| write_csv(w, &table.rows))?;
            if cfg.emit_raw {
                let path = raw_path(out.expect("validated: raw CSV needs --out"));
                let records = table.records.as_deref().unwrap_or_default();
                with_output(Some(&path), |w| write_raw_csv(w, records))?;
            }
            Ok(())
        }
        Format::Json if cfg.plot_data => with_output(out, |w| write_plot_json(w, &table.rows)),
        Format::Json if cfg.emit_raw => with_output(out, |w| write_json(w, table)),
        Format::Json => with_output(out, |w| write_json(w, &table.without_records())),
    }
}

fn dump_data(cfg: &RunConfig) -> Result<(), CliError> {
    let dgp = DgpConfig::new(cfg.application, cfg.forms[0], cfg.regime, cfg.ns[0], cfg.seed);
    let sample = generate_data(&dgp)?;
    with_output(cfg.out.as_deref(), |w| Ok(sample.data.write_csv(w)?))
}

/// Execute and write; returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    if cfg.command == Command::DumpData {
        dump_data(cfg)?;
        return Ok(0);
    }
    if let Some(path) = &cfg.out {
        File::create(path).map_err(io_err(path))?;
    }
    let report = execute(cfg)?;
    emit(cfg, &report.table)?;
    if report.dropped > 0 {
        eprintln!("{} cell(s) dropped after too many failed replications", report.dropped);
    }
    Ok(report.exit_code())
}

/// Run on a dedicated pool when a worker count is given.
pub fn run_with_workers(cfg: &RunConfig, workers: Option<usize>) -> Result<i32, CliError> {
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Config(format!("cannot start {w} workers: {e}")))?;
            pool.install(|| run(cfg))
        }
        None => run(cfg),
    }
}
