//! Result tables: CSV, JSON and per-panel plot data.

use std::io::Write;

use drpolicy_core::bench::{ExperimentResult, Form, Regime};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CSV_HEADER: &str = "form,regime,policy,estimator,n,sims,mean,std,true_value,mean_regret,std_regret";
pub const RAW_HEADER: &str = "form,regime,policy,estimator,n,sim,value,true_value,regret";

/// Policy label of the best-in-class reference row.
pub const BEST_IN_CLASS: &str = "best_in_class";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub form: String,
    pub regime: String,
    pub policy: String,
    pub estimator: String,
    pub n: usize,
    pub sims: usize,
    pub mean: f64,
    pub std: f64,
    pub true_value: f64,
    pub mean_regret: Option<f64>,
    pub std_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub form: String,
    pub regime: String,
    pub policy: String,
    pub estimator: String,
    pub n: usize,
    pub sim: usize,
    pub value: f64,
    pub true_value: f64,
    pub regret: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub records: Option<Vec<RawRow>>,
}

impl Table {
    /// Append a result; `prefix` is prepended to every policy label.
    pub fn push(&mut self, result: &ExperimentResult, prefix: &str) {
        let (form, regime) = labels(result.config.form, result.config.regime);
        for c in &result.cells {
            self.rows.push(Row {
                form: form.clone(),
                regime: regime.clone(),
                policy: format!("{prefix}{}", c.policy),
                estimator: c.estimator.to_string(),
                n: c.n,
                sims: c.sims,
                mean: c.mean,
                std: c.std,
                true_value: c.true_value,
                mean_regret: c.mean_regret,
                std_regret: c.std_regret,
            });
        }
        let raw = self.records.get_or_insert_with(Vec::new);
        raw.extend(result.records.iter().map(|r| RawRow {
            form: form.clone(),
            regime: regime.clone(),
            policy: format!("{prefix}{}", r.policy),
            estimator: r.estimator.to_string(),
            n: r.n,
            sim: r.sim,
            value: r.value,
            true_value: r.true_value,
            regret: r.regret,
        }));
    }

    /// One row carrying a best-in-class value.
    pub fn push_best_in_class(&mut self, form: Form, regime: Regime, value: f64) {
        let (form, regime) = labels(form, regime);
        self.rows.push(Row {
            form,
            regime,
            policy: BEST_IN_CLASS.into(),
            estimator: "truth".into(),
            n: 0,
            sims: 0,
            mean: value,
            std: 0.0,
            true_value: value,
            mean_regret: Some(0.0),
            std_regret: Some(0.0),
        });
    }

    /// Sort rows by (form, policy, estimator, n) and records by (form, policy, estimator, n, sim).
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.form, &a.policy, &a.estimator, a.n).cmp(&(&b.form, &b.policy, &b.estimator, b.n))
        });
        if let Some(r) = &mut self.records {
            r.sort_by(|a, b| {
                (&a.form, &a.policy, &a.estimator, a.n, a.sim).cmp(&(&b.form, &b.policy, &b.estimator, b.n, b.sim))
            });
        }
    }

    pub fn without_records(&self) -> Table {
        Table { rows: self.rows.clone(), records: None }
    }
}

fn labels(form: Form, regime: Regime) -> (String, String) {
    (form.to_string(), regime.to_string())
}

fn encode(e: impl std::fmt::Display) -> CliError {
    CliError::Encode(e.to_string())
}

fn write_records<W: Write, S: Serialize>(w: W, header: &str, rows: &[S]) -> Result<(), CliError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(header.split(',')).map_err(encode)?;
    for r in rows {
        out.serialize(r).map_err(encode)?;
    }
    out.flush().map_err(encode)
}

pub fn write_csv<W: Write>(w: W, rows: &[Row]) -> Result<(), CliError> {
    write_records(w, CSV_HEADER, rows)
}

pub fn write_raw_csv<W: Write>(w: W, rows: &[RawRow]) -> Result<(), CliError> {
    write_records(w, RAW_HEADER, rows)
}

pub fn write_json<W: Write>(mut w: W, table: &Table) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut w, table).map_err(encode)?;
    writeln!(w).map_err(encode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub n: usize,
    pub sims: usize,
    pub mean: f64,
    pub std: f64,
    pub true_value: f64,
    pub mean_regret: Option<f64>,
    pub std_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub estimator: String,
    pub points: Vec<Point>,
}

/// One subplot: a (form, policy) pair with a curve per estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub form: String,
    pub regime: String,
    pub policy: String,
    pub series: Vec<Series>,
}

/// Group sorted rows into panels.
pub fn panels(rows: &[Row]) -> Vec<Panel> {
    let mut out: Vec<Panel> = Vec::new();
    for r in rows {
        let fresh = out
            .last()
            .is_none_or(|p| p.form != r.form || p.policy != r.policy || p.regime != r.regime);
        if fresh {
            out.push(Panel {
                form: r.form.clone(),
                regime: r.regime.clone(),
                policy: r.policy.clone(),
                series: Vec::new(),
            });
        }
        let panel = out.last_mut().expect("pushed above");
        if panel.series.last().is_none_or(|s| s.estimator != r.estimator) {
            panel.series.push(Series { estimator: r.estimator.clone(), points: Vec::new() });
        }
        panel.series.last_mut().expect("pushed above").points.push(Point {
            n: r.n,
            sims: r.sims,
            mean: r.mean,
            std: r.std,
            true_value: r.true_value,
            mean_regret: r.mean_regret,
            std_regret: r.std_regret,
        });
    }
    out
}

pub fn write_plot_json<W: Write>(mut w: W, rows: &[Row]) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct PlotData {
        panels: Vec<Panel>,
    }
    serde_json::to_writer_pretty(&mut w, &PlotData { panels: panels(rows) }).map_err(encode)?;
    writeln!(w).map_err(encode)
}
