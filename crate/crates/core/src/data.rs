//! Logged observational data: outcomes, continuous actions and contexts.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `n` i.i.d. records `(y, a, z)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedDataset {
    y: Vec<f64>,
    actions: Vec<f64>,
    contexts: Vec<f64>,
    action_dim: usize,
    context_dim: usize,
}

impl LoggedDataset {
    /// Build from row-major action and context buffers.
    pub fn new(
        y: Vec<f64>,
        actions: Vec<f64>,
        action_dim: usize,
        contexts: Vec<f64>,
        context_dim: usize,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if action_dim == 0 {
            return Err(Error::invalid("action dimension must be at least 1"));
        }
        if actions.len() != n * action_dim {
            return Err(Error::DimensionMismatch {
                what: "action buffer",
                expected: n * action_dim,
                got: actions.len(),
            });
        }
        if contexts.len() != n * context_dim {
            return Err(Error::DimensionMismatch {
                what: "context buffer",
                expected: n * context_dim,
                got: contexts.len(),
            });
        }
        if y.iter().chain(&actions).chain(&contexts).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite entries"));
        }
        Ok(Self {
            y,
            actions,
            contexts,
            action_dim,
            context_dim,
        })
    }

    /// Build from per-row vectors.
    pub fn from_rows(y: Vec<f64>, actions: &[Vec<f64>], contexts: &[Vec<f64>]) -> Result<Self> {
        if actions.len() != y.len() || contexts.len() != y.len() {
            return Err(Error::invalid("row counts of y, a and z differ"));
        }
        let action_dim = actions.first().map_or(0, Vec::len);
        let context_dim = contexts.first().map_or(0, Vec::len);
        if actions.iter().any(|a| a.len() != action_dim) || contexts.iter().any(|z| z.len() != context_dim) {
            return Err(Error::invalid("ragged action or context rows"));
        }
        Self::new(
            y,
            actions.concat(),
            action_dim,
            contexts.concat(),
            context_dim,
        )
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn outcome(&self, i: usize) -> f64 {
        self.y[i]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }

    pub fn context(&self, i: usize) -> &[f64] {
        &self.contexts[i * self.context_dim..(i + 1) * self.context_dim]
    }

    /// Rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut y = Vec::with_capacity(rows.len());
        let mut actions = Vec::with_capacity(rows.len() * self.action_dim);
        let mut contexts = Vec::with_capacity(rows.len() * self.context_dim);
        for &i in rows {
            y.push(self.y[i]);
            actions.extend_from_slice(self.action(i));
            contexts.extend_from_slice(self.context(i));
        }
        Self {
            y,
            actions,
            contexts,
            action_dim: self.action_dim,
            context_dim: self.context_dim,
        }
    }

    /// Same actions and contexts with a replaced outcome column.
    pub fn with_outcomes(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(
            y,
            self.actions.clone(),
            self.action_dim,
            self.contexts.clone(),
            self.context_dim,
        )
    }

    /// Write as CSV with columns `y, a_1..a_{d_a}, z_1..z_k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["y".to_string()];
        header.extend((1..=self.action_dim).map(|j| format!("a_{j}")));
        header.extend((1..=self.context_dim).map(|j| format!("z_{j}")));
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for i in 0..self.len() {
            row.clear();
            row.push(self.y[i].to_string());
            row.extend(self.action(i).iter().map(f64::to_string));
            row.extend(self.context(i).iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parse the CSV layout produced by [`LoggedDataset::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        let columns = ColumnLayout::parse(&header)?;
        let mut y = Vec::new();
        let mut actions = Vec::new();
        let mut contexts = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::invalid(format!(
                    "row has {} fields, header has {}",
                    rec.len(),
                    header.len()
                )));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("cannot parse {field:?} as a number")))?;
                match j {
                    0 => y.push(v),
                    j if j <= columns.action_dim => actions.push(v),
                    _ => contexts.push(v),
                }
            }
        }
        Self::new(y, actions, columns.action_dim, contexts, columns.context_dim)
    }
}

struct ColumnLayout {
    action_dim: usize,
    context_dim: usize,
}

impl ColumnLayout {
    fn parse(header: &csv::StringRecord) -> Result<Self> {
        let mut fields = header.iter();
        if fields.next().map(str::trim) != Some("y") {
            return Err(Error::invalid("first column must be `y`"));
        }
        let (mut action_dim, mut context_dim) = (0usize, 0usize);
        for name in fields {
            let name = name.trim();
            let (prefix, idx) = name
                .split_once('_')
                .ok_or_else(|| Error::invalid(format!("unexpected column {name:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::invalid(format!("unexpected column {name:?}")))?;
            match prefix {
                "a" if context_dim == 0 && idx == action_dim + 1 => action_dim += 1,
                "z" if idx == context_dim + 1 => context_dim += 1,
                _ => return Err(Error::invalid(format!("unexpected column {name:?}"))),
            }
        }
        if action_dim == 0 {
            return Err(Error::invalid("no action columns"));
        }
        Ok(Self {
            action_dim,
            context_dim,
        })
    }
}
