//! Panel rows for causal estimation and their CSV form.
//!
//! CSV header: `event_id,customer_id,query_group,zip,drev,x_<name>...,m_<name>...,h_<name>...`.
//! Metric columns are discovered by prefix; floats are written in shortest
//! round-trip form so a write/read cycle is lossless.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Names of the surrogate (`x_`), short-term (`m_`) and history (`h_`) columns.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PanelSchema {
    pub surrogates: Vec<String>,
    pub short_term: Vec<String>,
    pub history: Vec<String>,
}

impl PanelSchema {
    pub fn width(&self) -> usize {
        self.surrogates.len() + self.short_term.len() + self.history.len()
    }
}

/// One search event.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRecord {
    pub event_id: u64,
    pub customer_id: u64,
    pub query_group: String,
    pub zip: String,
    pub drev: f64,
    pub surrogates: Vec<f64>,
    pub short_term: Vec<f64>,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PanelDataset {
    pub schema: PanelSchema,
    pub records: Vec<PanelRecord>,
}

/// Selects one metric column of a panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelColumn {
    Target,
    Surrogate(usize),
    ShortTerm(usize),
    History(usize),
}

impl PanelColumn {
    pub fn all(schema: &PanelSchema) -> Vec<PanelColumn> {
        std::iter::once(PanelColumn::Target)
            .chain((0..schema.surrogates.len()).map(PanelColumn::Surrogate))
            .chain((0..schema.short_term.len()).map(PanelColumn::ShortTerm))
            .chain((0..schema.history.len()).map(PanelColumn::History))
            .collect()
    }
}

impl PanelRecord {
    pub fn get(&self, column: PanelColumn) -> f64 {
        match column {
            PanelColumn::Target => self.drev,
            PanelColumn::Surrogate(j) => self.surrogates[j],
            PanelColumn::ShortTerm(j) => self.short_term[j],
            PanelColumn::History(j) => self.history[j],
        }
    }

    pub fn get_mut(&mut self, column: PanelColumn) -> &mut f64 {
        match column {
            PanelColumn::Target => &mut self.drev,
            PanelColumn::Surrogate(j) => &mut self.surrogates[j],
            PanelColumn::ShortTerm(j) => &mut self.short_term[j],
            PanelColumn::History(j) => &mut self.history[j],
        }
    }
}

impl PanelDataset {
    pub fn new(schema: PanelSchema, records: Vec<PanelRecord>) -> Result<Self> {
        let dataset = PanelDataset { schema, records };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schema;
        for r in &self.records {
            let lengths = [
                (r.surrogates.len(), s.surrogates.len()),
                (r.short_term.len(), s.short_term.len()),
                (r.history.len(), s.history.len()),
            ];
            if let Some(&(got, expected)) = lengths.iter().find(|(g, e)| g != e) {
                return Err(Error::SchemaMismatch { expected, got });
            }
            if r.query_group.is_empty() || r.zip.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "event {}: missing query_group or zip key",
                    r.event_id
                )));
            }
            let finite = r.drev.is_finite()
                && r.surrogates.iter().chain(&r.short_term).chain(&r.history).all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidInput(format!("event {}: non-finite metric", r.event_id)));
            }
        }
        Ok(())
    }

    pub fn column(&self, column: PanelColumn) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.records.iter().map(|r| r.get(column)))
    }

    /// Stacks the given columns into an `n x columns.len()` matrix.
    pub fn matrix(&self, columns: &[PanelColumn]) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), columns.len(), |i, j| self.records[i].get(columns[j]))
    }

    pub fn surrogate_columns(&self) -> Vec<PanelColumn> {
        (0..self.schema.surrogates.len()).map(PanelColumn::Surrogate).collect()
    }

    pub fn short_term_columns(&self) -> Vec<PanelColumn> {
        (0..self.schema.short_term.len()).map(PanelColumn::ShortTerm).collect()
    }

    pub fn history_columns(&self) -> Vec<PanelColumn> {
        (0..self.schema.history.len()).map(PanelColumn::History).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> PanelDataset {
        PanelDataset {
            schema: self.schema.clone(),
            records: rows.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let s = &self.schema;
        let header: Vec<String> = ["event_id", "customer_id", "query_group", "zip", "drev"]
            .iter()
            .map(|h| h.to_string())
            .chain(s.surrogates.iter().map(|n| format!("x_{n}")))
            .chain(s.short_term.iter().map(|n| format!("m_{n}")))
            .chain(s.history.iter().map(|n| format!("h_{n}")))
            .collect();
        out.write_record(&header)?;
        for r in &self.records {
            let row: Vec<String> = [
                r.event_id.to_string(),
                r.customer_id.to_string(),
                r.query_group.clone(),
                r.zip.clone(),
                r.drev.to_string(),
            ]
            .into_iter()
            .chain(r.surrogates.iter().chain(&r.short_term).chain(&r.history).map(|v| v.to_string()))
            .collect();
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header = input.headers()?.clone();
        let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
        let key = |name: &str| {
            position
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("panel csv lacks column `{name}`")))
        };
        let (event, customer, query, zip, drev) = (
            key("event_id")?,
            key("customer_id")?,
            key("query_group")?,
            key("zip")?,
            key("drev")?,
        );
        let mut schema = PanelSchema::default();
        let (mut xs, mut ms, mut hs) = (Vec::new(), Vec::new(), Vec::new());
        for (i, name) in header.iter().enumerate() {
            if let Some(n) = name.strip_prefix("x_") {
                schema.surrogates.push(n.to_string());
                xs.push(i);
            } else if let Some(n) = name.strip_prefix("m_") {
                schema.short_term.push(n.to_string());
                ms.push(i);
            } else if let Some(n) = name.strip_prefix("h_") {
                schema.history.push(n.to_string());
                hs.push(i);
            }
        }
        let mut records = Vec::new();
        for (line, row) in input.records().enumerate() {
            let row = row?;
            let field = |i: usize| row.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i).parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("row {}: `{}` is not a number", line + 1, field(i)))
                })
            };
            let int = |i: usize| -> Result<u64> {
                field(i).parse::<u64>().map_err(|_| {
                    Error::InvalidInput(format!("row {}: `{}` is not an id", line + 1, field(i)))
                })
            };
            records.push(PanelRecord {
                event_id: int(event)?,
                customer_id: int(customer)?,
                query_group: field(query).to_string(),
                zip: field(zip).to_string(),
                drev: num(drev)?,
                surrogates: xs.iter().map(|&i| num(i)).collect::<Result<_>>()?,
                short_term: ms.iter().map(|&i| num(i)).collect::<Result<_>>()?,
                history: hs.iter().map(|&i| num(i)).collect::<Result<_>>()?,
            });
        }
        PanelDataset::new(schema, records)
    }
}
