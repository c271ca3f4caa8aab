//! Serializable run output and its table/CSV renderings.

use std::fmt::Write as _;

use around_core::compare::ModelRun;
use around_core::rsa::{ListenerTable, SpeakerMatrix};
use around_core::{FiniteDomain, Scenario};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerOut {
    pub observations: Vec<String>,
    pub messages: Vec<String>,
    /// One row per observation.
    pub rows: Vec<Vec<f64>>,
}

impl SpeakerOut {
    pub fn from_matrix(s: &SpeakerMatrix) -> Self {
        Self {
            observations: s.observations().to_vec(),
            messages: s.messages().iter().map(|m| m.to_string()).collect(),
            rows: s.rows().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListenerOut {
    pub x: Vec<i64>,
    pub messages: Vec<String>,
    /// One row per x value, one entry per message; `None` where the
    /// listener is undefined for that message.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl ListenerOut {
    pub fn from_table(t: &ListenerTable, domain: FiniteDomain) -> Self {
        let marginals = t.x_marginals();
        Self {
            x: domain.values().collect(),
            messages: t.messages().iter().map(|m| m.to_string()).collect(),
            rows: (0..domain.len())
                .map(|xi| marginals.iter().map(|m| m.as_ref().map(|p| p.mass()[xi])).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOut {
    pub level: usize,
    pub speaker: SpeakerOut,
    pub listener: ListenerOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOut {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Everything a `run` produces. Contains no timestamps or paths, so it is a
/// pure function of the scenario and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub model: String,
    pub depth: usize,
    pub lambda: f64,
    pub literal: Option<ListenerOut>,
    pub levels: Vec<LevelOut>,
    pub checks: Vec<CheckOut>,
    pub status: String,
}

impl RunReport {
    pub fn new(scn: &Scenario, depth: usize, run: &ModelRun, checks: Vec<CheckOut>) -> Self {
        Self {
            scenario: scn.to_toml(),
            model: scn.model.to_string(),
            depth,
            lambda: scn.lambda,
            literal: run.literal.as_ref().map(|l| ListenerOut::from_table(l, scn.domain)),
            levels: run
                .speakers
                .iter()
                .zip(&run.listeners)
                .enumerate()
                .map(|(i, (s, l))| LevelOut {
                    level: i + 1,
                    speaker: SpeakerOut::from_matrix(s),
                    listener: ListenerOut::from_table(l, scn.domain),
                })
                .collect(),
            checks,
            status: "ok".into(),
        }
    }

    /// `(file stem, table)` in emission order: `L0`, `S1`, `L1`, `S2`, ...
    pub fn named_tables(&self) -> Vec<(String, Table<'_>)> {
        let mut out = Vec::new();
        if let Some(l) = &self.literal {
            out.push(("L0".to_string(), Table::Listener(l)));
        }
        for level in &self.levels {
            out.push((format!("S{}", level.level), Table::Speaker(&level.speaker)));
            out.push((format!("L{}", level.level), Table::Listener(&level.listener)));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Table<'a> {
    Speaker(&'a SpeakerOut),
    Listener(&'a ListenerOut),
}

impl Table<'_> {
    /// Full-precision CSV; the first column is `observation` or `x`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match self {
            Table::Speaker(s) => {
                w.write_record(std::iter::once("observation").chain(s.messages.iter().map(String::as_str)))?;
                for (label, row) in s.observations.iter().zip(&s.rows) {
                    let mut rec = vec![label.clone()];
                    rec.extend(row.iter().map(|v| v.to_string()));
                    w.write_record(&rec)?;
                }
            }
            Table::Listener(l) => {
                w.write_record(std::iter::once("x").chain(l.messages.iter().map(String::as_str)))?;
                for (x, row) in l.x.iter().zip(&l.rows) {
                    let mut rec = vec![x.to_string()];
                    rec.extend(row.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
                    w.write_record(&rec)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Two-decimal display table; undefined cells print as `-`.
    pub fn to_text(&self) -> String {
        let (corner, cols, rows): (&str, &[String], Vec<GridRow>) = match self {
            Table::Speaker(s) => (
                "observation",
                &s.messages,
                s.observations
                    .iter()
                    .zip(&s.rows)
                    .map(|(o, r)| (o.clone(), r.iter().map(|v| Some(*v)).collect()))
                    .collect(),
            ),
            Table::Listener(l) => (
                "x",
                &l.messages,
                l.x.iter().zip(&l.rows).map(|(x, r)| (x.to_string(), r.clone())).collect(),
            ),
        };
        render_grid(corner, cols, &rows, 2)
    }
}

/// A labelled row of optional cells.
pub type GridRow = (String, Vec<Option<f64>>);

/// Fixed-width grid with right-aligned numbers.
pub fn render_grid(corner: &str, cols: &[String], rows: &[GridRow], decimals: usize) -> String {
    let first = rows
        .iter()
        .map(|(l, _)| l.len())
        .chain(std::iter::once(corner.len()))
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = cols.iter().map(|c| c.len().max(decimals + 3)).collect();
    let mut out = String::new();
    let _ = write!(out, "{corner:<first$}");
    for (c, w) in cols.iter().zip(&widths) {
        let _ = write!(out, "  {c:>w$}");
    }
    out.push('\n');
    for (label, row) in rows {
        let _ = write!(out, "{label:<first$}");
        for (v, w) in row.iter().zip(&widths) {
            match v {
                Some(v) => {
                    let _ = write!(out, "  {v:>w$.decimals$}");
                }
                None => {
                    let _ = write!(out, "  {:>w$}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Parses a speaker CSV written by [`Table::to_csv`].
pub fn speaker_from_csv(text: &str) -> Result<SpeakerOut, csv::Error> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let messages = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut observations = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        observations.push(rec[0].to_string());
        rows.push(rec.iter().skip(1).map(|v| v.parse().unwrap_or(f64::NAN)).collect());
    }
    Ok(SpeakerOut {
        observations,
        messages,
        rows,
    })
}

/// Parses a listener CSV written by [`Table::to_csv`].
pub fn listener_from_csv(text: &str) -> Result<ListenerOut, csv::Error> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let messages = r.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut x = Vec::new();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        x.push(rec[0].parse().unwrap_or(i64::MIN));
        rows.push(
            rec.iter()
                .skip(1)
                .map(|v| if v.is_empty() { None } else { v.parse().ok() })
                .collect(),
        );
    }
    Ok(ListenerOut { x, messages, rows })
}
