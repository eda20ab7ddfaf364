use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::sweep::Cell;
use crate::error::{Error, Result};
use crate::models::EntranceKind;
use crate::sensor::SensorKind;
use crate::training::Protocol;

pub const RESULT_HEADER: &str =
    "sensor,ppp,protocol,entrance,seed,accuracy,mean_confidence,best_epoch,val_loss_min_epoch";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sensor: SensorKind,
    pub ppp: f64,
    pub protocol: Protocol,
    pub entrance: EntranceKind,
    pub seed: u64,
    pub accuracy: f64,
    pub mean_confidence: f64,
    pub best_epoch: usize,
    pub val_loss_min_epoch: usize,
}

impl ResultRow {
    pub fn cell(&self) -> Cell {
        Cell {
            sensor: self.sensor,
            ppp: self.ppp,
            protocol: self.protocol,
            entrance: self.entrance,
            seed: self.seed,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{},{}",
            self.sensor,
            self.ppp,
            self.protocol,
            self.entrance,
            self.seed,
            self.accuracy,
            self.mean_confidence,
            self.best_epoch,
            self.val_loss_min_epoch
        )
    }

    pub fn from_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::Format(format!("result row needs 9 fields: {line:?}")));
        }
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number {s:?}"))) };
        let int = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::Format(format!("bad integer {s:?}"))) };
        let row = Self {
            sensor: f[0].parse()?,
            ppp: num(f[1])?,
            protocol: f[2].parse()?,
            entrance: f[3].parse()?,
            seed: int(f[4])?,
            accuracy: num(f[5])?,
            mean_confidence: num(f[6])?,
            best_epoch: int(f[7])? as usize,
            val_loss_min_epoch: int(f[8])? as usize,
        };
        if !(0.0..=1.0).contains(&row.accuracy) {
            return Err(Error::Format(format!("accuracy {} outside [0, 1]", row.accuracy)));
        }
        Ok(row)
    }
}

/// Mean and spread of one (sensor, ppp, protocol, entrance) group over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sensor: SensorKind,
    pub ppp: f64,
    pub protocol: Protocol,
    pub entrance: EntranceKind,
    pub n: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std_accuracy: f64,
    pub mean_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn ppp_key(p: f64) -> u64 {
    // Positive finite floats order the same as their bit patterns.
    p.to_bits()
}

impl ResultTable {
    pub fn new(rows: Vec<ResultRow>) -> Self {
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{RESULT_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.to_csv());
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == RESULT_HEADER => {}
            other => return Err(Error::Format(format!("unexpected results header {other:?}"))),
        }
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(ResultRow::from_csv)
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    /// Aggregates sorted by sensor, protocol, entrance, then ppp.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut groups: BTreeMap<(SensorKind, Protocol, EntranceKind, u64), Vec<&ResultRow>> = BTreeMap::new();
        for r in &self.rows {
            groups
                .entry((r.sensor, r.protocol, r.entrance, ppp_key(r.ppp)))
                .or_default()
                .push(r);
        }
        groups
            .into_values()
            .map(|mut g| {
                // Sum in seed order so the result does not depend on row order.
                g.sort_by_key(|r| r.seed);
                let n = g.len();
                let mean = g.iter().map(|r| r.accuracy).sum::<f64>() / n as f64;
                let var = if n > 1 {
                    g.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                AggregateRow {
                    sensor: g[0].sensor,
                    ppp: g[0].ppp,
                    protocol: g[0].protocol,
                    entrance: g[0].entrance,
                    n,
                    mean_accuracy: mean,
                    std_accuracy: var.sqrt(),
                    mean_confidence: g.iter().map(|r| r.mean_confidence).sum::<f64>() / n as f64,
                }
            })
            .collect()
    }

    /// Mean accuracy of one group, if present.
    pub fn mean_accuracy(
        &self,
        sensor: SensorKind,
        ppp: f64,
        protocol: Protocol,
        entrance: EntranceKind,
    ) -> Option<f64> {
        self.aggregate()
            .into_iter()
            .find(|a| a.sensor == sensor && a.ppp == ppp && a.protocol == protocol && a.entrance == entrance)
            .map(|a| a.mean_accuracy)
    }
}

/// Formatted summary plus the two per-figure CSVs.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    /// Accuracy against ppp, grouped by protocol and entrance.
    pub by_protocol_csv: String,
    /// Accuracy against ppp, grouped by sensor.
    pub by_sensor_csv: String,
}

const AGG_HEADER: &str = "n,mean_accuracy,std_accuracy,mean_confidence";

pub fn report(table: &ResultTable) -> Result<Report> {
    if table.rows.is_empty() {
        return Err(Error::Data("cannot report an empty result table".into()));
    }
    let agg = table.aggregate();
    let stats = |a: &AggregateRow| {
        format!(
            "{},{:.6},{:.6},{:.6}",
            a.n, a.mean_accuracy, a.std_accuracy, a.mean_confidence
        )
    };

    let mut by_protocol: Vec<&AggregateRow> = agg.iter().collect();
    by_protocol.sort_by_key(|a| (a.protocol, a.entrance, a.sensor, ppp_key(a.ppp)));
    let mut p_csv = format!("protocol,entrance,sensor,ppp,{AGG_HEADER}\n");
    for a in &by_protocol {
        let _ = writeln!(
            p_csv,
            "{},{},{},{},{}",
            a.protocol,
            a.entrance,
            a.sensor,
            a.ppp,
            stats(a)
        );
    }
    let mut s_csv = format!("sensor,protocol,entrance,ppp,{AGG_HEADER}\n");
    for a in &agg {
        let _ = writeln!(
            s_csv,
            "{},{},{},{},{}",
            a.sensor,
            a.protocol,
            a.entrance,
            a.ppp,
            stats(a)
        );
    }

    let mut ppps: Vec<f64> = agg.iter().map(|a| a.ppp).collect();
    ppps.sort_by(f64::total_cmp);
    ppps.dedup();
    let mut text = String::new();
    let _ = write!(text, "{:<34}", "sensor / protocol / entrance");
    for p in &ppps {
        let _ = write!(text, "{:>16}", format!("{p} ppp"));
    }
    text.push('\n');
    let mut lines: BTreeMap<(SensorKind, Protocol, EntranceKind), BTreeMap<u64, &AggregateRow>> = BTreeMap::new();
    for a in &agg {
        lines
            .entry((a.sensor, a.protocol, a.entrance))
            .or_default()
            .insert(ppp_key(a.ppp), a);
    }
    for ((sensor, protocol, entrance), cells) in &lines {
        let _ = write!(text, "{:<34}", format!("{sensor} / {protocol} / {entrance}"));
        for p in &ppps {
            match cells.get(&ppp_key(*p)) {
                Some(a) => {
                    let _ = write!(
                        text,
                        "{:>16}",
                        format!("{:.1} ± {:.1}", 100.0 * a.mean_accuracy, 100.0 * a.std_accuracy)
                    );
                }
                None => {
                    let _ = write!(text, "{:>16}", "-");
                }
            }
        }
        text.push('\n');
    }
    let _ = writeln!(
        text,
        "({} runs; accuracy in percent, mean ± std over seeds)",
        table.rows.len()
    );
    Ok(Report {
        text,
        by_protocol_csv: p_csv,
        by_sensor_csv: s_csv,
    })
}
