use std::fmt::Write as _;

use super::sweep::{run_cell, Cell, SweepContext, SweepSpec};
use crate::error::{Error, Result};
use crate::models::EntranceKind;
use crate::sensor::SensorKind;
use crate::training::Protocol;

pub const DEFAULT_LAMBDAS: [f32; 3] = [0.01, 0.1, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub lambda: f32,
    pub seed: u64,
    /// Best validation accuracy of the run; this is what the grid selects on.
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    pub rows: Vec<LambdaRow>,
    /// Lambda with the highest mean validation accuracy (ties go to the smaller value).
    pub best: f32,
}

impl LambdaGrid {
    pub fn mean_val(&self, lambda: f32) -> f64 {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.lambda == lambda)
            .map(|r| r.val_accuracy)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,seed,val_accuracy,test_accuracy\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6}",
                r.lambda, r.seed, r.val_accuracy, r.test_accuracy
            );
        }
        s
    }
}

/// Train the student-teacher protocol at each lambda on one (sensor, ppp)
/// and pick the value by validation accuracy.
pub fn lambda_grid(
    spec: &SweepSpec,
    ctx: &SweepContext<'_>,
    lambdas: &[f32],
    sensor: SensorKind,
    ppp: f64,
    entrance: EntranceKind,
) -> Result<LambdaGrid> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    let mut rows = Vec::new();
    for &lambda in lambdas {
        let mut s = spec.clone();
        s.student.lambda = lambda;
        for &seed in &spec.seeds {
            let cell = Cell {
                sensor,
                ppp,
                protocol: Protocol::StudentTeacher,
                entrance,
                seed,
            };
            let out = run_cell(&s, ctx, &cell)?;
            let val = out.run.record.epochs.iter().map(|e| e.val_acc).fold(0.0, f64::max);
            log::info!(
                "lambda {lambda} seed {seed}: val {val:.3}, test {:.3}",
                out.row.accuracy
            );
            rows.push(LambdaRow {
                lambda,
                seed,
                val_accuracy: val,
                test_accuracy: out.row.accuracy,
            });
        }
    }
    let mut grid = LambdaGrid { rows, best: lambdas[0] };
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f32::total_cmp);
    let mut best = (f64::MIN, sorted[0]);
    for &l in &sorted {
        let m = grid.mean_val(l);
        if m > best.0 {
            best = (m, l);
        }
    }
    grid.best = best.1;
    Ok(grid)
}
