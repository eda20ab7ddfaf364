use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;

use super::dataset::Splits;
use super::report::{ResultRow, ResultTable, RESULT_HEADER};
use crate::error::{Error, Result};
use crate::models::{ClassifierSpec, EntranceKind, Teacher};
use crate::rng::{derive_seed, hash_str};
use crate::sensor::{calibrate_gain, RgbImage, SensorConfig, SensorKind};
use crate::training::{
    evaluate, fixed_frames, train_student, NoisyDataset, Protocol, ProtocolConfig, StudentRun, FRAME_TAG_TEST,
};

pub const DEFAULT_PPP: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const RESULTS_FILE: &str = "results.csv";
pub const PROGRESS_FILE: &str = "progress.txt";
pub const FAILURES_FILE: &str = "failures.txt";
pub const RECORDS_DIR: &str = "records";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ppp: Vec<f64>,
    pub sensors: Vec<SensorKind>,
    pub protocols: Vec<Protocol>,
    pub entrances: Vec<EntranceKind>,
    pub seeds: Vec<u64>,
    /// Everything except protocol, entrance and seed is taken from here.
    pub student: ProtocolConfig,
    /// PRNU strength applied to both sensors (0 disables).
    pub prnu_strength: f64,
    /// Master seed for evaluation noise and per-cell training seeds.
    pub master_seed: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ppp: DEFAULT_PPP.to_vec(),
            sensors: vec![SensorKind::Qis, SensorKind::Cis],
            protocols: vec![Protocol::StudentTeacher, Protocol::FineTune],
            entrances: vec![EntranceKind::Shallow],
            seeds: vec![0, 1, 2, 3, 4],
            student: ProtocolConfig::default(),
            prnu_strength: 0.0,
            master_seed: 0,
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub sensor: SensorKind,
    pub ppp: f64,
    pub protocol: Protocol,
    pub entrance: EntranceKind,
    pub seed: u64,
}

impl Cell {
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.sensor, self.ppp, self.protocol, self.entrance, self.seed
        )
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.ppp.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidParameter(format!("ppp values must be positive, got {p}")));
        }
        if self.ppp.is_empty()
            || self.sensors.is_empty()
            || self.protocols.is_empty()
            || self.entrances.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::InvalidParameter(
                "every sweep axis needs at least one value".into(),
            ));
        }
        self.student.validate()
    }

    /// Grid cells in canonical order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &sensor in &self.sensors {
            for &ppp in &self.ppp {
                for &protocol in &self.protocols {
                    for &entrance in &self.entrances {
                        for &seed in &self.seeds {
                            out.push(Cell {
                                sensor,
                                ppp,
                                protocol,
                                entrance,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Sensor for a (kind, ppp) pair with gain calibrated on the training images.
    pub fn sensor_config(&self, kind: SensorKind, ppp: f64, calibration: &[RgbImage]) -> Result<SensorConfig> {
        let mut cfg = SensorConfig::for_kind(kind).with_gain(calibrate_gain(calibration, ppp)?);
        cfg.prnu_strength = self.prnu_strength;
        cfg.prnu_seed = derive_seed(self.master_seed, &[hash_str("prnu")]);
        Ok(cfg)
    }

    /// Seed for validation and test noise: shared by every protocol and
    /// training seed at one (sensor, ppp) so they are scored on identical frames.
    pub fn eval_seed(&self, kind: SensorKind, ppp: f64) -> u64 {
        derive_seed(
            self.master_seed,
            &[hash_str("eval"), hash_str(kind.as_str()), ppp.to_bits()],
        )
    }

    /// Training seed: shared across protocols so they start from the same
    /// initialization and see the same noise draws.
    pub fn train_seed(&self, seed: u64) -> u64 {
        derive_seed(self.master_seed, &[hash_str("train"), seed])
    }

    pub fn protocol_config(&self, cell: &Cell) -> ProtocolConfig {
        ProtocolConfig {
            protocol: cell.protocol,
            entrance: cell.entrance,
            seed: self.train_seed(cell.seed),
            ..self.student.clone()
        }
    }
}

/// Everything a cell needs besides its grid coordinates.
pub struct SweepContext<'a> {
    pub splits: &'a Splits,
    pub teacher: &'a Teacher,
    pub classifier: &'a ClassifierSpec,
}

/// A trained cell: the run plus its test score.
pub struct CellOutcome {
    pub row: ResultRow,
    pub run: StudentRun,
}

/// Train and score one cell.
pub fn run_cell(spec: &SweepSpec, ctx: &SweepContext<'_>, cell: &Cell) -> Result<CellOutcome> {
    let calibration: Vec<RgbImage> = ctx.splits.train.iter().map(|s| s.image.clone()).collect();
    let sensor = spec.sensor_config(cell.sensor, cell.ppp, &calibration)?;
    let (w, h) = (calibration[0].width(), calibration[0].height());
    let mask = (sensor.prnu_strength > 0.0)
        .then(|| sensor.prnu_mask(w, h))
        .transpose()?;
    let eval_seed = spec.eval_seed(cell.sensor, cell.ppp);
    let data = NoisyDataset {
        train: &ctx.splits.train,
        val: &ctx.splits.val,
        sensor: sensor.clone(),
        mask: mask.clone(),
        eval_seed,
        n_classes: ctx.classifier.n_classes,
    };
    let proto = spec.protocol_config(cell);
    let run = train_student(&data, Some(ctx.teacher), ctx.classifier, &proto)?;
    let test = fixed_frames(&ctx.splits.test, &sensor, mask.as_ref(), eval_seed, FRAME_TAG_TEST)?;
    let refs: Vec<_> = test.iter().collect();
    let labels: Vec<usize> = ctx.splits.test.iter().map(|s| s.label).collect();
    let ev = evaluate(&run.best, &refs, &labels)?;
    let row = ResultRow {
        sensor: cell.sensor,
        ppp: cell.ppp,
        protocol: cell.protocol,
        entrance: cell.entrance,
        seed: cell.seed,
        accuracy: ev.accuracy,
        mean_confidence: ev.mean_confidence,
        best_epoch: run.best_epoch,
        val_loss_min_epoch: run.record.val_loss_argmin().unwrap_or(0),
    };
    Ok(CellOutcome { row, run })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub table: ResultTable,
    pub failures: Vec<SweepFailure>,
    /// Cells skipped because a previous run already completed them.
    pub resumed: usize,
}

fn record_file(key: &str) -> String {
    format!("{}.csv", key.replace('/', "_"))
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

/// Completed keys plus their rows from a previous, possibly interrupted, run.
fn load_previous(out_dir: &Path) -> Result<BTreeMap<String, ResultRow>> {
    let progress = out_dir.join(PROGRESS_FILE);
    let results = out_dir.join(RESULTS_FILE);
    if !progress.exists() || !results.exists() {
        return Ok(BTreeMap::new());
    }
    let done: BTreeSet<String> = fs::read_to_string(&progress)
        .map_err(|e| Error::io(&progress, e))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    let text = fs::read_to_string(&results).map_err(|e| Error::io(&results, e))?;
    let mut rows = BTreeMap::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        // A torn final line from a crash fails to parse and is simply redone.
        let Ok(row) = ResultRow::from_csv(line) else { continue };
        let key = row.cell().key();
        if done.contains(&key) {
            rows.insert(key, row);
        }
    }
    Ok(rows)
}

/// Run every cell of `spec`, writing results under `out_dir`.
///
/// Rows are appended to `results.csv` as cells finish and the key is then
/// recorded in `progress.txt`; a rerun skips recorded cells. Once all cells
/// are done `results.csv` is rewritten in canonical grid order, so the final
/// file is independent of thread count and completion order. A failing cell
/// is logged to `failures.txt` and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, ctx: &SweepContext<'_>, out_dir: &Path, threads: usize) -> Result<SweepOutcome> {
    spec.validate()?;
    let records = out_dir.join(RECORDS_DIR);
    fs::create_dir_all(&records).map_err(|e| Error::io(&records, e))?;
    let previous = load_previous(out_dir)?;
    let results_path = out_dir.join(RESULTS_FILE);
    let progress_path = out_dir.join(PROGRESS_FILE);
    let failures_path = out_dir.join(FAILURES_FILE);
    // Start the incremental file from the surviving rows only.
    let mut seed_text = format!("{RESULT_HEADER}\n");
    for row in previous.values() {
        seed_text.push_str(&row.to_csv());
        seed_text.push('\n');
    }
    fs::write(&results_path, seed_text).map_err(|e| Error::io(&results_path, e))?;
    let done_keys: String = previous.keys().map(|k| format!("{k}\n")).collect();
    fs::write(&progress_path, done_keys).map_err(|e| Error::io(&progress_path, e))?;
    if failures_path.exists() {
        fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
    }

    let cells = spec.cells();
    let pending: Vec<Cell> = cells
        .iter()
        .copied()
        .filter(|c| !previous.contains_key(&c.key()))
        .collect();
    let resumed = cells.len() - pending.len();
    log::info!("sweep: {} cells, {resumed} already complete", cells.len());

    let io_lock = Mutex::new(());
    let rows = Mutex::new(previous);
    let failures = Mutex::new(Vec::new());
    let work = |cell: &Cell| -> Result<()> {
        let key = cell.key();
        match run_cell(spec, ctx, cell) {
            Ok(out) => {
                let _guard = io_lock.lock().expect("sweep io lock");
                let rec = records.join(record_file(&key));
                fs::write(&rec, out.run.record.to_csv()).map_err(|e| Error::io(&rec, e))?;
                append_line(&results_path, &out.row.to_csv())?;
                append_line(&progress_path, &key)?;
                log::info!("{key}: accuracy {:.3}", out.row.accuracy);
                rows.lock().expect("sweep rows").insert(key, out.row);
            }
            Err(e) => {
                let _guard = io_lock.lock().expect("sweep io lock");
                log::error!("{key} failed: {e}");
                append_line(&failures_path, &format!("{key}\t{e}"))?;
                failures.lock().expect("sweep failures").push(SweepFailure {
                    key,
                    message: e.to_string(),
                });
            }
        }
        Ok(())
    };
    if threads <= 1 {
        pending.iter().try_for_each(work)?;
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| pending.par_iter().try_for_each(work))?;
    }

    let rows = rows.into_inner().expect("sweep rows");
    let mut failures = failures.into_inner().expect("sweep failures");
    failures.sort_by(|a, b| a.key.cmp(&b.key));
    // Canonical order: the grid order of the spec.
    let ordered: Vec<ResultRow> = cells.iter().filter_map(|c| rows.get(&c.key()).cloned()).collect();
    let table = ResultTable::new(ordered);
    let tmp = out_dir.join(format!("{RESULTS_FILE}.tmp"));
    fs::write(&tmp, table.to_csv()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &results_path).map_err(|e| Error::io(&results_path, e))?;
    Ok(SweepOutcome {
        table,
        failures,
        resumed,
    })
}
