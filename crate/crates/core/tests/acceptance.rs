//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Sweep outputs are kept under the cargo target tmp dir in
//! `acceptance/` for inspection.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::gradcheck::*;
use common::{chi2_sf, chi_square, count_distribution};
use qis_core::autodiff::{Graph, Tensor};
use qis_core::harness::{
    report, run_cell, run_sweep, synthetic_splits, ResultRow, ResultTable, Splits, SweepContext, SweepSpec,
    RESULTS_FILE,
};
use qis_core::models::{ClassifierSpec, EntranceKind, Student, Teacher};
use qis_core::rng::generator;
use qis_core::sensor::*;
use qis_core::training::{
    combined_loss, perceptual_diagnostic, perceptual_loss, train_teacher, Protocol, ProtocolConfig, TeacherConfig,
};
use rand::Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const DATA_SEED: u64 = 0;
const TEACHER_FLOOR: f64 = 0.90;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Ledger {
    lines: Vec<Line>,
}

impl Ledger {
    fn record(&mut self, id: usize, name: &'static str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2} {name}: {detail}");
        self.lines.push(Line { id, name, pass, detail });
    }

    fn summary(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            let tag = if l.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "[{tag}] {:>2} {}: {}", l.id, l.name, l.detail);
        }
        s
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn quiet(kind: SensorKind) -> SensorConfig {
    SensorConfig {
        read_noise_sigma: 0.0,
        dark_current_rate: 0.0,
        ..SensorConfig::for_kind(kind)
    }
}

fn moments(counts: &[u16]) -> (f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn sensor_statistics(ledger: &mut Ledger) {
    let start = Instant::now();
    let img = RgbImage::filled(1000, 1000, [0.5; 3]).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, lambda) in [0.25, 1.0, 4.0].into_iter().enumerate() {
        let cfg = quiet(SensorKind::Qis).with_gain(2.0 * lambda);
        let f = simulate_frame(&img, &cfg, None, 1000 + i as u64).unwrap();
        let (mean, var) = moments(&f.counts);
        let (em, ev) = ((mean / lambda - 1.0).abs(), (var / lambda - 1.0).abs());
        ok &= em < 0.01 && ev < 0.02;
        parts.push(format!(
            "λ={lambda} mean err {:.2}% var err {:.2}%",
            100.0 * em,
            100.0 * ev
        ));
    }
    let t = start.elapsed();
    ok &= t < Duration::from_secs(10);
    ledger.record(1, "sensor statistics", ok, format!("{}; {}", parts.join(", "), secs(t)));
}

fn full_chain_distribution(ledger: &mut Ledger) {
    let cfg = SensorConfig {
        read_noise_sigma: 0.25,
        dark_current_rate: 0.0,
        adc_bits: 5,
        ..SensorConfig::qis()
    }
    .with_gain(1.0);
    // 320 x 320 = 102400 samples.
    let img = RgbImage::filled(320, 320, [1.0; 3]).unwrap();
    let f = simulate_frame(&img, &cfg, None, 2024).unwrap();
    let levels = cfg.max_level() as usize + 1;
    let mut hist = vec![0u64; levels];
    for &c in &f.counts {
        hist[c as usize] += 1;
    }
    let model = count_distribution(1.0, 0.25, cfg.max_level());
    let (stat, dof) = chi_square(&hist, &model, f.counts.len() as u64);
    let p = chi2_sf(stat, dof);
    ledger.record(
        2,
        "full-chain distribution",
        p > 0.01,
        format!(
            "chi-square {stat:.2} on {dof} dof over {} samples, p = {p:.3}",
            f.counts.len()
        ),
    );
}

fn adc_invariant(ledger: &mut Ledger) {
    let mut g = generator(0xadc);
    let cases = 10_000;
    let mut violations = 0usize;
    for _ in 0..cases {
        let (w, h) = (2 * g.random_range(1..=6), 2 * g.random_range(1..=6));
        let img = RgbImage::new(w, h, (0..w * h * 3).map(|_| g.random::<f32>()).collect()).unwrap();
        let kind = if g.random::<bool>() {
            SensorKind::Qis
        } else {
            SensorKind::Cis
        };
        let cfg = SensorConfig {
            gain_alpha: 10f64.powf(g.random_range(-3.0..2.5)),
            read_noise_sigma: g.random_range(0.0..4.0),
            adc_bits: g.random_range(1..=12),
            dark_current_rate: g.random_range(0.0..1e4),
            prnu_strength: g.random_range(0.0..0.2),
            prnu_seed: g.random(),
            adc_mode: if g.random::<bool>() {
                AdcMode::Floor
            } else {
                AdcMode::Round
            },
            ..SensorConfig::for_kind(kind)
        };
        let mask = cfg.prnu_mask(w, h).unwrap();
        let f = simulate_frame(&img, &cfg, Some(&mask), g.random()).unwrap();
        let l = cfg.max_level();
        violations += f.counts.iter().filter(|&&c| c as u32 > l).count();
    }
    ledger.record(
        3,
        "ADC invariant",
        violations == 0,
        format!("{cases} random cases, {violations} out-of-range counts"),
    );
}

fn calibration(ledger: &mut Ledger, splits: &Splits) {
    let imgs: Vec<&RgbImage> = splits.train.iter().map(|s| &s.image).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, target) in [0.25, 0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let alpha = calibrate_gain(imgs.iter().copied(), target).unwrap();
        let cfg = quiet(SensorKind::Qis).with_gain(alpha);
        let frames: Vec<RawFrame> = imgs
            .iter()
            .enumerate()
            .map(|(j, img)| simulate_frame(img, &cfg, None, (i * 10_000 + j) as u64).unwrap())
            .collect();
        let est = measure_ppp(&frames).unwrap();
        let err = (est / target - 1.0).abs();
        ok &= err < 0.02;
        parts.push(format!("{target}→{est:.4}"));
    }
    ledger.record(
        4,
        "calibration",
        ok,
        format!("target→measured ppp: {}", parts.join(", ")),
    );
}

fn gradients(ledger: &mut Ledger) {
    let start = Instant::now();
    let cases: [(&str, fn() -> CaseResult); 7] = [
        ("conv2d", conv2d_case),
        ("relu/pool/upsample", relu_pool_upsample_case),
        ("dense/cross-entropy", dense_cross_entropy_case),
        ("concat/add/scale/sum", concat_add_scale_sum_case),
        ("mse", mse_case),
        ("shallow student", shallow_student_case),
        ("deep student", deep_student_case),
    ];
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for (name, case) in cases {
        match case() {
            Ok(e) => worst = worst.max(e),
            Err(e) => {
                ok = false;
                failed.push(format!("{name}: {e}"));
            }
        }
    }
    let t = start.elapsed();
    ok &= t < Duration::from_secs(120);
    let detail = if failed.is_empty() {
        format!("7 cases, worst relative error {worst:.2e}; {}", secs(t))
    } else {
        format!("{}; {}", failed.join("; "), secs(t))
    };
    ledger.record(5, "gradient correctness", ok, detail);
}

fn loss_formulas(ledger: &mut Ledger) {
    let mut g = Graph::new();
    let t = g.input(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
    let s = g.input(Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap());
    let lp = perceptual_loss(&mut g, &[s], &[t]).unwrap();
    let lp_v = g.value(lp).data()[0] as f64;

    let logits = g.input(Tensor::new(vec![1, 10], vec![0.0; 10]).unwrap());
    let parts = combined_loss(&mut g, logits, &[3], &[s], &[t], 1.0).unwrap();
    let ce_v = g.value(parts.ce).data()[0] as f64;
    let total_v = g.value(parts.total).data()[0] as f64;

    // λ = 0 against a plain cross-entropy on arbitrary logits.
    let raw = Tensor::new(vec![2, 4], vec![0.3, -1.2, 2.5, 0.7, -0.4, 0.9, 1.1, -2.0]).unwrap();
    let mut a = Graph::new();
    let la = a.input(raw.clone());
    let fa = a.input(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let fb = a.input(Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap());
    let zero = combined_loss(&mut a, la, &[2, 1], &[fa], &[fb], 0.0).unwrap();
    let mut b = Graph::new();
    let lb = b.input(raw);
    let plain = b.softmax_cross_entropy(lb, &[2, 1]).unwrap();
    let exact = a.value(zero.total).data()[0].to_bits() == b.value(plain).data()[0].to_bits();

    let ok = (lp_v - 2.5).abs() < 1e-6 && (ce_v - 2.302585).abs() < 1e-6 && (total_v - 4.802585).abs() < 1e-6 && exact;
    ledger.record(
        6,
        "loss formulas",
        ok,
        format!("Lp {lp_v:.6}, uniform CE {ce_v:.6}, CE + Lp {total_v:.6}, λ=0 bit-identical to CE: {exact}"),
    );
}

fn perceptual_trend(ledger: &mut Ledger, teacher: &Teacher, splits: &Splits) {
    let start = Instant::now();
    let images: Vec<RgbImage> = splits.test.iter().chain(&splits.val).map(|s| s.image.clone()).collect();
    let grid = [0.25, 0.5, 1.0, 2.0, 4.0];
    let qis = perceptual_diagnostic(teacher, &images, &grid, &SensorConfig::qis(), 77).unwrap();
    let cis = perceptual_diagnostic(teacher, &images, &grid, &SensorConfig::cis(), 77).unwrap();
    let t = start.elapsed();
    let decreasing = qis.windows(2).all(|w| w[1].mean_lp < w[0].mean_lp);
    let cis_worse = cis[0].mean_lp >= qis[0].mean_lp;
    let ok = decreasing && cis_worse && images.len() >= 200 && t < Duration::from_secs(300);
    let q: Vec<String> = qis.iter().map(|r| format!("{:.4}", r.mean_lp)).collect();
    let c: Vec<String> = cis.iter().map(|r| format!("{:.4}", r.mean_lp)).collect();
    ledger.record(
        7,
        "perceptual loss trend",
        ok,
        format!(
            "{} images; QIS [{}], CIS [{}] over ppp {grid:?}; {}",
            images.len(),
            q.join(", "),
            c.join(", "),
            secs(t)
        ),
    );
}

fn sweep(base: &Path, name: &str, spec: &SweepSpec, ctx: &SweepContext<'_>, threads: usize) -> ResultTable {
    let dir = base.join(name);
    let out = run_sweep(spec, ctx, &dir, threads).unwrap();
    assert!(out.failures.is_empty(), "{name}: {:?}", out.failures);
    out.table
}

fn mean(table: &ResultTable, sensor: SensorKind, ppp: f64, protocol: Protocol) -> f64 {
    table
        .mean_accuracy(sensor, ppp, protocol, EntranceKind::Shallow)
        .unwrap()
}

fn cell<'a>(table: &'a ResultTable, sensor: SensorKind, ppp: f64, protocol: Protocol, seed: u64) -> &'a ResultRow {
    table
        .rows
        .iter()
        .find(|r| r.sensor == sensor && r.ppp == ppp && r.protocol == protocol && r.seed == seed)
        .unwrap()
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

fn spec(ppp: &[f64], sensors: &[SensorKind], protocols: &[Protocol]) -> SweepSpec {
    SweepSpec {
        ppp: ppp.to_vec(),
        sensors: sensors.to_vec(),
        protocols: protocols.to_vec(),
        seeds: SEEDS.to_vec(),
        ..Default::default()
    }
}

fn threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn out_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn main() {
    let mut ledger = Ledger::default();
    let base = out_dir();

    sensor_statistics(&mut ledger);
    full_chain_distribution(&mut ledger);
    adc_invariant(&mut ledger);
    let splits = synthetic_splits(4, 300, 32, DATA_SEED).unwrap();
    calibration(&mut ledger, &splits);
    gradients(&mut ledger);
    loss_formulas(&mut ledger);

    let train_start = Instant::now();
    let classifier = ClassifierSpec::toy(4, (32, 32));
    let run = train_teacher(
        &splits.train,
        &splits.val,
        classifier.clone(),
        &TeacherConfig::default(),
    )
    .unwrap();
    println!(
        "[info] teacher: clean validation accuracy {} after {} epochs (floor {}); {}",
        pct(run.val_accuracy),
        TeacherConfig::default().epochs,
        pct(TEACHER_FLOOR),
        secs(train_start.elapsed())
    );
    assert!(run.val_accuracy >= TEACHER_FLOOR, "teacher below the accuracy floor");
    let teacher = run.teacher;

    perceptual_trend(&mut ledger, &teacher, &splits);

    let ctx = SweepContext {
        splits: &splits,
        teacher: &teacher,
        classifier: &classifier,
    };
    let (qis, cis) = (SensorKind::Qis, SensorKind::Cis);
    let (st, ft, rest) = (Protocol::StudentTeacher, Protocol::FineTune, Protocol::Restoration);
    let threads = threads();
    let protocols_spec = spec(&[0.25, 1.0, 4.0], &[qis], &[st, ft, rest]);
    let protocols = sweep(&base, "protocols", &protocols_spec, &ctx, threads);
    let extra_qis = sweep(&base, "qis-0.5", &spec(&[0.5], &[qis], &[st]), &ctx, threads);
    let cis_table = sweep(&base, "cis", &spec(&[0.25, 0.5], &[cis], &[st]), &ctx, threads);
    let sweep_time = train_start.elapsed();
    let all = ResultTable::new(
        protocols
            .rows
            .iter()
            .chain(&extra_qis.rows)
            .chain(&cis_table.rows)
            .cloned()
            .collect(),
    );
    let rep = report(&all).unwrap();
    fs::write(base.join("report.txt"), &rep.text).unwrap();
    fs::write(base.join("all_results.csv"), all.to_csv()).unwrap();
    println!("{}", rep.text);

    // Sensor ordering under the student-teacher protocol.
    let (q25, c25) = (mean(&all, qis, 0.25, st), mean(&all, cis, 0.25, st));
    let (q50, c50) = (mean(&all, qis, 0.5, st), mean(&all, cis, 0.5, st));
    let gap = 100.0 * (q25 - c25);
    let ok = q25 >= c25 && q50 >= c50 && gap >= 3.0 && sweep_time < Duration::from_secs(90 * 60);
    ledger.record(
        8,
        "sensor ordering",
        ok,
        format!(
            "QIS vs CIS at 0.25 ppp {} vs {} (gap {gap:.1} pts), at 0.5 ppp {} vs {}; training {:.1} min",
            pct(q25),
            pct(c25),
            pct(q50),
            pct(c50),
            sweep_time.as_secs_f64() / 60.0
        ),
    );

    // Protocol ordering.
    let (st25, ft25, re25) = (
        mean(&all, qis, 0.25, st),
        mean(&all, qis, 0.25, ft),
        mean(&all, qis, 0.25, rest),
    );
    let (st1, ft1) = (mean(&all, qis, 1.0, st), mean(&all, qis, 1.0, ft));
    let gap = 100.0 * (st25 - ft25);
    let ok = st25 >= ft25 && st1 >= ft1 && gap >= 2.0 && st25 >= re25;
    ledger.record(
        9,
        "protocol ordering",
        ok,
        format!(
            "0.25 ppp: student-teacher {} vs fine-tune {} (gap {gap:.1} pts) vs restoration {}; 1 ppp: {} vs {}",
            pct(st25),
            pct(ft25),
            pct(re25),
            pct(st1),
            pct(ft1)
        ),
    );

    // Validation-loss minimum epochs.
    let pairs: Vec<(usize, usize)> = SEEDS
        .iter()
        .map(|&s| {
            (
                cell(&all, qis, 0.25, ft, s).val_loss_min_epoch,
                cell(&all, qis, 0.25, st, s).val_loss_min_epoch,
            )
        })
        .collect();
    let earlier = pairs.iter().filter(|(f, s)| f < s).count();
    ledger.record(
        10,
        "validation-loss minimum",
        2 * earlier > SEEDS.len(),
        format!(
            "fine-tune before student-teacher in {earlier}/{} seeds; (FT, ST) epochs {pairs:?}",
            SEEDS.len()
        ),
    );

    // Photon-level monotonicity.
    let mut violations = Vec::new();
    for p in [st, ft, rest] {
        for &s in &SEEDS {
            let (hi, lo) = (
                cell(&all, qis, 4.0, p, s).accuracy,
                cell(&all, qis, 0.25, p, s).accuracy,
            );
            if hi <= lo {
                violations.push(format!("{p} seed {s}: {} <= {}", pct(hi), pct(lo)));
            }
        }
    }
    let detail = if violations.is_empty() {
        format!("4 ppp beats 0.25 ppp for all {} protocol/seed pairs", 3 * SEEDS.len())
    } else {
        violations.join("; ")
    };
    ledger.record(11, "photon-level monotonicity", violations.is_empty(), detail);

    reproducibility(&mut ledger, &base, &protocols_spec, &ctx, &teacher, threads);

    fs::write(base.join("summary.txt"), ledger.summary()).unwrap();
    let failed: Vec<String> = ledger
        .lines
        .iter()
        .filter(|l| !l.pass)
        .map(|l| format!("{} {}", l.id, l.name))
        .collect();
    assert_eq!(ledger.lines.len(), 12);
    println!("acceptance: {} of 12 criteria passed", 12 - failed.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}

/// Rerun part of the protocol sweep in a fresh directory and compare its
/// rows byte for byte, then round-trip a teacher and a student checkpoint.
fn reproducibility(
    ledger: &mut Ledger,
    base: &Path,
    full: &SweepSpec,
    ctx: &SweepContext<'_>,
    teacher: &Teacher,
    threads: usize,
) {
    let subset = SweepSpec {
        ppp: vec![0.25],
        protocols: vec![Protocol::StudentTeacher, Protocol::FineTune],
        seeds: vec![0],
        ..full.clone()
    };
    let rerun = run_sweep(&subset, ctx, &base.join("rerun"), threads).unwrap();
    let original = fs::read_to_string(base.join("protocols").join(RESULTS_FILE)).unwrap();
    let again = fs::read_to_string(base.join("rerun").join(RESULTS_FILE)).unwrap();
    let original_lines: Vec<&str> = original.lines().collect();
    let mut mismatched = 0;
    for line in again.lines().skip(1) {
        if !original_lines.contains(&line) {
            mismatched += 1;
        }
    }
    let rows_ok = mismatched == 0 && rerun.table.rows.len() == 2;

    let dir = base.join("checkpoints");
    fs::create_dir_all(&dir).unwrap();
    let tpath = dir.join("teacher.qck");
    teacher.save(&tpath).unwrap();
    let t2 = Teacher::load(&tpath).unwrap();
    let t2path = dir.join("teacher2.qck");
    t2.save(&t2path).unwrap();
    let teacher_ok = t2.checksum() == teacher.checksum() && fs::read(&tpath).unwrap() == fs::read(&t2path).unwrap();

    let short = SweepSpec {
        student: ProtocolConfig {
            epochs: 1,
            ..full.student.clone()
        },
        ..subset
    };
    let cell = short.cells()[0];
    let student = run_cell(&short, ctx, &cell).unwrap().run.best;
    let spath = dir.join("student.qck");
    student.save(&spath).unwrap();
    let s2 = Student::load(&spath).unwrap();
    let s2path = dir.join("student2.qck");
    s2.save(&s2path).unwrap();
    let student_ok = s2.checksum() == student.checksum() && fs::read(&spath).unwrap() == fs::read(&s2path).unwrap();

    ledger.record(
        12,
        "reproducibility",
        rows_ok && teacher_ok && student_ok,
        format!(
            "{} rerun rows, {mismatched} differ from the first run; teacher round-trip {}, student round-trip {}",
            rerun.table.rows.len(),
            if teacher_ok { "bit-exact" } else { "differs" },
            if student_ok { "bit-exact" } else { "differs" },
        ),
    );
}
