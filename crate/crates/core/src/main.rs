use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use qis_core::harness::{
    gen_synthetic_dataset, ingest_folder, lambda_grid, read_config, report, run_sweep, DatasetManifest, ResultTable,
    Splits, SweepContext, SweepSpec, DEFAULT_PPP, MANIFEST_FILE,
};
use qis_core::models::{
    load_model, ClassifierKind, ClassifierSpec, EntranceKind, InputLayout, ModelRole, Student, Teacher,
};
use qis_core::rng::{derive_seed, hash_str};
use qis_core::sensor::{calibrate_gain, simulate_frame, RgbImage, SensorConfig, SensorKind};
use qis_core::training::{
    evaluate, fixed_frames, perceptual_diagnostic, train_student, train_teacher, NoisyDataset, OptimizerSettings,
    Protocol, ProtocolConfig, TeacherConfig, DEFAULT_LAMBDA, DEFAULT_STUDENT_TAPS, FRAME_TAG_TEST,
};
use qis_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "qis",
    version,
    about = "Low-light raw-sensor simulation and classification experiments"
)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// `key = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Render the procedural shape dataset.
    GenData(GenData),
    /// Build a manifest from a folder of class sub-directories.
    Ingest(Ingest),
    /// Simulate raw frames for every PPM in a directory.
    Simulate(Simulate),
    /// Train the teacher on clean images.
    TrainTeacher(TrainTeacher),
    /// Train one student under a protocol.
    TrainStudent(TrainStudent),
    /// Score a checkpoint on the test split.
    Evaluate(Evaluate),
    /// Run the sensor x ppp x protocol x entrance x seed grid.
    Sweep(Sweep),
    /// Summarize a results CSV.
    Report(Report),
    /// Select the perceptual weight on validation accuracy.
    LambdaGrid(LambdaGridArgs),
    /// Teacher-feature distance between clean images and raw frames per ppp.
    DiagnosePerceptual(Diagnose),
}

#[derive(Args, Debug)]
struct GenData {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 300)]
    per_class: usize,
    #[arg(long, default_value_t = 32)]
    size: usize,
}

#[derive(Args, Debug)]
struct Ingest {
    #[arg(long)]
    root: PathBuf,
    /// Manifest path (default: <root>/manifest.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Simulate {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "qis")]
    sensor: SensorKind,
    #[arg(long, default_value_t = 1.0)]
    ppp: f64,
    /// PRNU strength (0 disables).
    #[arg(long, default_value_t = 0.0)]
    prnu: f64,
    #[arg(long)]
    bits: Option<u8>,
    /// Also write a PGM preview next to each QRF1 frame.
    #[arg(long)]
    pgm: bool,
}

#[derive(Args, Debug, Clone)]
struct Optim {
    #[arg(long, default_value_t = 1e-3)]
    lr: f32,
    /// Use SGD with this momentum instead of Adam.
    #[arg(long)]
    sgd_momentum: Option<f32>,
    #[arg(long, default_value_t = 32)]
    batch: usize,
}

impl Optim {
    fn settings(&self) -> OptimizerSettings {
        match self.sgd_momentum {
            Some(momentum) => OptimizerSettings::Sgd { lr: self.lr, momentum },
            None => OptimizerSettings::Adam { lr: self.lr },
        }
    }
}

#[derive(Args, Debug, Clone)]
struct StudentOpts {
    #[arg(long, default_value = "shallow")]
    entrance: EntranceKind,
    #[arg(long, default_value = "mosaic")]
    layout: InputLayout,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f32,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    /// Comma-separated classifier layer indices for the perceptual loss.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_STUDENT_TAPS.to_vec())]
    taps: Vec<usize>,
    /// Initialize the student classifier randomly instead of from the teacher.
    #[arg(long)]
    cold_start: bool,
    #[command(flatten)]
    optim: Optim,
}

impl StudentOpts {
    fn protocol_config(&self, protocol: Protocol, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            protocol,
            entrance: self.entrance,
            layout: self.layout,
            lambda: self.lambda,
            epochs: self.epochs,
            batch_size: self.optim.batch,
            optimizer: self.optim.settings(),
            seed,
            tap_layers: Some(self.taps.clone()),
            warm_start: !self.cold_start,
        }
    }
}

#[derive(Args, Debug)]
struct TrainTeacher {
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "toy")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.9)]
    accuracy_floor: f64,
    #[arg(long, value_delimiter = ',')]
    taps: Option<Vec<usize>>,
    /// Write the training record CSV here.
    #[arg(long)]
    record: Option<PathBuf>,
    #[command(flatten)]
    optim: Optim,
}

#[derive(Args, Debug)]
struct TrainStudent {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "student-teacher")]
    protocol: Protocol,
    #[arg(long, default_value = "qis")]
    sensor: SensorKind,
    #[arg(long, default_value_t = 1.0)]
    ppp: f64,
    #[arg(long, default_value_t = 0.0)]
    prnu: f64,
    #[arg(long)]
    record: Option<PathBuf>,
    /// Keep the final-epoch weights instead of the best-validation ones.
    #[arg(long)]
    last: bool,
    #[command(flatten)]
    opts: StudentOpts,
}

#[derive(Args, Debug)]
struct Evaluate {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Sensor and photon level for student checkpoints.
    #[arg(long, default_value = "qis")]
    sensor: SensorKind,
    #[arg(long, default_value_t = 1.0)]
    ppp: f64,
    #[arg(long, default_value_t = 0.0)]
    prnu: f64,
}

#[derive(Args, Debug)]
struct Sweep {
    #[arg(long)]
    data: PathBuf,
    /// Teacher checkpoint; trained and saved to <out>/teacher.qck when absent.
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PPP.to_vec())]
    ppp: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![SensorKind::Qis, SensorKind::Cis])]
    sensors: Vec<SensorKind>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![Protocol::StudentTeacher, Protocol::FineTune])]
    protocols: Vec<Protocol>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![EntranceKind::Shallow])]
    entrances: Vec<EntranceKind>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.0)]
    prnu: f64,
    #[arg(long, default_value_t = 30)]
    teacher_epochs: usize,
    #[command(flatten)]
    opts: StudentOpts,
}

#[derive(Args, Debug)]
struct Report {
    /// Results CSV, or a sweep directory containing results.csv.
    #[arg(long)]
    results: PathBuf,
    /// Directory for the per-figure CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LambdaGridArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01f32, 0.1, 1.0])]
    lambdas: Vec<f32>,
    #[arg(long, default_value = "qis")]
    sensor: SensorKind,
    #[arg(long, default_value_t = 0.25)]
    ppp: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0u64, 1, 2])]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    opts: StudentOpts,
}

#[derive(Args, Debug)]
struct Diagnose {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    teacher: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_PPP.to_vec())]
    ppp: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![SensorKind::Qis, SensorKind::Cis])]
    sensors: Vec<SensorKind>,
    /// Number of test images to use (0 = all).
    #[arg(long, default_value_t = 0)]
    images: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Append `--key value` for config entries whose flag was not given on the
/// command line and which the selected subcommand accepts.
fn apply_config(args: Vec<OsString>) -> Result<Vec<OsString>, Error> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let path = strs.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            strs.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(String::from)
        }
    });
    let Some(path) = path else { return Ok(args) };
    let entries = read_config(Path::new(&path))?;
    let cmd = Cli::command();
    let sub_name = strs.iter().skip(1).find(|a| cmd.find_subcommand(a.as_str()).is_some());
    let Some(sub_name) = sub_name else { return Ok(args) };
    let sub = cmd.find_subcommand(sub_name).expect("found above");
    let given = |key: &str| {
        strs.iter()
            .any(|a| a == &format!("--{key}") || a.starts_with(&format!("--{key}=")))
    };
    let mut out = args;
    for (key, value) in entries {
        if key == "config" || given(&key) {
            continue;
        }
        let arg = sub
            .get_arguments()
            .chain(cmd.get_arguments())
            .find(|a| a.get_long() == Some(key.as_str()));
        let Some(arg) = arg else {
            log::debug!("config key {key} does not apply to {sub_name}");
            continue;
        };
        if arg.get_action().takes_values() {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else if matches!(value.as_str(), "true" | "1" | "yes") {
            out.push(format!("--{key}").into());
        }
    }
    Ok(out)
}

fn load_splits(data: &Path) -> Result<(DatasetManifest, Splits), Error> {
    let manifest = DatasetManifest::open(data)?;
    let splits = manifest.load_images()?;
    Ok((manifest, splits))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn sensor_for(kind: SensorKind, ppp: f64, prnu: f64, seed: u64, splits: &Splits) -> Result<SensorConfig, Error> {
    let calibration: Vec<RgbImage> = splits.train.iter().map(|s| s.image.clone()).collect();
    let mut cfg = SensorConfig::for_kind(kind).with_gain(calibrate_gain(&calibration, ppp)?);
    cfg.prnu_strength = prnu;
    cfg.prnu_seed = derive_seed(seed, &[hash_str("prnu")]);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Cmd::GenData(a) => {
            let m = gen_synthetic_dataset(&a.out, a.classes, a.per_class, a.size, cli.seed)?;
            let [tr, va, te] = m.split_counts();
            println!(
                "wrote {} images to {} (train {tr}, val {va}, test {te})",
                m.entries.len(),
                a.out.display()
            );
        }
        Cmd::Ingest(a) => {
            let m = ingest_folder(&a.root)?;
            let out = a.out.unwrap_or_else(|| a.root.join(MANIFEST_FILE));
            m.save(&out)?;
            let [tr, va, te] = m.split_counts();
            println!(
                "{} classes, {} images (train {tr}, val {va}, test {te}) -> {}",
                m.n_classes(),
                m.entries.len(),
                out.display()
            );
        }
        Cmd::Simulate(a) => {
            let mut files: Vec<PathBuf> = fs::read_dir(&a.input)
                .map_err(|e| Error::Io {
                    path: a.input.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ppm")))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(Error::Data(format!("no PPM images in {}", a.input.display())));
            }
            let images = files
                .iter()
                .map(|p| RgbImage::read_ppm(p))
                .collect::<Result<Vec<_>, _>>()?;
            let mut cfg = SensorConfig::for_kind(a.sensor).with_gain(calibrate_gain(&images, a.ppp)?);
            if let Some(bits) = a.bits {
                cfg.adc_bits = bits;
            }
            cfg.prnu_strength = a.prnu;
            cfg.prnu_seed = derive_seed(cli.seed, &[hash_str("prnu")]);
            cfg.validate()?;
            fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            for (i, (path, img)) in files.iter().zip(&images).enumerate() {
                let mask = (a.prnu > 0.0)
                    .then(|| cfg.prnu_mask(img.width(), img.height()))
                    .transpose()?;
                let frame = simulate_frame(img, &cfg, mask.as_ref(), derive_seed(cli.seed, &[i as u64, 0]))?;
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                frame.write_qrf(&a.out.join(format!("{stem}.qrf")))?;
                if a.pgm {
                    frame.write_pgm(&a.out.join(format!("{stem}.pgm")))?;
                }
            }
            println!(
                "simulated {} frames at {} ppp (alpha {:.4}) into {}",
                images.len(),
                a.ppp,
                cfg.gain_alpha,
                a.out.display()
            );
        }
        Cmd::TrainTeacher(a) => {
            let (m, splits) = load_splits(&a.data)?;
            let (w, h) = (splits.train[0].image.width(), splits.train[0].image.height());
            let mut spec = ClassifierSpec::new(a.classifier, m.n_classes(), (h, w));
            if let Some(t) = a.taps {
                spec = spec.with_taps(t);
            }
            let cfg = TeacherConfig {
                epochs: a.epochs,
                batch_size: a.optim.batch,
                optimizer: a.optim.settings(),
                seed: cli.seed,
                accuracy_floor: a.accuracy_floor,
            };
            let run = train_teacher(&splits.train, &splits.val, spec, &cfg)?;
            run.teacher.save(&a.out)?;
            if let Some(r) = a.record {
                write(&r, &run.record.to_csv())?;
            }
            println!(
                "teacher clean validation accuracy {:.3}{} -> {}",
                run.val_accuracy,
                if run.under_trained { " (UNDER-TRAINED)" } else { "" },
                a.out.display()
            );
        }
        Cmd::TrainStudent(a) => {
            let (_, splits) = load_splits(&a.data)?;
            let teacher = Teacher::load(&a.teacher)?;
            let sensor = sensor_for(a.sensor, a.ppp, a.prnu, cli.seed, &splits)?;
            let (w, h) = (splits.train[0].image.width(), splits.train[0].image.height());
            let mask = (a.prnu > 0.0).then(|| sensor.prnu_mask(w, h)).transpose()?;
            let data = NoisyDataset {
                train: &splits.train,
                val: &splits.val,
                sensor,
                mask,
                eval_seed: derive_seed(cli.seed, &[hash_str("eval")]),
                n_classes: teacher.classifier.spec.n_classes,
            };
            let proto = a.opts.protocol_config(a.protocol, cli.seed);
            let run = train_student(&data, Some(&teacher), &teacher.classifier.spec.clone(), &proto)?;
            let model = if a.last { &run.last } else { &run.best };
            model.save(&a.out)?;
            if let Some(r) = a.record {
                write(&r, &run.record.to_csv())?;
            }
            let best = run.record.epochs.iter().map(|e| e.val_acc).fold(0.0, f64::max);
            println!(
                "best validation accuracy {best:.3} at epoch {} -> {}",
                run.best_epoch,
                a.out.display()
            );
        }
        Cmd::Evaluate(a) => {
            let (_, splits) = load_splits(&a.data)?;
            let labels: Vec<usize> = splits.test.iter().map(|s| s.label).collect();
            let (manifest, _) = load_model(&a.model)?;
            let ev = match manifest.role {
                ModelRole::Teacher => {
                    let t = Teacher::load(&a.model)?;
                    let imgs: Vec<_> = splits.test.iter().map(|s| &s.image).collect();
                    evaluate(&t, &imgs, &labels)?
                }
                ModelRole::Student => {
                    let s = Student::load(&a.model)?;
                    let sensor = sensor_for(a.sensor, a.ppp, a.prnu, cli.seed, &splits)?;
                    let (w, h) = (splits.test[0].image.width(), splits.test[0].image.height());
                    let mask = (a.prnu > 0.0).then(|| sensor.prnu_mask(w, h)).transpose()?;
                    let eval_seed = derive_seed(cli.seed, &[hash_str("eval")]);
                    let frames = fixed_frames(&splits.test, &sensor, mask.as_ref(), eval_seed, FRAME_TAG_TEST)?;
                    let refs: Vec<_> = frames.iter().collect();
                    evaluate(&s, &refs, &labels)?
                }
            };
            println!(
                "accuracy {:.4} over {} test images, mean confidence {:.4}",
                ev.accuracy, ev.n, ev.mean_confidence
            );
            for (c, acc) in ev.per_class.iter().enumerate() {
                match acc {
                    Some(acc) => println!("  class {c}: {acc:.4}"),
                    None => println!("  class {c}: no test images"),
                }
            }
        }
        Cmd::Sweep(a) => {
            let (m, splits) = load_splits(&a.data)?;
            fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            let teacher = match &a.teacher {
                Some(p) => Teacher::load(p)?,
                None => {
                    let (w, h) = (splits.train[0].image.width(), splits.train[0].image.height());
                    let cfg = TeacherConfig {
                        epochs: a.teacher_epochs,
                        seed: cli.seed,
                        ..TeacherConfig::default()
                    };
                    let run = train_teacher(
                        &splits.train,
                        &splits.val,
                        ClassifierSpec::toy(m.n_classes(), (h, w)),
                        &cfg,
                    )?;
                    run.teacher.save(&a.out.join("teacher.qck"))?;
                    run.teacher
                }
            };
            let spec = SweepSpec {
                ppp: a.ppp,
                sensors: a.sensors,
                protocols: a.protocols,
                entrances: a.entrances,
                seeds: a.seeds,
                student: a.opts.protocol_config(Protocol::StudentTeacher, 0),
                prnu_strength: a.prnu,
                master_seed: cli.seed,
            };
            let classifier = teacher.classifier.spec.clone();
            let ctx = SweepContext {
                splits: &splits,
                teacher: &teacher,
                classifier: &classifier,
            };
            let out = run_sweep(&spec, &ctx, &a.out, cli.threads)?;
            println!("{}", report(&out.table)?.text);
            if !out.failures.is_empty() {
                println!(
                    "{} cells failed; see {}",
                    out.failures.len(),
                    a.out.join("failures.txt").display()
                );
            }
        }
        Cmd::Report(a) => {
            let path = if a.results.is_dir() {
                a.results.join("results.csv")
            } else {
                a.results.clone()
            };
            let text = fs::read_to_string(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let rep = report(&ResultTable::from_csv(&text)?)?;
            print!("{}", rep.text);
            if let Some(dir) = a.out {
                write(&dir.join("accuracy_by_protocol.csv"), &rep.by_protocol_csv)?;
                write(&dir.join("accuracy_by_sensor.csv"), &rep.by_sensor_csv)?;
                write(&dir.join("report.txt"), &rep.text)?;
            }
        }
        Cmd::LambdaGrid(a) => {
            let (_, splits) = load_splits(&a.data)?;
            let teacher = Teacher::load(&a.teacher)?;
            let spec = SweepSpec {
                ppp: vec![a.ppp],
                sensors: vec![a.sensor],
                protocols: vec![Protocol::StudentTeacher],
                entrances: vec![a.opts.entrance],
                seeds: a.seeds,
                student: a.opts.protocol_config(Protocol::StudentTeacher, 0),
                prnu_strength: 0.0,
                master_seed: cli.seed,
            };
            let classifier = teacher.classifier.spec.clone();
            let ctx = SweepContext {
                splits: &splits,
                teacher: &teacher,
                classifier: &classifier,
            };
            let grid = lambda_grid(&spec, &ctx, &a.lambdas, a.sensor, a.ppp, a.opts.entrance)?;
            print!("{}", grid.to_csv());
            println!(
                "selected lambda = {} (mean validation accuracy {:.3})",
                grid.best,
                grid.mean_val(grid.best)
            );
            if let Some(p) = a.out {
                write(&p, &grid.to_csv())?;
            }
        }
        Cmd::DiagnosePerceptual(a) => {
            let (_, splits) = load_splits(&a.data)?;
            let teacher = Teacher::load(&a.teacher)?;
            let n = if a.images == 0 {
                splits.test.len()
            } else {
                a.images.min(splits.test.len())
            };
            let images: Vec<RgbImage> = splits.test.iter().take(n).map(|s| s.image.clone()).collect();
            let mut csv = String::from("sensor,ppp,mean_lp,n\n");
            for kind in a.sensors {
                let rows = perceptual_diagnostic(&teacher, &images, &a.ppp, &SensorConfig::for_kind(kind), cli.seed)?;
                for r in rows {
                    csv.push_str(&format!("{},{},{:.6},{}\n", r.sensor, r.ppp, r.mean_lp, r.n));
                }
            }
            print!("{csv}");
            if let Some(p) = a.out {
                write(&p, &csv)?;
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        Error::InvalidParameter(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let args = match apply_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
