//! `vanish`: fit, apply and benchmark approximate-vanishing-ideal feature
//! maps from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use vanish_kit::data::{self, Dataset, FeatureTable, LabelColumn};
use vanish_kit::oavi::{check_compatible, FitReport};
use vanish_kit::par::with_threads;
use vanish_kit::pipeline::{
    self, fit_class_models, fit_pipeline, grid_search, ClassifierModel, PipelineConfig, Scaler,
    PSI_GRID, RADIUS_GRID,
};
use vanish_kit::{Mode, OaviConfig, SolverKind};

#[derive(Parser)]
#[command(
    name = "vanish",
    version,
    about = "Approximate vanishing ideal generators as classification features"
)]
struct Cli {
    /// Worker threads for per-class fits and data-parallel kernels.
    #[arg(long, global = true, env = "VANISH_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-class generators and a linear classifier; write the model as JSON.
    Fit(FitArgs),
    /// Write |g(x)| for every generator of a fitted model as CSV.
    Transform(ApplyArgs),
    /// Predict labels with a fitted model; reports the error rate when labels are present.
    Predict(ApplyArgs),
    /// Time OAVI fits on subsets of increasing size.
    Bench(BenchArgs),
    /// Write the synthetic two-variety dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,

    /// Label column: `last`, a header name, or a zero-based index.
    #[arg(long, default_value = "last")]
    label_col: String,
}

#[derive(Args, Clone)]
struct OaviArgs {
    /// Vanishing threshold on the mean squared error.
    #[arg(long, default_value_t = 0.005)]
    psi: f64,

    /// Bound on the l1 norm of a generator's coefficient vector.
    #[arg(long, default_value_t = 1000.0)]
    tau: f64,

    /// Solver iteration cap per border term.
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,

    /// Solver accuracy; defaults to 0.01 * psi.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    oavi: OaviArgs,

    #[arg(long, default_value = "cg")]
    solver: SolverKind,

    #[arg(long, default_value = "ihb")]
    mode: Mode,

    /// l1 radius of the classifier weights.
    #[arg(long, default_value_t = 1.0)]
    classifier_radius: f64,

    /// Seed for the cross-validation folds of --grid.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Pick psi and the classifier radius by 3-fold cross-validation over the standard grid.
    #[arg(long)]
    grid: bool,

    /// Write every solver iterate to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,

    /// Model JSON path.
    #[arg(long, default_value = "model.json")]
    output: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    /// CSV file containing the model's feature columns.
    #[arg(long)]
    input: PathBuf,

    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,

    /// Label column; by default the only column that is not a feature, if any.
    #[arg(long)]
    label_col: Option<String>,

    /// Output CSV path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// CSV file to subsample; the synthetic dataset is generated when omitted.
    #[arg(long)]
    input: Option<PathBuf>,

    #[arg(long, default_value = "last")]
    label_col: String,

    #[command(flatten)]
    oavi: OaviArgs,

    /// Comma-separated solvers.
    #[arg(long, value_delimiter = ',', default_value = "cg,bpcg")]
    solver: Vec<SolverKind>,

    /// Comma-separated modes; incompatible solver/mode pairs are skipped.
    #[arg(long, value_delimiter = ',', default_value = "plain,ihb,wihb")]
    mode: Vec<Mode>,

    /// Comma-separated subset sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
    sizes: Vec<usize>,

    #[arg(long, default_value_t = 3)]
    repeats: usize,

    /// Seed of the first repeat; repeat r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Noise of the generated data.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,

    /// Per-repeat CSV path; the summary goes to stdout.
    #[arg(long, default_value = "bench.csv")]
    output: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Points per class.
    #[arg(long, default_value_t = 1000)]
    per_class: usize,

    /// Standard deviation of the Gaussian noise on every coordinate.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    output: PathBuf,
}

/// A failure and the exit code it maps to: 1 for runtime and numeric
/// failures, 2 for usage, configuration and input errors.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

/// Library errors: numeric trouble is a runtime failure, everything else
/// stems from the input or the configuration.
fn lib(error: vanish_kit::Error) -> Failure {
    match error {
        vanish_kit::Error::Numeric(_) | vanish_kit::Error::Infeasible { .. } => runtime(error),
        _ => usage(error),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    if threads == Some(0) {
        eprintln!("error: VANISH_THREADS / --threads must be at least 1");
        return ExitCode::from(2);
    }
    match with_threads(threads, || run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome<()> {
    match command {
        Command::Fit(args) => fit(args),
        Command::Transform(args) => transform(args),
        Command::Predict(args) => predict(args),
        Command::Bench(args) => bench(args),
        Command::Generate(args) => generate(args),
    }
}

fn label_column(spec: &str) -> LabelColumn {
    if spec == "last" {
        LabelColumn::Last
    } else {
        LabelColumn::parse(spec)
    }
}

fn oavi_config(args: &OaviArgs, solver: SolverKind, mode: Mode) -> Outcome<OaviConfig> {
    if args.epsilon.is_some_and(|e| !(e > 0.0)) {
        return Err(usage(anyhow!("--epsilon must be positive")));
    }
    let mut cfg = OaviConfig::new(args.psi, args.tau, solver, mode);
    cfg.max_iters = args.max_iters;
    cfg.epsilon = args.epsilon;
    cfg.validate().map_err(lib)?;
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Outcome<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn csv_writer(path: &Path) -> Outcome<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(runtime)
}

fn finish_csv(mut w: csv::Writer<std::fs::File>, path: &Path) -> Outcome<()> {
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| runtime(anyhow::Error::new(e).context(format!("writing {}", path.display())))
}

fn fit(args: FitArgs) -> Outcome<()> {
    let mut cfg = oavi_config(&args.oavi, args.solver, args.mode)?;
    cfg.trace = args.trace.is_some();
    if !(args.classifier_radius >= 0.0) {
        return Err(usage(anyhow!("--classifier-radius must be nonnegative")));
    }
    let ds =
        data::load_csv(&args.input.input, &label_column(&args.input.label_col)).map_err(lib)?;
    let mut config = PipelineConfig {
        oavi: cfg,
        classifier_radius: args.classifier_radius,
    };
    if args.grid {
        let grid =
            grid_search(&ds, &config.oavi, &PSI_GRID, &RADIUS_GRID, 3, args.seed).map_err(lib)?;
        println!("psi\tclassifier_radius\tcv_error");
        for p in &grid.points {
            println!("{}\t{}\t{:.4}", p.psi, p.classifier_radius, p.cv_error);
        }
        println!(
            "best: psi {} classifier_radius {}",
            grid.best.psi, grid.best.classifier_radius
        );
        config.oavi.psi = grid.best.psi;
        config.classifier_radius = grid.best.classifier_radius;
    }
    let fitted = fit_pipeline(&ds, &config).map_err(lib)?;
    let model = &fitted.model;

    println!("class\tlabel\t|G|\t|O|\tmax_degree\tsparsity\tfit_seconds");
    for (c, (report, seconds)) in fitted.reports.iter().zip(&fitted.fit_seconds).enumerate() {
        let m = &report.model;
        let spar = pipeline::sparsity(&m.g).map_or_else(|_| "-".to_string(), |s| format!("{s:.3}"));
        println!(
            "{c}\t{}\t{}\t{}\t{}\t{spar}\t{seconds:.4}",
            model.label_names[c],
            m.g.len(),
            m.o.len(),
            m.max_generator_degree()
        );
        for w in &report.warnings {
            eprintln!("warning: class {}: {w}", model.label_names[c]);
        }
    }
    let train_error = model.evaluate(&ds.x, &ds.y).map_err(lib)?;
    println!("train_error\t{train_error:.4}");

    if let Some(path) = &args.trace {
        write_trace(path, &fitted.reports, &model.label_names)?;
    }
    write_file(&args.output, &model.to_json().map_err(runtime)?)?;
    println!("model written to {}", args.output.display());
    Ok(())
}

fn write_trace(path: &Path, reports: &[FitReport], labels: &[String]) -> Outcome<()> {
    let mut w = csv_writer(path)?;
    let err = csv_error(path);
    w.write_record([
        "class",
        "candidate",
        "term",
        "solver",
        "iteration",
        "objective",
        "gap",
    ])
    .map_err(&err)?;
    for (report, label) in reports.iter().zip(labels) {
        for row in &report.trace {
            w.write_record([
                label.clone(),
                row.candidate.to_string(),
                row.term.clone(),
                row.solver.to_string(),
                row.iteration.to_string(),
                row.objective.to_string(),
                row.gap.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    finish_csv(w, path)
}

fn load_model(path: &Path) -> Outcome<ClassifierModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    ClassifierModel::from_json(&text)
        .with_context(|| format!("loading model {}", path.display()))
        .map_err(usage)
}

fn load_for(model: &ClassifierModel, args: &ApplyArgs) -> Outcome<FeatureTable> {
    let label = args.label_col.as_deref().map(label_column);
    data::load_features(&args.input, &model.feature_names, label.as_ref()).map_err(lib)
}

fn transform(args: ApplyArgs) -> Outcome<()> {
    let model = load_model(&args.model)?;
    let FeatureTable { x, labels } = load_for(&model, &args)?;
    let features = model.transform(&x).map_err(lib)?;
    let mut header: Vec<String> = model
        .class_models
        .iter()
        .zip(&model.label_names)
        .flat_map(|(m, label)| m.g.iter().map(move |g| format!("{label}:{}", g.leading())))
        .collect();
    if labels.is_some() {
        header.push("label".into());
    }
    let mut w = csv_writer(&args.output)?;
    let err = csv_error(&args.output);
    w.write_record(&header).map_err(&err)?;
    for (r, row) in features.iter().enumerate() {
        let mut record: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some(l) = &labels {
            record.push(l[r].clone());
        }
        w.write_record(&record).map_err(&err)?;
    }
    finish_csv(w, &args.output)?;
    println!(
        "{} rows x {} features written to {}",
        features.len(),
        model.num_generators(),
        args.output.display()
    );
    Ok(())
}

fn predict(args: ApplyArgs) -> Outcome<()> {
    let model = load_model(&args.model)?;
    let FeatureTable { x, labels } = load_for(&model, &args)?;
    let predicted = model.predict(&x).map_err(lib)?;
    let mut w = csv_writer(&args.output)?;
    let err = csv_error(&args.output);
    match &labels {
        Some(_) => w.write_record(["prediction", "label"]),
        None => w.write_record(["prediction"]),
    }
    .map_err(&err)?;
    for (r, &p) in predicted.iter().enumerate() {
        let name = &model.label_names[p];
        match &labels {
            Some(l) => w.write_record([name, &l[r]]),
            None => w.write_record([name]),
        }
        .map_err(&err)?;
    }
    finish_csv(w, &args.output)?;
    println!(
        "{} predictions written to {}",
        predicted.len(),
        args.output.display()
    );
    if let Some(l) = labels {
        let wrong = predicted
            .iter()
            .zip(&l)
            .filter(|(p, t)| &model.label_names[**p] != *t)
            .count();
        let rate = if l.is_empty() {
            0.0
        } else {
            wrong as f64 / l.len() as f64
        };
        println!("error_rate\t{rate:.4}");
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Outcome<()> {
    let ds = data::generate_synthetic(args.per_class, args.noise, args.seed).map_err(lib)?;
    data::write_csv(&ds, &args.output).map_err(runtime)?;
    println!("{} rows written to {}", ds.len(), args.output.display());
    Ok(())
}

/// Per-class scaled columns of `ds`; every class must be present.
fn class_columns(ds: &Dataset) -> Outcome<Vec<vanish_kit::linalg::Columns>> {
    let scaler = Scaler::fit(&ds.x).map_err(lib)?;
    (0..ds.num_classes())
        .map(|c| scaler.apply_columns(&ds.class_rows(c)).map_err(lib))
        .collect()
}

fn bench(args: BenchArgs) -> Outcome<()> {
    if args.sizes.is_empty() || args.sizes.contains(&0) || args.repeats == 0 {
        return Err(usage(anyhow!(
            "--sizes must be positive and --repeats at least 1"
        )));
    }
    let mut combos = Vec::new();
    for &solver in &args.solver {
        for &mode in &args.mode {
            if check_compatible(solver, mode).is_ok() {
                combos.push((solver, mode, oavi_config(&args.oavi, solver, mode)?));
            }
        }
    }
    if combos.is_empty() {
        return Err(usage(anyhow!("no compatible solver/mode pair selected")));
    }
    let source = match &args.input {
        Some(path) => Some(data::load_csv(path, &label_column(&args.label_col)).map_err(lib)?),
        None => None,
    };
    // Subsets are drawn once per (size, repeat) so every configuration sees
    // the same data.
    let mut subsets = Vec::new();
    for &m in &args.sizes {
        for r in 0..args.repeats {
            let seed = args.seed + r as u64;
            let ds = match &source {
                Some(ds) => data::sample(ds, m, seed).map_err(lib)?,
                None => data::generate_synthetic(m.div_ceil(2), args.noise, seed).map_err(lib)?,
            };
            subsets.push((m, r, class_columns(&ds)?));
        }
    }

    let mut w = csv_writer(&args.output)?;
    let err = csv_error(&args.output);
    w.write_record([
        "solver",
        "mode",
        "m",
        "repeat",
        "fit_seconds",
        "g_count",
        "o_count",
    ])
    .map_err(&err)?;
    println!("solver\tmode\tm\tmean_seconds\tstd_seconds\tmean_g\tmean_o");
    for (solver, mode, cfg) in &combos {
        for &m in &args.sizes {
            let mut times = Vec::new();
            let (mut g_total, mut o_total) = (0usize, 0usize);
            for (_, r, classes) in subsets.iter().filter(|s| s.0 == m) {
                let fits = fit_class_models(classes, cfg).map_err(lib)?;
                let seconds: f64 = fits.iter().map(|f| f.1).sum();
                let g: usize = fits.iter().map(|f| f.0.model.g.len()).sum();
                let o: usize = fits.iter().map(|f| f.0.model.o.len()).sum();
                w.write_record([
                    solver.to_string(),
                    mode.to_string(),
                    m.to_string(),
                    r.to_string(),
                    seconds.to_string(),
                    g.to_string(),
                    o.to_string(),
                ])
                .map_err(&err)?;
                times.push(seconds);
                g_total += g;
                o_total += o;
            }
            let n = times.len() as f64;
            let mean = times.iter().sum::<f64>() / n;
            let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            println!(
                "{solver}\t{mode}\t{m}\t{mean:.5}\t{:.5}\t{:.1}\t{:.1}",
                var.sqrt(),
                g_total as f64 / n,
                o_total as f64 / n
            );
        }
    }
    finish_csv(w, &args.output)
}
