use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geomap::data::{self, LabeledDataset};
use geomap::experiments::{emit_report, DatasetSource, Experiment, ExperimentConfig, ExperimentReport};
use geomap::gam::{self, GamParams};
use geomap::{Error, ErrorKind, Result};
use log::info;

#[derive(Parser, Debug)]
#[command(name = "geomap", version, about = "Signed-affinity orthonormal mapping and its experiment protocols")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the split and mapping seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit or apply a mapping.
    #[command(subcommand)]
    Gam(GamCommand),
    /// Run an experiment protocol and write its reports.
    #[command(subcommand)]
    Experiment(Protocol),
    /// Dataset utilities.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Subcommand, Debug)]
enum GamCommand {
    /// Learn a mapping from a labeled dataset.
    Fit(FitArgs),
    /// Project a dataset with a saved mapping.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Written as CSV or HSB depending on the extension.
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Training data (.csv or .hsb). Defaults to the config's dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file; defaults to `<out>/model.gam`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Writes the signed affinity in Matrix Market coordinate form.
    #[arg(long)]
    affinity_out: Option<PathBuf>,
    #[command(flatten)]
    gam: GamArgs,
}

#[derive(Args, Debug, Default)]
struct GamArgs {
    #[arg(long)]
    v_w: Option<usize>,
    #[arg(long)]
    v_b: Option<usize>,
    /// Mapped dimension; defaults to one less than the input dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    armijo_c1: Option<f64>,
    #[arg(long)]
    backtrack_factor: Option<f64>,
    #[arg(long)]
    max_backtracks: Option<usize>,
    #[arg(long)]
    initial_step: Option<f64>,
}

impl GamArgs {
    fn apply(&self, p: &mut GamParams) {
        if let Some(v) = self.v_w {
            p.v_w = v;
        }
        if let Some(v) = self.v_b {
            p.v_b = v;
        }
        if self.dim.is_some() {
            p.target_dim = self.dim;
        }
        if let Some(v) = self.restarts {
            p.restarts = v;
        }
        if let Some(v) = self.max_iters {
            p.cg.max_iters = v;
        }
        if let Some(v) = self.grad_tol {
            p.cg.grad_tol = v;
        }
        if let Some(v) = self.armijo_c1 {
            p.cg.armijo_c1 = v;
        }
        if let Some(v) = self.backtrack_factor {
            p.cg.backtrack_factor = v;
        }
        if let Some(v) = self.max_backtracks {
            p.cg.max_backtracks = v;
        }
        if let Some(v) = self.initial_step {
            p.cg.initial_step = v;
        }
    }
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Dataset (.csv or .hsb) used instead of the config's.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Linear SVM cost parameter.
    #[arg(long)]
    svm_c: Option<f64>,
    /// KPCA uses gamma = scale / input dimension.
    #[arg(long)]
    kpca_gamma_scale: Option<f64>,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    gam: GamArgs,
}

#[derive(Subcommand, Debug)]
enum Protocol {
    /// Every classifier in original and mapped space.
    Table2(ExperimentArgs),
    /// Linear SVM over the neighbor grid.
    Table1(ExperimentArgs),
    /// Final cost over the mapped-dimension grid.
    Fig2(ExperimentArgs),
    /// DR methods over the dimension grid.
    DrSweep(ExperimentArgs),
    /// Linear SVM and timings over training sizes.
    TrainSweep(ExperimentArgs),
}

impl Protocol {
    fn name(&self) -> &'static str {
        match self {
            Protocol::Table2(_) => "table2",
            Protocol::Table1(_) => "table1",
            Protocol::Fig2(_) => "fig2",
            Protocol::DrSweep(_) => "dr-sweep",
            Protocol::TrainSweep(_) => "train-sweep",
        }
    }

    fn args(&self) -> &ExperimentArgs {
        match self {
            Protocol::Table2(a) | Protocol::Table1(a) | Protocol::Fig2(a) | Protocol::DrSweep(a) | Protocol::TrainSweep(a) => a,
        }
    }
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Converts between CSV and HSB, chosen by file extension.
    Convert { input: PathBuf, output: PathBuf },
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(OsStr::to_str).map(str::to_ascii_lowercase)
}

fn source_for(path: &Path) -> Result<DatasetSource> {
    match extension(path).as_deref() {
        Some("csv") => Ok(DatasetSource::Csv { path: path.to_path_buf() }),
        Some("hsb") => Ok(DatasetSource::Hsb { path: path.to_path_buf() }),
        _ => Err(Error::Config(format!("{}: expected a .csv or .hsb file", path.display()))),
    }
}

fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    source_for(path)?.load()
}

fn save_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    match extension(path).as_deref() {
        Some("csv") => data::save_csv(ds, path),
        Some("hsb") => data::save_hsb(ds, path),
        _ => Err(Error::Config(format!("{}: expected a .csv or .hsb file", path.display()))),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn base_config(cli: &Cli, data: Option<&Path>) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, data) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(d)) => ExperimentConfig::new(source_for(d)?),
        (None, None) => return Err(Error::Config("need --config or --data".into())),
    };
    if let Some(d) = data {
        cfg.dataset = source_for(d)?;
    }
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
        cfg.gam.seed = seed;
    }
    Ok(cfg)
}

fn gam_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let mut cfg = base_config(cli, args.data.as_deref())?;
    args.gam.apply(&mut cfg.gam);
    cfg.gam.cg.validate().map_err(|e| Error::Config(e.to_string()))?;
    let train = cfg.dataset.load()?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Some(path) = &args.affinity_out {
        let sets = geomap::affinity::neighbor_sets(&train, cfg.gam.v_w, cfg.gam.v_b)?;
        let graph = geomap::affinity::build_affinity(&sets, train.labels())?;
        write_file(path, &graph.to_matrix_market())?;
    }
    let model = gam::fit(&train, &cfg.gam)?;
    let model_path = args.model.clone().unwrap_or_else(|| out.join("model.gam"));
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    gam::save_model(&model, &model_path)?;
    if cli.verbose {
        if let Some(opt) = &model.opt_result {
            let log_path = out.join("iterations.csv");
            write_file(&log_path, &opt.iteration_log())?;
            info!("iteration log written to {}", log_path.display());
        }
    }
    let opt = model.opt_result.as_ref();
    println!(
        "n={} m={} cost={:e} iterations={} termination={} truncated={} degenerate={}",
        model.input_dim(),
        model.output_dim(),
        model.final_cost,
        opt.map_or(0, |o| o.iterations),
        opt.map_or("none".to_string(), |o| format!("{:?}", o.termination)),
        model.truncated,
        model.degenerate
    );
    println!("model written to {}", model_path.display());
    Ok(())
}

fn gam_transform(model: &Path, data_path: &Path, output: &Path) -> Result<()> {
    let model = gam::load_model(model)?;
    let ds = load_dataset(data_path)?;
    let mapped = ds.with_features(model.transform(ds.features())?)?;
    save_dataset(&mapped, output)?;
    println!("{} samples mapped {} -> {} written to {}", mapped.sample_count(), model.input_dim(), model.output_dim(), output.display());
    Ok(())
}

fn experiment(cli: &Cli, which: &Protocol) -> Result<()> {
    let args = which.args();
    let mut cfg = base_config(cli, args.data.as_deref())?;
    args.gam.apply(&mut cfg.gam);
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(k) = args.train_per_class {
        cfg.split.train_per_class = k;
    }
    if let Some(c) = args.svm_c {
        cfg.classifier_options.svm.c = c;
    }
    if let Some(g) = args.kpca_gamma_scale {
        cfg.dr.kpca_gamma_scale = g;
    }
    if args.standardize {
        cfg.standardize = true;
    }
    let exp = Experiment::new(cfg)?;
    info!("dataset: {} samples, {} bands, {} classes", exp.data.sample_count(), exp.data.dim(), exp.data.class_count());
    let report: ExperimentReport = match which {
        Protocol::Table2(_) => exp.classifier_table()?,
        Protocol::Table1(_) => exp.neighbor_sweep()?,
        Protocol::Fig2(_) => exp.dimension_sweep()?,
        Protocol::DrSweep(_) => exp.dr_sweep()?,
        Protocol::TrainSweep(_) => exp.train_size_sweep()?,
    };
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results").join(which.name()));
    for path in emit_report(&report, &dir)? {
        println!("{}", path.display());
    }
    if cli.verbose {
        for line in &report.log {
            info!("{line}");
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gam(GamCommand::Fit(args)) => gam_fit(cli, args),
        Command::Gam(GamCommand::Transform { model, data, output }) => gam_transform(model, data, output),
        Command::Experiment(which) => experiment(cli, which),
        Command::Dataset(DatasetCommand::Convert { input, output }) => {
            let ds = load_dataset(input)?;
            save_dataset(&ds, output)?;
            println!("{} samples, {} bands, {} classes written to {}", ds.sample_count(), ds.dim(), ds.class_count(), output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}
