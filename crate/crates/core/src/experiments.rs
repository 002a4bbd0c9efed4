//! Experiment protocols over original vs mapped space, and their CSV reports.
//!
//! Each protocol draws `trials` independent per-class splits (trial `t`
//! uses split seed `split.seed + t` and GAM seed `gam.seed + t`), fits the
//! mapping on the training part, and evaluates the same classifiers with
//! the same hyperparameters in both spaces. Trials run in parallel; cells
//! are merged in a fixed order so reports do not depend on scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Classifier, ClassifierKind, ClassifierOptions};
use crate::data::{self, split_per_class, standardize, LabeledDataset, SplitSpec};
use crate::dr::{apply_dr, fit_kpca, fit_lda, fit_mfa, fit_pca, DrKind};
use crate::error::{Error, Result};
use crate::gam::{self, GamParams, GraphQuadratic};
use crate::metrics::{confusion, scores};
use crate::rng;
use crate::stiefel::Termination;

/// Seeded Gaussian classes: class `k` is centered at `separation · e_k`,
/// with isotropic noise of `noise_std` in every coordinate except the last
/// `nuisance_dims`, which carry class-independent noise of `nuisance_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub separation: f64,
    pub noise_std: f64,
    pub nuisance_dims: usize,
    pub nuisance_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 3,
            dim: 10,
            per_class: 60,
            separation: 2.0,
            noise_std: 1.0,
            nuisance_dims: 1,
            nuisance_std: 5.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<LabeledDataset> {
        if self.classes < 2 || self.per_class == 0 {
            return Err(Error::Config("synthetic data needs >= 2 classes and >= 1 sample per class".into()));
        }
        if self.dim < self.classes + self.nuisance_dims {
            return Err(Error::Config(format!(
                "synthetic dim {} cannot hold {} class axes plus {} nuisance dims",
                self.dim, self.classes, self.nuisance_dims
            )));
        }
        let mut rng = rng::seeded(self.seed);
        let p = self.classes * self.per_class;
        let mut x = DMatrix::zeros(self.dim, p);
        let mut labels = Vec::with_capacity(p);
        for k in 0..self.classes {
            for s in 0..self.per_class {
                let j = k * self.per_class + s;
                for i in 0..self.dim {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let std = if i >= self.dim - self.nuisance_dims {
                        self.nuisance_std
                    } else {
                        self.noise_std
                    };
                    x[(i, j)] = z * std + if i == k { self.separation } else { 0.0 };
                }
                labels.push(k + 1);
            }
        }
        LabeledDataset::new(x, labels, self.classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    Csv { path: PathBuf },
    Hsb { path: PathBuf },
    Synthetic(SyntheticSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSource::Csv { path } => data::load_csv(path),
            DatasetSource::Hsb { path } => data::load_hsb(path),
            DatasetSource::Synthetic(spec) => spec.generate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrConfig {
    pub methods: Vec<DrKind>,
    pub dims: Vec<usize>,
    /// KPCA uses `gamma = kpca_gamma_scale / input_dim` in each space.
    pub kpca_gamma_scale: f64,
    pub mfa_k1: usize,
    pub mfa_k2: usize,
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            methods: vec![DrKind::Pca, DrKind::Lda, DrKind::Kpca, DrKind::Mfa],
            dims: (20..=60).step_by(5).collect(),
            kpca_gamma_scale: 1.0,
            mfa_k1: 9,
            mfa_k2: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// `v_w = v_b` values of the neighbor sweep.
    pub neighbors: Vec<usize>,
    /// Mapped dimensions of the cost sweep; empty means `n, n−1, …, n−40`.
    pub mapped_dims: Vec<usize>,
    pub train_sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            neighbors: vec![3, 5, 7, 9, 11, 13],
            mapped_dims: Vec::new(),
            train_sizes: vec![5, 8, 10, 15, 20],
        }
    }
}

fn default_trials() -> usize {
    10
}

fn default_split() -> SplitSpec {
    SplitSpec {
        train_per_class: 10,
        seed: 0,
    }
}

fn default_classifiers() -> Vec<ClassifierKind> {
    vec![
        ClassifierKind::LinearSvm,
        ClassifierKind::Knn(1),
        ClassifierKind::Knn(3),
        ClassifierKind::Knn(5),
        ClassifierKind::Ldc,
        ClassifierKind::Qdc,
        ClassifierKind::Tree,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    /// Per-band z-scoring with training statistics. Off for replication runs.
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default)]
    pub gam: GamParams,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub classifier_options: ClassifierOptions,
    #[serde(default)]
    pub dr: DrConfig,
    #[serde(default)]
    pub sweeps: SweepConfig,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource) -> Self {
        Self {
            dataset,
            standardize: false,
            trials: default_trials(),
            split: default_split(),
            gam: GamParams::default(),
            classifiers: default_classifiers(),
            classifier_options: ClassifierOptions::default(),
            dr: DrConfig::default(),
            sweeps: SweepConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.split.train_per_class == 0 {
            return Err(Error::Config("split.train_per_class must be at least 1".into()));
        }
        if self.gam.v_w == 0 || self.gam.v_b == 0 || self.gam.restarts == 0 {
            return Err(Error::Config("gam.v_w, gam.v_b and gam.restarts must be at least 1".into()));
        }
        self.gam.cg.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.dr.kpca_gamma_scale > 0.0) {
            return Err(Error::Config("dr.kpca_gamma_scale must be positive".into()));
        }
        if self.dr.mfa_k1 == 0 || self.dr.mfa_k2 == 0 {
            return Err(Error::Config("dr.mfa_k1 and dr.mfa_k2 must be at least 1".into()));
        }
        Ok(())
    }

    /// Copy with every data-dependent default made explicit for an
    /// `n`-dimensional dataset.
    pub fn resolved(&self, n: usize) -> Result<Self> {
        let mut out = self.clone();
        out.gam.target_dim = Some(self.gam.resolve_dim(n).map_err(|e| Error::Config(e.to_string()))?);
        if out.sweeps.mapped_dims.is_empty() {
            out.sweeps.mapped_dims = default_mapped_dims(n);
        }
        Ok(out)
    }
}

/// `n, n−1, …, n−40`, stopping at 1.
pub fn default_mapped_dims(n: usize) -> Vec<usize> {
    let low = n.saturating_sub(40).max(1);
    (low..=n).rev().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Space {
    Original,
    Mapped,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Original => "original",
            Space::Mapped => "mapped",
        }
    }
}

/// One evaluated (space, method, classifier, trial) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub experiment: String,
    pub space: Space,
    /// DR method applied before classification, or `none`.
    pub method: String,
    pub requested_dim: usize,
    /// Feature dimension the classifier saw.
    pub dim: usize,
    pub classifier: String,
    /// `v_w = v_b` used by the mapping.
    pub neighbors: usize,
    pub train_per_class: usize,
    pub trial: usize,
    /// `ok`, or the error that prevented this cell from being scored.
    pub status: String,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub flags: Vec<String>,
    pub affinity_time: Duration,
    pub cg_time: Duration,
    pub fit_time: Duration,
    pub predict_time: Duration,
}

impl CellRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One row of the cost-versus-mapped-dimension sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionRow {
    pub m: usize,
    pub cost: f64,
    pub oracle_cost: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl DimensionRow {
    pub fn relative_gap(&self) -> f64 {
        (self.cost - self.oracle_cost) / self.oracle_cost.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub experiment: String,
    pub cells: Vec<CellRecord>,
    pub dimension_rows: Vec<DimensionRow>,
    /// Cost at a full-dimensional frame, `2·tr(X(D−A)Xᵀ)`, for the cost sweep.
    pub total_energy: Option<f64>,
    pub log: Vec<String>,
    /// Resolved configuration that produced the report.
    pub config: Option<ExperimentConfig>,
}

impl ExperimentReport {
    /// The `m` with the lowest cost in the dimension sweep.
    pub fn minimizing_dim(&self) -> Option<usize> {
        self.dimension_rows
            .iter()
            .min_by(|a, b| a.cost.total_cmp(&b.cost).then(b.m.cmp(&a.m)))
            .map(|r| r.m)
    }
}

/// Loaded dataset plus resolved configuration.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: LabeledDataset,
}

struct TrialData {
    train: LabeledDataset,
    test: LabeledDataset,
    mapped_train: LabeledDataset,
    mapped_test: LabeledDataset,
    gam: gam::GamModel,
}

impl TrialData {
    fn space(&self, space: Space) -> (&LabeledDataset, &LabeledDataset) {
        match space {
            Space::Original => (&self.train, &self.test),
            Space::Mapped => (&self.mapped_train, &self.mapped_test),
        }
    }
}

struct CellKey<'a> {
    experiment: &'a str,
    space: Space,
    method: String,
    requested_dim: usize,
    classifier: String,
    neighbors: usize,
    train_per_class: usize,
    trial: usize,
}

impl CellKey<'_> {
    fn record(self, dim: usize) -> CellRecord {
        CellRecord {
            experiment: self.experiment.to_string(),
            space: self.space,
            method: self.method,
            requested_dim: self.requested_dim,
            dim,
            classifier: self.classifier,
            neighbors: self.neighbors,
            train_per_class: self.train_per_class,
            trial: self.trial,
            status: "ok".into(),
            oa: f64::NAN,
            aa: f64::NAN,
            kappa: f64::NAN,
            flags: Vec::new(),
            affinity_time: Duration::ZERO,
            cg_time: Duration::ZERO,
            fit_time: Duration::ZERO,
            predict_time: Duration::ZERO,
        }
    }
}

fn evaluate(
    cell: &mut CellRecord,
    kind: ClassifierKind,
    opts: &ClassifierOptions,
    train: &LabeledDataset,
    test: &LabeledDataset,
) -> Result<()> {
    let started = Instant::now();
    let clf = Classifier::fit(kind, train, opts)?;
    cell.fit_time = started.elapsed();
    let started = Instant::now();
    let predicted = clf.predict(test.features())?;
    cell.predict_time = started.elapsed();
    let cm = confusion(test.labels(), &predicted, test.class_count())?;
    let s = scores(&cm);
    cell.oa = s.oa;
    cell.aa = s.aa;
    cell.kappa = s.kappa;
    if s.aa_excluded_empty {
        cell.flags.push("aa_empty_class".into());
    }
    if s.kappa_degenerate {
        cell.flags.push("kappa_degenerate".into());
    }
    Ok(())
}

fn sort_cells(cells: &mut [CellRecord]) {
    cells.sort_by(|a, b| {
        (a.train_per_class, a.neighbors, a.space, &a.method, a.requested_dim, a.trial).cmp(&(
            b.train_per_class,
            b.neighbors,
            b.space,
            &b.method,
            b.requested_dim,
            b.trial,
        ))
    });
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data = config.dataset.load()?;
        let config = config.resolved(data.dim())?;
        Ok(Self { config, data })
    }

    /// Uses an already-loaded dataset; `config.dataset` is kept only for the echo.
    pub fn with_data(config: ExperimentConfig, data: LabeledDataset) -> Result<Self> {
        config.validate()?;
        let config = config.resolved(data.dim())?;
        Ok(Self { config, data })
    }

    fn report(&self, name: &str) -> ExperimentReport {
        ExperimentReport {
            experiment: name.into(),
            config: Some(self.config.clone()),
            ..ExperimentReport::default()
        }
    }

    fn prepare_trial(&self, trial: usize, train_per_class: usize, neighbors: Option<usize>) -> Result<TrialData> {
        let split = SplitSpec {
            train_per_class,
            seed: self.config.split.seed.wrapping_add(trial as u64),
        };
        let (mut train, mut test) = split_per_class(&self.data, &split)?;
        if self.config.standardize {
            let (t, stats) = standardize(&train, None)?;
            test = standardize(&test, Some(&stats))?.0;
            train = t;
        }
        let mut params = self.config.gam.clone();
        params.seed = params.seed.wrapping_add(trial as u64);
        if let Some(v) = neighbors {
            params.v_w = v;
            params.v_b = v;
        }
        let model = gam::fit(&train, &params)?;
        let mapped_train = train.with_features(model.transform(train.features())?)?;
        let mapped_test = test.with_features(model.transform(test.features())?)?;
        Ok(TrialData {
            train,
            test,
            mapped_train,
            mapped_test,
            gam: model,
        })
    }

    fn trial_log(trial: usize, t: &TrialData) -> String {
        let opt = t.gam.opt_result.as_ref();
        format!(
            "trial {trial}: train={} test={} m={} cost={:e} iterations={} termination={}{}{}",
            t.train.sample_count(),
            t.test.sample_count(),
            t.gam.output_dim(),
            t.gam.final_cost,
            opt.map_or(0, |o| o.iterations),
            opt.map_or("none".to_string(), |o| format!("{:?}", o.termination)),
            if t.gam.truncated { " truncated" } else { "" },
            if t.gam.degenerate { " degenerate-affinity" } else { "" },
        )
    }

    fn gam_flags(t: &TrialData) -> Vec<String> {
        let mut flags = Vec::new();
        if t.gam.truncated {
            flags.push("neighbors_truncated".into());
        }
        if t.gam.degenerate {
            flags.push("affinity_empty".into());
        }
        flags
    }

    /// Every configured classifier in both spaces.
    pub fn classifier_table(&self) -> Result<ExperimentReport> {
        let cfg = &self.config;
        let name = "table2";
        let per_trial: Vec<(Vec<CellRecord>, String)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let t = self
                    .prepare_trial(trial, cfg.split.train_per_class, None)
                    .map_err(|e| e.context(format!("{name} trial {trial}")))?;
                let mut cells = Vec::new();
                for space in [Space::Original, Space::Mapped] {
                    let (train, test) = t.space(space);
                    for &kind in &cfg.classifiers {
                        let mut cell = CellKey {
                            experiment: name,
                            space,
                            method: "none".into(),
                            requested_dim: train.dim(),
                            classifier: kind.to_string(),
                            neighbors: cfg.gam.v_w,
                            train_per_class: cfg.split.train_per_class,
                            trial,
                        }
                        .record(train.dim());
                        evaluate(&mut cell, kind, &cfg.classifier_options, train, test).map_err(|e| {
                            e.context(format!("{name} trial {trial} {} {kind}", space.name()))
                        })?;
                        if space == Space::Mapped {
                            cell.affinity_time = t.gam.timings.affinity;
                            cell.cg_time = t.gam.timings.optimize;
                            cell.flags.extend(Self::gam_flags(&t));
                        }
                        cells.push(cell);
                    }
                }
                Ok((cells, Self::trial_log(trial, &t)))
            })
            .collect::<Result<_>>()?;
        let mut report = self.report(name);
        for (cells, line) in per_trial {
            report.cells.extend(cells);
            report.log.push(line);
        }
        sort_cells(&mut report.cells);
        Ok(report)
    }

    /// Linear SVM in both spaces for each `v_w = v_b` in the neighbor grid.
    pub fn neighbor_sweep(&self) -> Result<ExperimentReport> {
        let cfg = &self.config;
        let name = "table1";
        if cfg.sweeps.neighbors.is_empty() {
            return Err(Error::Config("sweeps.neighbors is empty".into()));
        }
        let jobs: Vec<(usize, usize)> = cfg
            .sweeps
            .neighbors
            .iter()
            .flat_map(|&v| (0..cfg.trials).map(move |t| (v, t)))
            .collect();
        let per_job: Vec<(Vec<CellRecord>, String)> = jobs
            .into_par_iter()
            .map(|(v, trial)| {
                let t = self
                    .prepare_trial(trial, cfg.split.train_per_class, Some(v))
                    .map_err(|e| e.context(format!("{name} N={v} trial {trial}")))?;
                let mut cells = Vec::new();
                for space in [Space::Original, Space::Mapped] {
                    let (train, test) = t.space(space);
                    let kind = ClassifierKind::LinearSvm;
                    let mut cell = CellKey {
                        experiment: name,
                        space,
                        method: "none".into(),
                        requested_dim: train.dim(),
                        classifier: kind.to_string(),
                        neighbors: v,
                        train_per_class: cfg.split.train_per_class,
                        trial,
                    }
                    .record(train.dim());
                    evaluate(&mut cell, kind, &cfg.classifier_options, train, test)
                        .map_err(|e| e.context(format!("{name} N={v} trial {trial} {}", space.name())))?;
                    // truncation affects the mapping the whole row is compared against
                    cell.flags.extend(Self::gam_flags(&t));
                    if space == Space::Mapped {
                        cell.affinity_time = t.gam.timings.affinity;
                        cell.cg_time = t.gam.timings.optimize;
                    }
                    cells.push(cell);
                }
                Ok((cells, format!("N={v} {}", Self::trial_log(trial, &t))))
            })
            .collect::<Result<_>>()?;
        let mut report = self.report(name);
        for (cells, line) in per_job {
            report.cells.extend(cells);
            report.log.push(line);
        }
        sort_cells(&mut report.cells);
        Ok(report)
    }

    /// Best final cost per mapped dimension, on the training split of trial 0,
    /// next to the exact optimum.
    pub fn dimension_sweep(&self) -> Result<ExperimentReport> {
        let cfg = &self.config;
        let name = "fig2";
        let split = SplitSpec {
            train_per_class: cfg.split.train_per_class,
            seed: cfg.split.seed,
        };
        let (mut train, _) = split_per_class(&self.data, &split)?;
        if cfg.standardize {
            train = standardize(&train, None)?.0;
        }
        let n = train.dim();
        if let Some(&bad) = cfg.sweeps.mapped_dims.iter().find(|&&m| m == 0 || m > n) {
            return Err(Error::Config(format!("mapped dimension {bad} outside 1..={n}")));
        }
        let sets = crate::affinity::neighbor_sets(&train, cfg.gam.v_w, cfg.gam.v_b)?;
        let graph = crate::affinity::build_affinity(&sets, train.labels())?;
        let quad = GraphQuadratic::new(train.features(), &graph)?;
        let rows: Vec<DimensionRow> = cfg
            .sweeps
            .mapped_dims
            .par_iter()
            .map(|&m| {
                let mut params = cfg.gam.clone();
                params.target_dim = Some(m);
                let model = gam::fit(&train, &params).map_err(|e| e.context(format!("{name} m={m}")))?;
                let (_, oracle_cost) = quad.optimum(m)?;
                let opt = model.opt_result.as_ref().expect("fresh fit has a trace");
                Ok(DimensionRow {
                    m,
                    cost: model.final_cost,
                    oracle_cost,
                    iterations: opt.iterations,
                    termination: opt.termination,
                })
            })
            .collect::<Result<_>>()?;
        let mut report = self.report(name);
        report.total_energy = Some(quad.total_energy());
        report.dimension_rows = rows;
        report.log.push(format!(
            "train={} n={n} total_energy={:e} truncated={}",
            train.sample_count(),
            quad.total_energy(),
            sets.truncated
        ));
        if let Some(m) = report.minimizing_dim() {
            report.log.push(format!("lowest cost at m={m}"));
        }
        Ok(report)
    }

    /// DR method × dimension grid in both spaces, classified by linear SVM.
    pub fn dr_sweep(&self) -> Result<ExperimentReport> {
        let cfg = &self.config;
        let name = "dr-sweep";
        if cfg.dr.methods.is_empty() || cfg.dr.dims.is_empty() {
            return Err(Error::Config("dr.methods and dr.dims must be non-empty".into()));
        }
        let per_trial: Vec<(Vec<CellRecord>, String)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let t = self
                    .prepare_trial(trial, cfg.split.train_per_class, None)
                    .map_err(|e| e.context(format!("{name} trial {trial}")))?;
                let mut cells = Vec::new();
                for space in [Space::Original, Space::Mapped] {
                    let (train, test) = t.space(space);
                    for &method in &cfg.dr.methods {
                        for &d in &cfg.dr.dims {
                            let cell = self
                                .dr_cell(name, space, method, d, trial, train, test)
                                .map_err(|e| e.context(format!("{name} trial {trial} {} {method} d={d}", space.name())))?;
                            cells.push(cell);
                        }
                    }
                }
                Ok((cells, Self::trial_log(trial, &t)))
            })
            .collect::<Result<_>>()?;
        let mut report = self.report(name);
        for (cells, line) in per_trial {
            report.cells.extend(cells);
            report.log.push(line);
        }
        sort_cells(&mut report.cells);
        Ok(report)
    }

    #[allow(clippy::too_many_arguments)]
    fn dr_cell(
        &self,
        name: &str,
        space: Space,
        method: DrKind,
        requested: usize,
        trial: usize,
        train: &LabeledDataset,
        test: &LabeledDataset,
    ) -> Result<CellRecord> {
        let cfg = &self.config;
        let n = train.dim();
        let max = match method {
            DrKind::Lda => train.class_count() - 1,
            DrKind::Pca | DrKind::Mfa => n,
            DrKind::Kpca => train.sample_count(),
        };
        let d = requested.min(max);
        let mut flags = Vec::new();
        if d < requested {
            flags.push(if method == DrKind::Lda {
                format!("lda_clamped_to_{d}")
            } else {
                format!("dim_clamped_to_{d}")
            });
        }
        let started = Instant::now();
        let model = match method {
            DrKind::Pca => fit_pca(train.features(), d)?,
            DrKind::Lda => fit_lda(train.features(), train.labels(), d)?,
            DrKind::Kpca => fit_kpca(train.features(), d, cfg.dr.kpca_gamma_scale / n as f64)?,
            DrKind::Mfa => fit_mfa(train.features(), train.labels(), d, cfg.dr.mfa_k1, cfg.dr.mfa_k2)?,
        };
        let dr_time = started.elapsed();
        if model.degenerate {
            flags.push("dr_degenerate".into());
        }
        if model.truncated {
            flags.push("dr_truncated".into());
        }
        let reduced_train = train.with_features(apply_dr(&model, train.features())?)?;
        let reduced_test = test.with_features(apply_dr(&model, test.features())?)?;
        let kind = ClassifierKind::LinearSvm;
        let mut cell = CellKey {
            experiment: name,
            space,
            method: method.to_string(),
            requested_dim: requested,
            classifier: kind.to_string(),
            neighbors: cfg.gam.v_w,
            train_per_class: cfg.split.train_per_class,
            trial,
        }
        .record(d);
        evaluate(&mut cell, kind, &cfg.classifier_options, &reduced_train, &reduced_test)?;
        cell.fit_time += dr_time;
        cell.flags.extend(flags);
        Ok(cell)
    }

    /// Linear SVM in both spaces for each per-class training size, with
    /// mapping fit time and mapped-space prediction time. A size that some
    /// class cannot supply yields error cells and does not stop the sweep.
    pub fn train_size_sweep(&self) -> Result<ExperimentReport> {
        let cfg = &self.config;
        let name = "train-sweep";
        if cfg.sweeps.train_sizes.is_empty() {
            return Err(Error::Config("sweeps.train_sizes is empty".into()));
        }
        let jobs: Vec<(usize, usize)> = cfg
            .sweeps
            .train_sizes
            .iter()
            .flat_map(|&k| (0..cfg.trials).map(move |t| (k, t)))
            .collect();
        let per_job: Vec<(Vec<CellRecord>, String)> = jobs
            .into_par_iter()
            .map(|(k, trial)| {
                let kind = ClassifierKind::LinearSvm;
                let key = |space: Space, dim: usize| {
                    CellKey {
                        experiment: name,
                        space,
                        method: "none".into(),
                        requested_dim: dim,
                        classifier: kind.to_string(),
                        neighbors: cfg.gam.v_w,
                        train_per_class: k,
                        trial,
                    }
                    .record(dim)
                };
                let t = match self.prepare_trial(trial, k, None) {
                    Ok(t) => t,
                    Err(e) => {
                        let msg = format!("error: {e}");
                        let m = cfg.gam.target_dim.unwrap_or(self.data.dim());
                        let cells = [(Space::Original, self.data.dim()), (Space::Mapped, m)]
                            .into_iter()
                            .map(|(space, dim)| {
                                let mut c = key(space, dim);
                                c.status = msg.clone();
                                c
                            })
                            .collect();
                        return Ok((cells, format!("k={k} trial {trial}: {msg}")));
                    }
                };
                let mut cells = Vec::new();
                for space in [Space::Original, Space::Mapped] {
                    let (train, test) = t.space(space);
                    let mut cell = key(space, train.dim());
                    evaluate(&mut cell, kind, &cfg.classifier_options, train, test)
                        .map_err(|e| e.context(format!("{name} k={k} trial {trial} {}", space.name())))?;
                    if space == Space::Mapped {
                        cell.affinity_time = t.gam.timings.affinity;
                        cell.cg_time = t.gam.timings.optimize;
                        cell.flags.extend(Self::gam_flags(&t));
                    }
                    cells.push(cell);
                }
                Ok((cells, format!("k={k} {}", Self::trial_log(trial, &t))))
            })
            .collect::<Result<_>>()?;
        let mut report = self.report(name);
        for (cells, line) in per_job {
            report.cells.extend(cells);
            report.log.push(line);
        }
        sort_cells(&mut report.cells);
        Ok(report)
    }
}

pub fn run_classifier_table(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Experiment::new(cfg.clone())?.classifier_table()
}

pub fn run_neighbor_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Experiment::new(cfg.clone())?.neighbor_sweep()
}

pub fn run_dimension_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Experiment::new(cfg.clone())?.dimension_sweep()
}

pub fn run_dr_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Experiment::new(cfg.clone())?.dr_sweep()
}

pub fn run_train_size_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Experiment::new(cfg.clone())?.train_size_sweep()
}

pub const CELLS_HEADER: &str = "experiment,space,method,requested_dim,dim,classifier,neighbors,train_per_class,trial,status,oa,aa,kappa,flags,affinity_time_s,cg_time_s,fit_time_s,predict_time_s";
pub const SUMMARY_HEADER: &str = "experiment,space,method,requested_dim,dim,classifier,neighbors,train_per_class,trials,oa_mean,oa_std,aa_mean,aa_std,kappa_mean,kappa_std,flags";
pub const DIMENSION_HEADER: &str = "m,cost,oracle_cost,relative_gap,iterations,termination";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn cells_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(CELLS_HEADER);
    out.push('\n');
    for c in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            csv_field(&c.experiment),
            c.space.name(),
            csv_field(&c.method),
            c.requested_dim,
            c.dim,
            csv_field(&c.classifier),
            c.neighbors,
            c.train_per_class,
            c.trial,
            csv_field(&c.status),
            num(c.oa),
            num(c.aa),
            num(c.kappa),
            csv_field(&c.flags.join(";")),
            c.affinity_time.as_secs_f64(),
            c.cg_time.as_secs_f64(),
            c.fit_time.as_secs_f64(),
            c.predict_time.as_secs_f64(),
        );
    }
    out
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate over trials of one cell configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub experiment: String,
    pub space: Space,
    pub method: String,
    pub requested_dim: usize,
    pub dim: usize,
    pub classifier: String,
    pub neighbors: usize,
    pub train_per_class: usize,
    pub trials: usize,
    pub oa: (f64, f64),
    pub aa: (f64, f64),
    pub kappa: (f64, f64),
    pub flags: Vec<String>,
}

pub fn summarize(report: &ExperimentReport) -> Vec<SummaryRow> {
    let mut rows: Vec<(SummaryRow, Vec<[f64; 3]>)> = Vec::new();
    for c in &report.cells {
        let same = |r: &SummaryRow| {
            r.experiment == c.experiment
                && r.space == c.space
                && r.method == c.method
                && r.requested_dim == c.requested_dim
                && r.classifier == c.classifier
                && r.neighbors == c.neighbors
                && r.train_per_class == c.train_per_class
        };
        let idx = match rows.iter().position(|(r, _)| same(r)) {
            Some(i) => i,
            None => {
                rows.push((
                    SummaryRow {
                        experiment: c.experiment.clone(),
                        space: c.space,
                        method: c.method.clone(),
                        requested_dim: c.requested_dim,
                        dim: c.dim,
                        classifier: c.classifier.clone(),
                        neighbors: c.neighbors,
                        train_per_class: c.train_per_class,
                        trials: 0,
                        oa: (f64::NAN, f64::NAN),
                        aa: (f64::NAN, f64::NAN),
                        kappa: (f64::NAN, f64::NAN),
                        flags: Vec::new(),
                    },
                    Vec::new(),
                ));
                rows.len() - 1
            }
        };
        let (row, values) = &mut rows[idx];
        for f in &c.flags {
            if !row.flags.contains(f) {
                row.flags.push(f.clone());
            }
        }
        if c.is_ok() {
            values.push([c.oa, c.aa, c.kappa]);
        } else if !row.flags.iter().any(|f| f == "errors") {
            row.flags.push("errors".into());
        }
    }
    rows.into_iter()
        .map(|(mut row, values)| {
            row.trials = values.len();
            let col = |k: usize| values.iter().map(|v| v[k]).collect::<Vec<_>>();
            row.oa = mean_std(&col(0));
            row.aa = mean_std(&col(1));
            row.kappa = mean_std(&col(2));
            row
        })
        .collect()
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in summarize(report) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.experiment),
            r.space.name(),
            csv_field(&r.method),
            r.requested_dim,
            r.dim,
            csv_field(&r.classifier),
            r.neighbors,
            r.train_per_class,
            r.trials,
            num(r.oa.0),
            num(r.oa.1),
            num(r.aa.0),
            num(r.aa.1),
            num(r.kappa.0),
            num(r.kappa.1),
            csv_field(&r.flags.join(";")),
        );
    }
    out
}

pub fn dimension_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(DIMENSION_HEADER);
    out.push('\n');
    for r in &report.dimension_rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:?}",
            r.m,
            r.cost,
            r.oracle_cost,
            r.relative_gap(),
            r.iterations,
            r.termination
        );
    }
    out
}

/// Writes `cells.csv`, `summary.csv`, `config.echo`, `run.log`, and
/// `dimension_sweep.csv` when the report has cost-sweep rows.
pub fn emit_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("cells.csv", cells_csv(report)),
        ("summary.csv", summary_csv(report)),
    ];
    let echo = match &report.config {
        Some(cfg) => cfg.to_toml()?,
        None => String::new(),
    };
    files.push(("config.echo", echo));
    let mut log = String::new();
    let _ = writeln!(log, "experiment {}", report.experiment);
    for line in &report.log {
        let _ = writeln!(log, "{line}");
    }
    files.push(("run.log", log));
    if !report.dimension_rows.is_empty() {
        files.push(("dimension_sweep.csv", dimension_csv(report)));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
