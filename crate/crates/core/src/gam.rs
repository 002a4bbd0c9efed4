//! The geometry-aware mapping: a signed-affinity graph cost over
//! orthonormal frames, its gradient, fitting by Riemannian CG, and the
//! projection `UᵀX`.
//!
//! The cost summed over all ordered pairs,
//! `L(U) = Σ_ij A_ij ‖Uᵀx_i − Uᵀx_j‖²`, equals `2·tr(Uᵀ M U)` with
//! `M = X (D − A) Xᵀ`, so once `M` is formed a cost evaluation is `O(n²m)`
//! and the Euclidean gradient is `4·M U`. Because `L(UQ) = L(U)` for any
//! orthogonal `Q`, the minimizer is a subspace and the exact optimum is
//! spanned by the eigenvectors of the `m` smallest eigenvalues of `M`.

use std::io::{BufRead, Read, Write};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affinity::{build_affinity, neighbor_sets, signed_laplacian, AffinityGraph};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, symmetrize};
use crate::rng;
use crate::stiefel::{minimize_cg, CgOptions, OptResult, OrthonormalFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamParams {
    pub v_w: usize,
    pub v_b: usize,
    /// Mapped dimension `m`; `None` means one less than the input dimension.
    pub target_dim: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub cg: CgOptions,
}

impl Default for GamParams {
    fn default() -> Self {
        Self {
            v_w: 9,
            v_b: 9,
            target_dim: None,
            restarts: 3,
            seed: 0,
            cg: CgOptions::default(),
        }
    }
}

impl GamParams {
    /// Mapped dimension for `n`-dimensional input.
    pub fn resolve_dim(&self, n: usize) -> Result<usize> {
        let m = self.target_dim.unwrap_or(n.saturating_sub(1).max(1));
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "target dimension {m} must lie in 1..={n}"
            )));
        }
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.v_w == 0 || self.v_b == 0 {
            return Err(Error::InvalidArgument("v_w and v_b must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        self.cg.validate()
    }
}

/// The `n × n` matrix `M = X (D − A) Xᵀ` behind the trace form of the cost.
#[derive(Debug, Clone)]
pub struct GraphQuadratic {
    m: DMatrix<f64>,
}

impl GraphQuadratic {
    pub fn new(features: &DMatrix<f64>, graph: &AffinityGraph) -> Result<Self> {
        if features.ncols() != graph.size() {
            return Err(Error::mismatch(
                format!("{} samples in the graph", graph.size()),
                format!("{} feature columns", features.ncols()),
            ));
        }
        let lap = signed_laplacian(graph);
        let m = features * lap * features.transpose();
        Ok(Self { m: symmetrize(&m) })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn check(&self, frame: &OrthonormalFrame) -> Result<()> {
        if frame.n() != self.dim() {
            return Err(Error::mismatch(
                format!("frame with {} rows", self.dim()),
                format!("{} rows", frame.n()),
            ));
        }
        Ok(())
    }

    fn cost_unchecked(&self, u: &DMatrix<f64>) -> f64 {
        let mu = &self.m * u;
        2.0 * u.iter().zip(mu.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    fn gradient_unchecked(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.m * u * 4.0
    }

    pub fn cost(&self, frame: &OrthonormalFrame) -> Result<f64> {
        self.check(frame)?;
        Ok(self.cost_unchecked(frame.matrix()))
    }

    pub fn gradient(&self, frame: &OrthonormalFrame) -> Result<DMatrix<f64>> {
        self.check(frame)?;
        Ok(self.gradient_unchecked(frame.matrix()))
    }

    /// Cost at any full-dimensional frame: `2·tr(M)`.
    pub fn total_energy(&self) -> f64 {
        2.0 * self.m.trace()
    }

    /// Exact minimizer over `n × m` frames and its cost.
    pub fn optimum(&self, m: usize) -> Result<(OrthonormalFrame, f64)> {
        let n = self.dim();
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!("target dimension {m} must lie in 1..={n}")));
        }
        let eig = symmetric_eigen(&self.m)?;
        let frame = OrthonormalFrame::new(eig.vectors.columns(0, m).into_owned())?;
        let cost = 2.0 * eig.values.rows(0, m).sum();
        Ok((frame, cost))
    }
}

/// Graph cost `Σ_ij A_ij ‖Uᵀx_i − Uᵀx_j‖²` over ordered pairs, via the trace form.
pub fn cost(frame: &OrthonormalFrame, features: &DMatrix<f64>, graph: &AffinityGraph) -> Result<f64> {
    check_frame(frame, features)?;
    GraphQuadratic::new(features, graph)?.cost(frame)
}

/// Euclidean gradient `4·X(D − A)XᵀU` of [`cost`] with respect to `U`.
pub fn euclidean_gradient(
    frame: &OrthonormalFrame,
    features: &DMatrix<f64>,
    graph: &AffinityGraph,
) -> Result<DMatrix<f64>> {
    check_frame(frame, features)?;
    GraphQuadratic::new(features, graph)?.gradient(frame)
}

/// Exact optimum of the graph cost over `n × m` frames, from the
/// eigenvectors of the `m` smallest eigenvalues of `X(D − A)Xᵀ`.
pub fn spectral_oracle(features: &DMatrix<f64>, graph: &AffinityGraph, m: usize) -> Result<(OrthonormalFrame, f64)> {
    GraphQuadratic::new(features, graph)?.optimum(m)
}

fn check_frame(frame: &OrthonormalFrame, features: &DMatrix<f64>) -> Result<()> {
    if frame.n() != features.nrows() {
        return Err(Error::mismatch(
            format!("frame with {} rows", features.nrows()),
            format!("{} rows", frame.n()),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitTimings {
    pub affinity: Duration,
    pub optimize: Duration,
}

/// Outcome of one seeded restart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartSummary {
    pub seed: u64,
    pub initial_cost: f64,
    pub final_cost: f64,
}

#[derive(Debug, Clone)]
pub struct GamModel {
    pub frame: OrthonormalFrame,
    /// Parameters with `target_dim` resolved.
    pub params: GamParams,
    pub final_cost: f64,
    /// Optimizer trace of the winning restart; absent for models read from disk.
    pub opt_result: Option<OptResult>,
    pub train_fingerprint: String,
    pub restarts: Vec<RestartSummary>,
    /// Neighbor sets were cut short by small classes.
    pub truncated: bool,
    /// The affinity graph had no edges, so the cost is identically zero.
    pub degenerate: bool,
    pub timings: FitTimings,
}

impl GamModel {
    pub fn input_dim(&self) -> usize {
        self.frame.n()
    }

    pub fn output_dim(&self) -> usize {
        self.frame.m()
    }

    pub fn transform(&self, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        transform(self, features)
    }
}

/// SHA-256 over the dimensions, feature bits and labels.
pub fn fingerprint(ds: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    h.update((ds.dim() as u64).to_le_bytes());
    h.update((ds.sample_count() as u64).to_le_bytes());
    for v in ds.features().iter() {
        h.update(v.to_le_bytes());
    }
    for &l in ds.labels() {
        h.update((l as u64).to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn fit(train: &LabeledDataset, params: &GamParams) -> Result<GamModel> {
    params.validate()?;
    let n = train.dim();
    let m = params.resolve_dim(n)?;

    let started = Instant::now();
    let sets = neighbor_sets(train, params.v_w, params.v_b)?;
    let graph = build_affinity(&sets, train.labels())?;
    let quad = GraphQuadratic::new(train.features(), &graph)?;
    let affinity_time = started.elapsed();

    let degenerate = graph.is_zero();
    if degenerate {
        log::warn!("affinity graph is empty; every frame is optimal, returning the first random frame");
    }

    let started = Instant::now();
    let runs: Vec<(RestartSummary, OptResult)> = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = rng::derive_seed(params.seed, r as u64);
            let start = OrthonormalFrame::random(n, m, seed)?;
            let initial_cost = quad.cost_unchecked(start.matrix());
            let res = minimize_cg(
                |u| quad.cost_unchecked(u.matrix()),
                |u| quad.gradient_unchecked(u.matrix()),
                start,
                &params.cg,
            )
            .map_err(|e| e.context(format!("restart {r}")))?;
            Ok((
                RestartSummary {
                    seed,
                    initial_cost,
                    final_cost: res.cost,
                },
                res,
            ))
        })
        .collect::<Result<_>>()?;
    let optimize_time = started.elapsed();

    let mut best = 0;
    for (i, (s, _)) in runs.iter().enumerate() {
        if s.final_cost < runs[best].0.final_cost {
            best = i;
        }
    }
    let restarts: Vec<RestartSummary> = runs.iter().map(|(s, _)| *s).collect();
    let opt = runs.into_iter().nth(best).map(|(_, r)| r).expect("at least one restart");
    let frame = opt.frame.clone();
    let final_cost = quad.cost_unchecked(frame.matrix());

    let mut resolved = params.clone();
    resolved.target_dim = Some(m);
    Ok(GamModel {
        frame,
        params: resolved,
        final_cost,
        opt_result: Some(opt),
        train_fingerprint: fingerprint(train),
        restarts,
        truncated: sets.truncated,
        degenerate,
        timings: FitTimings {
            affinity: affinity_time,
            optimize: optimize_time,
        },
    })
}

/// `UᵀX`.
pub fn transform(model: &GamModel, features: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if features.nrows() != model.input_dim() {
        return Err(Error::mismatch(
            format!("{}-dimensional samples", model.input_dim()),
            format!("{}-dimensional samples", features.nrows()),
        ));
    }
    Ok(model.frame.matrix().transpose() * features)
}

const MODEL_MAGIC: &str = "GAMMODEL";
const MODEL_VERSION: u32 = 1;

/// Writes the text header followed by `U` as row-major little-endian f64.
pub fn write_model(model: &GamModel, mut out: impl Write) -> std::io::Result<()> {
    let p = &model.params;
    let c = &p.cg;
    writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}")?;
    writeln!(out, "n {}", model.input_dim())?;
    writeln!(out, "m {}", model.output_dim())?;
    writeln!(out, "v_w {}", p.v_w)?;
    writeln!(out, "v_b {}", p.v_b)?;
    writeln!(out, "restarts {}", p.restarts)?;
    writeln!(out, "seed {}", p.seed)?;
    writeln!(out, "max_iters {}", c.max_iters)?;
    writeln!(out, "grad_tol {:?}", c.grad_tol)?;
    writeln!(out, "armijo_c1 {:?}", c.armijo_c1)?;
    writeln!(out, "backtrack_factor {:?}", c.backtrack_factor)?;
    writeln!(out, "max_backtracks {}", c.max_backtracks)?;
    writeln!(out, "initial_step {:?}", c.initial_step)?;
    writeln!(out, "final_cost {:?}", model.final_cost)?;
    writeln!(out, "fingerprint {}", model.train_fingerprint)?;
    writeln!(out, "end")?;
    let u = model.frame.matrix();
    for i in 0..u.nrows() {
        for j in 0..u.ncols() {
            out.write_all(&u[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model(input: impl Read) -> Result<GamModel> {
    let mut reader = std::io::BufReader::new(input);
    let mut fields: Vec<(String, String)> = Vec::new();
    let mut line_no = 0;
    loop {
        let mut line = String::new();
        let read = reader
            .read_line(&mut line)
            .map_err(|e| Error::Format(format!("model header: {e}")))?;
        line_no += 1;
        if read == 0 {
            return Err(Error::Format("model header ends before \"end\"".into()));
        }
        let line = line.trim_end_matches(['\n', '\r']);
        if line_no == 1 {
            if line != format!("{MODEL_MAGIC} {MODEL_VERSION}") {
                return Err(Error::Format(format!("unsupported model header {line:?}")));
            }
            continue;
        }
        if line == "end" {
            break;
        }
        let (k, v) = line.split_once(' ').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("expected \"key value\", got {line:?}"),
        })?;
        fields.push((k.to_string(), v.to_string()));
    }
    let get = |key: &str| -> Result<&str> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Format(format!("model header lacks {key}")))
    };
    fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse()
            .map_err(|_| Error::Format(format!("model header {key}: cannot parse {v:?}")))
    }
    let n: usize = parse("n", get("n")?)?;
    let m: usize = parse("m", get("m")?)?;
    let params = GamParams {
        v_w: parse("v_w", get("v_w")?)?,
        v_b: parse("v_b", get("v_b")?)?,
        target_dim: Some(m),
        restarts: parse("restarts", get("restarts")?)?,
        seed: parse("seed", get("seed")?)?,
        cg: CgOptions {
            max_iters: parse("max_iters", get("max_iters")?)?,
            grad_tol: parse("grad_tol", get("grad_tol")?)?,
            armijo_c1: parse("armijo_c1", get("armijo_c1")?)?,
            backtrack_factor: parse("backtrack_factor", get("backtrack_factor")?)?,
            max_backtracks: parse("max_backtracks", get("max_backtracks")?)?,
            initial_step: parse("initial_step", get("initial_step")?)?,
        },
    };
    let final_cost: f64 = parse("final_cost", get("final_cost")?)?;
    let train_fingerprint = get("fingerprint")?.to_string();

    let mut payload = Vec::new();
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::Format(format!("model payload: {e}")))?;
    if payload.len() != n * m * 8 {
        return Err(Error::Format(format!(
            "model payload has {} bytes, expected {} for a {n}x{m} frame",
            payload.len(),
            n * m * 8
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let frame = OrthonormalFrame::new(DMatrix::from_row_slice(n, m, &values))?;
    Ok(GamModel {
        frame,
        params,
        final_cost,
        opt_result: None,
        train_fingerprint,
        restarts: Vec::new(),
        truncated: false,
        degenerate: false,
        timings: FitTimings::default(),
    })
}

pub fn save_model(model: &GamModel, path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(model, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<std::path::Path>) -> Result<GamModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(file).map_err(|e| e.context(path.display().to_string()))
}
