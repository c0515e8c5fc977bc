//! Seeded synthetic data: low-rank + sparse test matrices, a blob video with
//! known footprints, and the phase-diagram harness.
//!
//! Every generator is a pure function of its dimensions, parameters and seed.
//! Column `j` of the factor `Z` and of the sparse part are drawn from their
//! own derived streams, so the streaming BMAT writer produces exactly the
//! matrix the in-memory generators return.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use crate::baselines::{ialm_rpca, IalmConfig};
use crate::error::{BearError, Result};
use crate::io::{write_metrics_csv, BmatWriter, MetricTable};
use crate::matrix::{relative_error, Matrix, Real};
use crate::rng::{derive_seed, SeededRng};
use crate::solver::{greedy_train, RankSchedule, TrainConfig};
use crate::svd::DEFAULT_SVD_CAP;

const X_STREAM: u64 = 0x58; // 'X'
const Z_STREAM: u64 = 0x5a; // 'Z'
const S_STREAM: u64 = 0x53; // 'S'
const VIDEO_STREAM: u64 = 0x56; // 'V'

/// Decaying trace levels below this are cut to zero, so traces are sparse.
const TRACE_FLOOR: f64 = 0.05;

/// Sparse magnitude of the three-point distribution.
pub const SPARSE_MAGNITUDE: f64 = 0.1;

fn check_rank(rows: usize, cols: usize, rank: usize) -> Result<()> {
    if rank == 0 || rank > rows.min(cols) {
        return Err(BearError::Parameter(format!(
            "rank must be in 1..={} for a {rows}x{cols} matrix, got {rank}",
            rows.min(cols)
        )));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(BearError::Parameter(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(())
}

/// Left factor `X` (rows × r), i.i.d. `N(0, 1/rows)`, column-major draw order.
fn left_factor(rows: usize, rank: usize, seed: u64) -> Matrix<f64> {
    let mut rng = SeededRng::new(derive_seed(seed, &[X_STREAM]));
    let std = 1.0 / (rows as f64).sqrt();
    Matrix::from_fn(rows, rank, |_, _| std * rng.normal())
}

/// Row `j` of the right factor `Z`, i.i.d. `N(0, 1/rows)`.
fn right_row(rows: usize, rank: usize, seed: u64, j: usize, out: &mut Vec<f64>) {
    let mut rng = SeededRng::new(derive_seed(seed, &[Z_STREAM, j as u64]));
    let std = 1.0 / (rows as f64).sqrt();
    out.clear();
    out.extend((0..rank).map(|_| std * rng.normal()));
}

fn low_rank_column<T: Real>(x: &Matrix<f64>, z: &[f64], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        let v: f64 = z.iter().enumerate().map(|(k, &zk)| x.get(i, k) * zk).sum();
        *o = T::lit(v);
    }
}

fn sparse_column<T: Real>(rho: f64, seed: u64, j: usize, out: &mut [T]) {
    let mut rng = SeededRng::new(derive_seed(seed, &[S_STREAM, j as u64]));
    let half = rho / 2.0;
    for o in out.iter_mut() {
        let u = rng.uniform();
        *o = if u < half {
            T::lit(SPARSE_MAGNITUDE)
        } else if u < rho {
            T::lit(-SPARSE_MAGNITUDE)
        } else {
            T::zero()
        };
    }
}

/// `L = X·Zᵀ` (n × n) with `X, Z` of width `r` and i.i.d. `N(0, 1/n)` entries;
/// products are accumulated in f64.
pub fn gen_low_rank<T: Real>(n: usize, rank: usize, seed: u64) -> Result<Matrix<T>> {
    gen_low_rank_shape(n, n, rank, seed)
}

/// Rectangular form of [`gen_low_rank`]; both factors use variance `1/rows`.
pub fn gen_low_rank_shape<T: Real>(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<Matrix<T>> {
    check_rank(rows, cols, rank)?;
    let x = left_factor(rows, rank, seed);
    let mut out = Matrix::zeros(rows, cols);
    let mut z = Vec::with_capacity(rank);
    for j in 0..cols {
        right_row(rows, rank, seed, j, &mut z);
        low_rank_column(&x, &z, out.col_mut(j));
    }
    Ok(out)
}

/// i.i.d. entries with `P(0.1) = P(−0.1) = ρ/2` and `P(0) = 1 − ρ`.
pub fn gen_sparse<T: Real>(n: usize, rho: f64, seed: u64) -> Result<Matrix<T>> {
    gen_sparse_shape(n, n, rho, seed)
}

pub fn gen_sparse_shape<T: Real>(rows: usize, cols: usize, rho: f64, seed: u64) -> Result<Matrix<T>> {
    check_rho(rho)?;
    let mut out = Matrix::zeros(rows, cols);
    for j in 0..cols {
        sparse_column(rho, seed, j, out.col_mut(j));
    }
    Ok(out)
}

/// Ground truth of a composite test matrix `Y = L + S`.
#[derive(Clone, Debug)]
pub struct Composite<T: Real = f32> {
    pub y: Matrix<T>,
    pub low_rank: Matrix<T>,
    pub sparse: Matrix<T>,
}

/// `gen_low_rank_shape(seed) + gen_sparse_shape(seed)`.
pub fn gen_composite<T: Real>(rows: usize, cols: usize, rank: usize, rho: f64, seed: u64) -> Result<Composite<T>> {
    let low_rank = gen_low_rank_shape(rows, cols, rank, seed)?;
    let sparse = gen_sparse_shape(rows, cols, rho, seed)?;
    let y = low_rank.try_add(&sparse)?;
    Ok(Composite { y, low_rank, sparse })
}

/// Streams the same matrix as [`gen_composite`] (`Y` only) to a BMAT file,
/// holding only `X` and one column in memory.
pub fn write_composite_bmat(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    rank: usize,
    rho: f64,
    seed: u64,
) -> Result<()> {
    write_parts_bmat(path, rows, cols, Some(rank), Some(rho), seed)
}

/// Streams `L + S` to a BMAT file, omitting `L` when `rank` is `None` and `S`
/// when `rho` is `None`. The output matches the corresponding in-memory
/// generator bitwise.
pub fn write_parts_bmat(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    rank: Option<usize>,
    rho: Option<f64>,
    seed: u64,
) -> Result<()> {
    if let Some(rank) = rank {
        check_rank(rows, cols, rank)?;
    } else if rows == 0 || cols == 0 {
        return Err(BearError::Parameter(format!("cannot generate a {rows}x{cols} matrix")));
    }
    if let Some(rho) = rho {
        check_rho(rho)?;
    }
    let x = rank.map(|r| left_factor(rows, r, seed));
    let mut writer = BmatWriter::create(path, rows, cols)?;
    let mut z = Vec::new();
    let mut col = vec![0.0f32; rows];
    let mut sparse = vec![0.0f32; rows];
    for j in 0..cols {
        match &x {
            Some(x) => {
                right_row(rows, x.cols(), seed, j, &mut z);
                low_rank_column(x, &z, &mut col);
            }
            None => col.fill(0.0),
        }
        if let Some(rho) = rho {
            sparse_column(rho, seed, j, &mut sparse);
            for (l, s) in col.iter_mut().zip(&sparse) {
                *l += *s;
            }
        }
        writer.push_column(&col)?;
    }
    writer.finish()
}

/// Blob-video layout and dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub blobs: usize,
    /// Gaussian profile width in pixels; supports are cut at radius `⌈3σ⌉`.
    pub sigma: f64,
    /// Include the rank-1 background.
    pub background: bool,
    /// Events per frame in each trace; every trace gets `round(rate·frames)`
    /// events (at least one when the rate is positive).
    pub event_rate: f64,
    /// Exponential decay time constant of a trace, in frames.
    pub decay_frames: f64,
    pub seed: u64,
}

impl Default for VideoSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            frames: 500,
            blobs: 8,
            sigma: 1.5,
            background: true,
            event_rate: 0.01,
            decay_frames: 2.0,
            seed: 0,
        }
    }
}

impl VideoSpec {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn radius(&self) -> usize {
        (3.0 * self.sigma).ceil() as usize
    }
}

/// Parts of a generated video; `video = background + spatial·activation`.
#[derive(Clone, Debug)]
pub struct BlobVideoTruth<T: Real = f32> {
    /// n × m, rank 1 (zero when `background` is off).
    pub background: Matrix<T>,
    /// n × k Gaussian profiles with peak 1, zero outside each disjoint support.
    pub spatial: Matrix<T>,
    /// k × m non-negative traces.
    pub activation: Matrix<T>,
}

impl<T: Real> BlobVideoTruth<T> {
    /// Pixel indices of blob `k`'s support.
    pub fn support(&self, k: usize) -> Vec<usize> {
        (0..self.spatial.rows())
            .filter(|&i| self.spatial.get(i, k) > T::zero())
            .collect()
    }
}

/// Pixels are column-major over the frame (`pixel = x·height + y`). Blobs sit
/// in distinct cells of a grid whose cells are one support wide, jittered
/// within their cell; the background is a smooth positive image modulated by
/// a slow positive time course; traces are decaying random events.
pub fn gen_video<T: Real>(spec: &VideoSpec) -> Result<(Matrix<T>, BlobVideoTruth<T>)> {
    if spec.width == 0 || spec.height == 0 || spec.frames == 0 {
        return Err(BearError::Parameter("video dimensions must be positive".into()));
    }
    if !(spec.sigma > 0.0) || !(0.0..=1.0).contains(&spec.event_rate) || !(spec.decay_frames > 0.0) {
        return Err(BearError::Parameter(format!(
            "invalid video dynamics: sigma {}, event rate {}, decay {}",
            spec.sigma, spec.event_rate, spec.decay_frames
        )));
    }
    let n = spec.pixels();
    let m = spec.frames;
    let radius = spec.radius();
    let cell = 2 * radius + 1;
    let (gx, gy) = (spec.width / cell, spec.height / cell);
    if spec.blobs > gx * gy {
        return Err(BearError::Parameter(format!(
            "{} blobs of radius {radius} do not fit a {}x{} frame (room for {})",
            spec.blobs,
            spec.width,
            spec.height,
            gx * gy
        )));
    }
    let mut rng = SeededRng::new(derive_seed(spec.seed, &[VIDEO_STREAM]));

    let mut cells: Vec<usize> = (0..gx * gy).collect();
    rng.shuffle(&mut cells);
    let slack_x = spec.width - gx * cell;
    let slack_y = spec.height - gy * cell;
    let mut spatial = Matrix::<f64>::zeros(n, spec.blobs);
    for (k, &c) in cells.iter().take(spec.blobs).enumerate() {
        // Jitter keeps the blob inside its own cell plus the unused margin
        // owned by the last row or column of cells.
        let jx = if c % gx == gx - 1 { slack_x } else { 0 };
        let jy = if c / gx == gy - 1 { slack_y } else { 0 };
        let cx = (c % gx) * cell + radius + rng.below(jx + 1);
        let cy = (c / gx) * cell + radius + rng.below(jy + 1);
        let r2 = (radius * radius) as f64;
        for x in cx - radius..=cx + radius {
            for y in cy - radius..=cy + radius {
                let d2 = (x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2);
                if d2 <= r2 {
                    spatial.set(x * spec.height + y, k, (-d2 / (2.0 * spec.sigma * spec.sigma)).exp());
                }
            }
        }
    }

    // Every blob fires the same number of events at distinct random frames,
    // so no component is left without signal.
    let events = if spec.event_rate > 0.0 { ((spec.event_rate * m as f64).round() as usize).clamp(1, m) } else { 0 };
    let keep = (-1.0 / spec.decay_frames).exp();
    let mut activation = Matrix::<f64>::zeros(spec.blobs, m);
    let mut frames: Vec<usize> = (0..m).collect();
    for k in 0..spec.blobs {
        rng.shuffle(&mut frames);
        let mut onset = vec![0.0f64; m];
        for &t in &frames[..events] {
            onset[t] = 0.5 + rng.uniform();
        }
        let mut level = 0.0f64;
        for (t, &jump) in onset.iter().enumerate() {
            level *= keep;
            if level < TRACE_FLOOR {
                level = 0.0;
            }
            level += jump;
            activation.set(k, t, level);
        }
    }

    let mut background = Matrix::<f64>::zeros(n, m);
    if spec.background {
        let phase = 2.0 * std::f64::consts::PI * rng.uniform();
        let image: Vec<f64> = (0..n)
            .map(|i| {
                let (x, y) = ((i / spec.height) as f64, (i % spec.height) as f64);
                let (u, v) = (x / spec.width as f64, y / spec.height as f64);
                1.0 + 0.3 * (std::f64::consts::PI * u).sin() * (std::f64::consts::PI * v).cos() + 0.2 * u
            })
            .collect();
        let period = (m as f64 / 2.0).max(1.0);
        for t in 0..m {
            let course = 1.0 + 0.2 * (2.0 * std::f64::consts::PI * t as f64 / period + phase).sin();
            for (i, &b) in image.iter().enumerate() {
                background.set(i, t, b * course);
            }
        }
    }

    let mut video = background.clone();
    for t in 0..m {
        for k in 0..spec.blobs {
            let a = activation.get(k, t);
            if a == 0.0 {
                continue;
            }
            for i in 0..n {
                let s = spatial.get(i, k);
                if s > 0.0 {
                    let v = video.get(i, t) + s * a;
                    video.set(i, t, v);
                }
            }
        }
    }
    Ok((
        video.cast(),
        BlobVideoTruth {
            background: background.cast(),
            spatial: spatial.cast(),
            activation: activation.cast(),
        },
    ))
}

/// Settings shared by all cells of a phase diagram.
#[derive(Clone, Debug)]
pub struct PhaseConfig {
    pub train: TrainConfig,
    pub schedule: RankSchedule,
    /// Also run the IALM oracle on cells that fit the dense SVD.
    pub oracle: bool,
    pub seed: u64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            schedule: RankSchedule::default(),
            oracle: false,
            seed: 0,
        }
    }
}

/// Oracle comparison for one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleCell {
    /// Mean `relative_error(L_true, L_ialm)`.
    pub rel_err_mean: f64,
    /// Mean `relative_error(L_ialm, L_bear)`.
    pub bear_vs_oracle_mean: f64,
    pub converged_trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCellResult {
    pub n: usize,
    pub r: usize,
    pub rho: f64,
    pub lambda: f64,
    pub trials: usize,
    pub rel_err_mean: f64,
    pub time_mean_seconds: f64,
    pub chosen_ranks: Vec<usize>,
    pub oracle: Option<OracleCell>,
}

impl PhaseCellResult {
    /// Most frequent chosen rank, the smallest on ties.
    pub fn chosen_rank_mode(&self) -> usize {
        let mut counts = BTreeMap::new();
        for &r in &self.chosen_ranks {
            *counts.entry(r).or_insert(0usize) += 1;
        }
        counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map_or(0, |(&r, _)| r)
    }
}

/// Seed of one trial, independent of the order cells are run in.
pub fn trial_seed(master: u64, r: usize, rho: f64, trial: usize) -> u64 {
    derive_seed(master, &[r as u64, rho.to_bits(), trial as u64])
}

/// Runs `trials` greedy decompositions of fresh `n × n` composites with true
/// rank `r` and density `rho`, timing each training.
pub fn phase_cell(n: usize, r: usize, rho: f64, lambda: f64, cfg: &PhaseConfig, trials: usize) -> Result<PhaseCellResult> {
    if trials == 0 {
        return Err(BearError::Parameter("a phase cell needs at least one trial".into()));
    }
    let context = |e: BearError| match e {
        BearError::Numerical(msg) => BearError::Numerical(format!("cell r={r} rho={rho}: {msg}")),
        other => other,
    };
    let mut errs = Vec::with_capacity(trials);
    let mut times = Vec::with_capacity(trials);
    let mut chosen = Vec::with_capacity(trials);
    let mut oracle_errs = Vec::new();
    let mut oracle_gaps = Vec::new();
    let mut converged = 0;
    for t in 0..trials {
        let seed = trial_seed(cfg.seed, r, rho, t);
        let data = gen_composite::<f32>(n, n, r, rho, seed)?;
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let start = Instant::now();
        let mut src = train_cfg.batch_source(&data.y)?;
        let out = greedy_train(&mut src, lambda, &train_cfg, &cfg.schedule, false).map_err(context)?;
        times.push(start.elapsed().as_secs_f64());
        let estimate = out.model.low_rank(&data.y)?;
        errs.push(relative_error(&data.low_rank, &estimate)?);
        chosen.push(out.chosen_rank);
        if cfg.oracle && n <= DEFAULT_SVD_CAP {
            let ialm = ialm_rpca(
                &data.y,
                &IalmConfig {
                    lambda: Some(lambda),
                    ..Default::default()
                },
            )?;
            converged += usize::from(ialm.converged);
            oracle_errs.push(relative_error(&data.low_rank, &ialm.low_rank)?);
            oracle_gaps.push(relative_error(&ialm.low_rank, &estimate)?);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(PhaseCellResult {
        n,
        r,
        rho,
        lambda,
        trials,
        rel_err_mean: mean(&errs),
        time_mean_seconds: mean(&times),
        chosen_ranks: chosen,
        oracle: (!oracle_errs.is_empty()).then(|| OracleCell {
            rel_err_mean: mean(&oracle_errs),
            bear_vs_oracle_mean: mean(&oracle_gaps),
            converged_trials: converged,
        }),
    })
}

/// Column names of the phase-diagram CSV.
pub const PHASE_COLUMNS: [&str; 8] = [
    "n",
    "r",
    "rho",
    "lambda",
    "trials",
    "rel_err_mean",
    "time_mean_seconds",
    "chosen_rank_mode",
];

/// Column names of the optional oracle CSV.
pub const ORACLE_COLUMNS: [&str; 6] = [
    "n",
    "r",
    "rho",
    "ialm_rel_err_mean",
    "bear_vs_ialm_mean",
    "ialm_converged",
];

pub fn phase_table(cells: &[PhaseCellResult]) -> Result<MetricTable> {
    let mut table = MetricTable::new(PHASE_COLUMNS);
    for c in cells {
        table.push(vec![
            c.n.into(),
            c.r.into(),
            c.rho.into(),
            c.lambda.into(),
            c.trials.into(),
            c.rel_err_mean.into(),
            c.time_mean_seconds.into(),
            c.chosen_rank_mode().into(),
        ])?;
    }
    Ok(table)
}

pub fn oracle_table(cells: &[PhaseCellResult]) -> Result<MetricTable> {
    let mut table = MetricTable::new(ORACLE_COLUMNS);
    for c in cells {
        if let Some(o) = &c.oracle {
            table.push(vec![
                c.n.into(),
                c.r.into(),
                c.rho.into(),
                o.rel_err_mean.into(),
                o.bear_vs_oracle_mean.into(),
                o.converged_trials.into(),
            ])?;
        }
    }
    Ok(table)
}

/// Runs every `(r, ρ)` cell (ranks outer, densities inner) and writes the
/// phase CSV to `out_csv`.
pub fn phase_diagram(
    n: usize,
    ranks: &[usize],
    rhos: &[f64],
    lambda: f64,
    cfg: &PhaseConfig,
    trials: usize,
    out_csv: impl AsRef<Path>,
) -> Result<Vec<PhaseCellResult>> {
    if ranks.is_empty() || rhos.is_empty() {
        return Err(BearError::Parameter("rank and density lists must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(ranks.len() * rhos.len());
    for &r in ranks {
        for &rho in rhos {
            cells.push(phase_cell(n, r, rho, lambda, cfg, trials)?);
        }
    }
    write_metrics_csv(&phase_table(&cells)?, out_csv)?;
    Ok(cells)
}
