use std::path::{Path, PathBuf};
use std::time::Instant;

use bear_core::io::{
    inspect_bmat, read_bmat_capped, write_bmat, write_metrics_csv, BatchSource, BmatWriter, ColumnStore, MappedBmat,
};
use bear_core::linalg::gemm_tn;
use bear_core::nmf::{cascade_train_two_stage, NmfModel};
use bear_core::score::score_footprints;
use bear_core::solver::{
    default_lambda, greedy_train, infer_stream_threads, BmatSinks, DecompositionSink, InferStats, NullSink,
};
use bear_core::synth::{oracle_table, phase_diagram, write_parts_bmat, PhaseConfig};
use bear_core::{
    cascade_train, extract_footprints, gen_video, nmf_train, train, BearModel, Matrix, RankSchedule, VideoSpec,
};

use crate::args::{BenchArgs, CascadeArgs, DecomposeArgs, GenArgs, GenKind, GreedyArgs, InfoArgs, NmfArgs};
use crate::budget;
use crate::error::CliError;
use crate::manifest::RunManifest;

/// Heap limit for BMAT files loaded whole (ground-truth maps) when no cap is set.
const DEFAULT_LOAD_CAP: u64 = 1 << 30;

fn open(path: &Path) -> Result<MappedBmat, CliError> {
    Ok(MappedBmat::open(path)?)
}

fn first_output<'a>(outs: impl IntoIterator<Item = &'a Option<PathBuf>>) -> Option<PathBuf> {
    outs.into_iter().flatten().next().cloned()
}

/// Streams `W·Wᵀ·Y` and `Y − W·Wᵀ·Y` to whichever outputs are requested.
fn stream_split(
    model: &BearModel<f32>,
    src: &BatchSource<'_, f32>,
    out_l: Option<&Path>,
    out_s: Option<&Path>,
    threads: usize,
) -> Result<InferStats, CliError> {
    if out_l.is_none() && out_s.is_none() {
        return Ok(infer_stream_threads(model, src, &mut NullSink, threads)?);
    }
    let mut sinks = BmatSinks::create(src.rows(), src.cols(), out_l, out_s)?;
    let stats = infer_stream_threads(model, src, &mut sinks as &mut dyn DecompositionSink<f32>, threads)?;
    sinks.finish()?;
    Ok(stats)
}

pub fn decompose(a: &DecomposeArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    let y = open(&a.input)?;
    let (n, m) = (y.rows(), y.cols());
    budget::check(budget::decompose(n, m, a.train.batch, a.rank), a.common.memory_cap)?;
    let cfg = a.train.config();
    let full = cfg.batch_source(&y)?;
    let train_cols = match a.train_frac {
        Some(f) if !(f > 0.0 && f <= 1.0) => {
            return Err(CliError::Usage(format!("--train-frac must lie in (0, 1], got {f}")));
        }
        Some(f) => ((f * m as f64).ceil() as usize).clamp(1, m),
        None => m,
    };
    let mut train_src = cfg.batch_source(&y)?.leading_columns(train_cols)?;

    let t = Instant::now();
    let out = train(&mut train_src, a.rank, &cfg)?;
    let train_seconds = t.elapsed().as_secs_f64();
    eprintln!(
        "trained rank {} on {train_cols}/{m} columns in {train_seconds:.3}s ({} epochs)",
        a.rank,
        out.loss_history.len()
    );
    if let Some(p) = &a.out_w {
        write_bmat(&out.model.w, p)?;
    }
    let t = Instant::now();
    let stats = stream_split(&out.model, &full, a.out_l.as_deref(), a.out_s.as_deref(), a.train.threads)?;
    let infer_seconds = t.elapsed().as_secs_f64();

    manifest.set("seed", a.train.seed);
    manifest.set_result("train_columns", train_cols);
    manifest.set_result("epochs_run", out.loss_history.len());
    manifest.set_result("stopped_early", out.stopped_early);
    manifest.set_result("train_seconds", train_seconds);
    manifest.set_result("infer_seconds", infer_seconds);
    manifest.set_result("sparse_l1", stats.sparse_l1);
    manifest.set_trace("loss", &out.loss_history);
    Ok(first_output([&a.out_l, &a.out_s, &a.out_w]))
}

pub fn greedy(a: &GreedyArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    let y = open(&a.input)?;
    let (n, m) = (y.rows(), y.cols());
    let schedule = RankSchedule {
        start: a.rank_start,
        step: a.rank_step,
        max: a.rank_max,
    };
    let max_rank = schedule.ranks(n, m)?.last().copied().unwrap_or(1);
    budget::check(budget::greedy(n, m, a.train.batch, max_rank), a.common.memory_cap)?;
    let lambda = a.lambda.unwrap_or_else(|| default_lambda(n, m));
    let cfg = a.train.config();
    let mut src = cfg.batch_source(&y)?;

    let t = Instant::now();
    let out = greedy_train(&mut src, lambda, &cfg, &schedule, a.warm_start)?;
    let train_seconds = t.elapsed().as_secs_f64();
    eprintln!("chose rank {} (lambda {lambda}) in {train_seconds:.3}s", out.chosen_rank);
    if let Some(p) = &a.out_w {
        write_bmat(&out.model.w, p)?;
    }
    let stats = stream_split(&out.model, &src, a.out_l.as_deref(), a.out_s.as_deref(), a.train.threads)?;

    manifest.set("seed", a.train.seed);
    manifest.set_result("lambda", lambda);
    manifest.set_result("chosen_rank", out.chosen_rank);
    manifest.set_result("exhausted", out.exhausted);
    manifest.set_result("train_seconds", train_seconds);
    manifest.set_result("sparse_l1", stats.sparse_l1);
    let ranks: Vec<String> = out.trace.iter().map(|(r, _)| r.to_string()).collect();
    manifest.set("trace.rank", ranks.join(","));
    manifest.set_trace("objective", &out.trace.iter().map(|&(_, o)| o).collect::<Vec<_>>());
    manifest.set_trace("loss", &out.loss_history);
    Ok(first_output([&a.out_l, &a.out_s, &a.out_w]))
}

/// Streams `Wᵀ·Y` (r × m) column block by column block.
fn write_coefficients(w: &Matrix<f32>, src: &BatchSource<'_, f32>, path: &Path) -> Result<(), CliError> {
    let mut writer = BmatWriter::create(path, w.cols(), src.cols())?;
    src.sequential().for_each_in_order(|_, yb| writer.push_columns(&gemm_tn(w, yb)))?;
    writer.finish()?;
    Ok(())
}

pub fn nmf(a: &NmfArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    let y = open(&a.input)?;
    let (n, m) = (y.rows(), y.cols());
    budget::check(budget::nmf(n, m, a.train.batch, a.rank), a.common.memory_cap)?;
    let cfg = a.train.config();
    let mut src = cfg.batch_source(&y)?;
    let t = Instant::now();
    let out = nmf_train(&mut src, a.rank, &cfg)?;
    let train_seconds = t.elapsed().as_secs_f64();
    eprintln!("projective NMF rank {} in {train_seconds:.3}s", a.rank);
    let NmfModel { w } = &out.model;
    if let Some(p) = &a.out_w {
        write_bmat(w, p)?;
    }
    if let Some(p) = &a.out_h {
        write_coefficients(w, &src, p)?;
    }
    manifest.set("seed", a.train.seed);
    manifest.set_result("train_seconds", train_seconds);
    manifest.set_result("stopped_early", out.stopped_early);
    manifest.set_trace("loss", &out.loss_history);
    Ok(first_output([&a.out_w, &a.out_h]))
}

fn write_traces_csv(temporal: &Matrix<f32>, path: &Path) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["frame".to_string()];
    header.extend((0..temporal.rows()).map(|k| format!("trace_{k}")));
    w.write_record(&header).map_err(io)?;
    for j in 0..temporal.cols() {
        let mut row = vec![j.to_string()];
        row.extend(temporal.col(j).iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn cascade(a: &CascadeArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    let y = open(&a.input)?;
    let (n, m) = (y.rows(), y.cols());
    budget::check(budget::cascade(n, m, a.train.batch, a.rank1, a.rank2), a.common.memory_cap)?;
    let cfg = a.train.config();
    let mut src = cfg.batch_source(&y)?;
    let t = Instant::now();
    let out = if a.two_stage {
        cascade_train_two_stage(&mut src, a.rank1, a.rank2, a.mu, &cfg)?
    } else {
        cascade_train(&mut src, a.rank1, a.rank2, a.mu, &cfg)?
    };
    let train_seconds = t.elapsed().as_secs_f64();
    eprintln!("cascade ranks {}+{} (mu {}) in {train_seconds:.3}s", a.rank1, a.rank2, a.mu);

    let fp = extract_footprints(&out.model, &src, a.normalize)?;
    if let Some(p) = &a.out_spatial {
        write_bmat(&fp.spatial, p)?;
    }
    if let Some(p) = &a.out_temporal {
        write_bmat(&fp.temporal, p)?;
    }
    if let Some(p) = &a.out_csv {
        write_traces_csv(&fp.temporal, p)?;
    }
    if let Some(p) = &a.out_background {
        stream_split(&BearModel::new(out.model.w1.clone()), &src, Some(p), None, a.train.threads)?;
    }

    if let Some(ts) = &a.truth_spatial {
        let cap = a.common.memory_cap.unwrap_or(DEFAULT_LOAD_CAP);
        let truth_spatial = read_bmat_capped(ts, cap)?;
        let truth_temporal = a.truth_temporal.as_ref().map(|p| read_bmat_capped(p, cap)).transpose()?;
        let score = score_footprints(&fp.spatial, Some(&fp.temporal), &truth_spatial, truth_temporal.as_ref())?;
        eprintln!(
            "footprint confinement min {:.4} mean {:.4}",
            score.min_confinement(),
            score.mean_confinement()
        );
        manifest.set_result("min_confinement", score.min_confinement());
        manifest.set_result("mean_confinement", score.mean_confinement());
        if let Some(c) = score.min_correlation() {
            eprintln!("trace correlation min {c:.4}");
            manifest.set_result("min_correlation", c);
        }
    }
    manifest.set("seed", a.train.seed);
    manifest.set_result("train_seconds", train_seconds);
    manifest.set_result("stopped_early", out.stopped_early);
    manifest.set_trace("loss", &out.loss_history);
    Ok(first_output([&a.out_spatial, &a.out_temporal, &a.out_background, &a.out_csv]))
}

pub fn bench(a: &BenchArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    let lambda = a.lambda.unwrap_or_else(|| default_lambda(a.n, a.n));
    let cfg = PhaseConfig {
        train: a.train.config(),
        schedule: RankSchedule {
            start: a.rank_start,
            step: a.rank_step,
            max: a.rank_max,
        },
        oracle: a.oracle,
        seed: a.train.seed,
    };
    let max_rank = cfg.schedule.ranks(a.n, a.n)?.last().copied().unwrap_or(1);
    budget::check(
        // Trials hold the composite (Y, L, S) densely.
        budget::greedy(a.n, a.n, a.train.batch, max_rank) + 3 * 4 * (a.n as u64) * (a.n as u64),
        a.common.memory_cap,
    )?;
    let t = Instant::now();
    let cells = phase_diagram(a.n, &a.ranks, &a.rhos, lambda, &cfg, a.trials, &a.out)?;
    if a.oracle {
        let mut p = a.out.as_os_str().to_owned();
        p.push(".oracle.csv");
        write_metrics_csv(&oracle_table(&cells)?, PathBuf::from(p))?;
    }
    eprintln!("{} cells in {:.3}s", cells.len(), t.elapsed().as_secs_f64());
    manifest.set("seed", a.train.seed);
    manifest.set_result("lambda", lambda);
    manifest.set_result("cells", cells.len());
    Ok(Some(a.out.clone()))
}

pub fn gen(a: &GenArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    manifest.set("seed", a.seed);
    if a.kind != GenKind::Video {
        let m = a.m.unwrap_or(a.n);
        let (rank, rho) = match a.kind {
            GenKind::Lowrank => (Some(a.rank), None),
            GenKind::Sparse => (None, Some(a.rho)),
            _ => (Some(a.rank), Some(a.rho)),
        };
        budget::check(4 * (a.n as u64) * (rank.unwrap_or(0) as u64 + 3), a.common.memory_cap)?;
        write_parts_bmat(&a.out, a.n, m, rank, rho, a.seed)?;
        eprintln!("wrote {}x{m} {:?} matrix to {}", a.n, a.kind, a.out.display());
        return Ok(Some(a.out.clone()));
    }
    let spec = VideoSpec {
        width: a.width,
        height: a.height,
        frames: a.frames,
        blobs: a.blobs,
        sigma: a.sigma,
        background: !a.no_background,
        event_rate: a.event_rate,
        decay_frames: a.decay,
        seed: a.seed,
    };
    // Generated in f64: video, background and the scratch copies.
    let dense = 8 * 3 * (spec.pixels() as u64) * (spec.frames as u64);
    budget::check(dense, a.common.memory_cap)?;
    let (video, truth) = gen_video::<f32>(&spec)?;
    write_bmat(&video, &a.out)?;
    if let Some(p) = &a.out_truth_spatial {
        write_bmat(&truth.spatial, p)?;
    }
    if let Some(p) = &a.out_truth_temporal {
        write_bmat(&truth.activation, p)?;
    }
    if let Some(p) = &a.out_truth_background {
        write_bmat(&truth.background, p)?;
    }
    eprintln!("wrote {}x{} blob video to {}", spec.pixels(), spec.frames, a.out.display());
    Ok(Some(a.out.clone()))
}

/// Streaming summary of a BMAT file.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub rows: u64,
    pub cols: u64,
    pub file_bytes: u64,
    pub fro_norm: f64,
    pub l1_norm: f64,
    pub min: f64,
    pub max: f64,
    pub nonzeros: u64,
    pub non_finite: u64,
}

pub fn summarize(path: &Path) -> Result<Summary, CliError> {
    let header = inspect_bmat(path)?;
    let y = open(path)?;
    let mut s = Summary {
        rows: header.rows,
        cols: header.cols,
        file_bytes: header.file_bytes(),
        fro_norm: 0.0,
        l1_norm: 0.0,
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        nonzeros: 0,
        non_finite: 0,
    };
    let mut col = vec![0.0f32; y.rows()];
    let mut sq = 0.0f64;
    for j in 0..y.cols() {
        y.copy_column(j, &mut col);
        for &v in &col {
            if !v.is_finite() {
                s.non_finite += 1;
                continue;
            }
            let v = v as f64;
            sq += v * v;
            s.l1_norm += v.abs();
            s.min = s.min.min(v);
            s.max = s.max.max(v);
            s.nonzeros += (v != 0.0) as u64;
        }
    }
    s.fro_norm = sq.sqrt();
    Ok(s)
}

pub fn info(a: &InfoArgs, manifest: &mut RunManifest) -> Result<Option<PathBuf>, CliError> {
    let s = summarize(&a.input)?;
    println!("rows: {}", s.rows);
    println!("cols: {}", s.cols);
    println!("dtype: f32le");
    println!("file_bytes: {}", s.file_bytes);
    println!("fro_norm: {}", s.fro_norm);
    println!("l1_norm: {}", s.l1_norm);
    println!("min: {}", s.min);
    println!("max: {}", s.max);
    println!("nonzeros: {}", s.nonzeros);
    println!("non_finite: {}", s.non_finite);
    manifest.set_result("rows", s.rows);
    manifest.set_result("cols", s.cols);
    manifest.set_result("fro_norm", s.fro_norm);
    manifest.set_result("l1_norm", s.l1_norm);
    // Nothing is written, so a manifest only appears when asked for.
    Ok(None)
}
