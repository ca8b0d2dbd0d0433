//! Run orchestration: builds the initial field, runs a pipeline, writes its
//! CSV, field files and JSON summary, and maps failures to exit codes.

use crate::binfmt::{FieldFile, FormatError, ValueKind};
use crate::config::{ConfigError, KindName, RunConfig};
use covllg_core::cgl::{grad_u_norm, picard_solve};
use covllg_core::frame;
use covllg_core::llg::{self, SpinField, Trajectory};
use covllg_core::norms::{
    attach_frame_norms, check_bootstrap, check_decay_bound, check_theorem_bounds,
    fit_decay_exponent, r0_series, weighted_norms, weighted_norms_of_u, NormRecord, Quantity,
    WeightedNorms,
};
use covllg_core::scenario::make_initial;
use covllg_core::spectral::lp_norm_complex_components;
use covllg_core::{Error, Spectral};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 10;
pub const EXIT_FRAME: i32 = 11;
pub const EXIT_NO_CONTRACTION: i32 = 12;

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    RunLlg,
    RunFrames,
    RunPicard,
    Monitor,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RunLlg => "run-llg",
            Command::RunFrames => "run-frames",
            Command::RunPicard => "run-picard",
            Command::Monitor => "monitor",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("input: {0}")]
    Input(String),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("field file: {0}")]
    Format(#[from] FormatError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) | Failure::Input(_) | Failure::Format(_) => EXIT_CONFIG,
            Failure::Core(e) => match e {
                Error::BlowUpSuspected { .. } => EXIT_BLOWUP,
                Error::FrameDegenerate { .. } | Error::InconsistentFrame { .. } => EXIT_FRAME,
                Error::NoContraction { .. } => EXIT_NO_CONTRACTION,
                _ => EXIT_FAILURE,
            },
            _ => EXIT_FAILURE,
        }
    }
}

/// Sidecar of a checkpoint field file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub t: f64,
    pub step: usize,
    pub m_inf: [f64; 3],
}

pub fn meta_path(field: &Path) -> PathBuf {
    field.with_extension("json")
}

pub fn save_checkpoint(path: &Path, m: &SpinField, t: f64, step: usize) -> Result<(), Failure> {
    FieldFile::from_spin(m).save(path)?;
    let meta = CheckpointMeta {
        t,
        step,
        m_inf: m.m_inf,
    };
    fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Field and start time of a checkpoint; a missing sidecar means `t = 0` and
/// the configured `m_inf`.
pub fn load_checkpoint(path: &Path, cfg: &RunConfig) -> Result<(SpinField, f64, usize), Failure> {
    let file = FieldFile::load(path)?;
    let meta = match fs::read_to_string(meta_path(path)) {
        Ok(text) => Some(serde_json::from_str::<CheckpointMeta>(&text)?),
        Err(e) if e.kind() == io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let m_inf = meta.as_ref().map_or(cfg.m_inf(), |m| m.m_inf);
    let m = file.to_spin(m_inf)?;
    if *m.grid() != cfg.grid()? {
        return Err(Failure::Input(format!(
            "{} is on a {}-d grid with {} points per axis, the config asks for {}-d with {}",
            path.display(),
            m.grid().dimension(),
            m.grid().points_per_axis(),
            cfg.grid.dimension,
            cfg.grid.points
        )));
    }
    Ok((m, meta.as_ref().map_or(0.0, |m| m.t), meta.map_or(0, |m| m.step)))
}

fn initial_field(cfg: &RunConfig, resume: Option<&Path>) -> Result<(SpinField, f64, usize), Failure> {
    if let Some(path) = resume {
        return load_checkpoint(path, cfg);
    }
    if cfg.scenario.kind == KindName::Custom {
        let file = FieldFile::load(Path::new(&cfg.scenario.custom_path))?;
        let m = file.to_spin(cfg.m_inf())?;
        if *m.grid() != cfg.grid()? {
            return Err(Failure::Input("custom field grid differs from the config grid".into()));
        }
        return Ok((m, 0.0, 0));
    }
    Ok((make_initial(&cfg.scenario_spec(), cfg.grid()?)?, 0.0, 0))
}

/// Runs `cmd` and writes `summary.json` into the output directory whatever the
/// outcome. Returns the process exit code.
pub fn execute(cmd: Command, cfg: &RunConfig, resume: Option<&Path>) -> i32 {
    let out = PathBuf::from(&cfg.output.dir);
    if let Err(e) = prepare_dir(&out) {
        eprintln!("error: output directory {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    let result = match cmd {
        Command::RunLlg => run_llg(cfg, &out, resume, false),
        Command::Monitor => run_llg(cfg, &out, resume, true),
        Command::RunFrames => run_frames(cfg, &out, resume),
        Command::RunPicard => run_picard(cfg, &out, resume),
    };
    let (code, error, results) = match result {
        Ok(v) => (EXIT_OK, None, v),
        Err(f) => {
            eprintln!("error: {f}");
            (f.exit_code(), Some(f.to_string()), Value::Null)
        }
    };
    let summary = json!({
        "command": cmd.name(),
        "status": if code == EXIT_OK { "ok" } else { "error" },
        "exit_code": code,
        "error": error,
        "delta": cfg.monitor.delta,
        "config": cfg,
        "results": results,
    });
    let write = serde_json::to_string_pretty(&summary)
        .map_err(io::Error::other)
        .and_then(|s| fs::write(out.join(SUMMARY_FILE), s + "\n"));
    if let Err(e) = write {
        eprintln!("error: writing summary: {e}");
        if code == EXIT_OK {
            return EXIT_FAILURE;
        }
    }
    code
}

fn prepare_dir(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(probe)
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const SERIES_COLUMNS: [&str; 10] = [
    "t", "E", "linf_grad", "ln_grad", "h1_dev", "linf_dev", "u_lnd", "grad_u_ln", "drift", "delta",
];

fn series_row(r: &NormRecord, t0: f64, delta: f64) -> Vec<String> {
    vec![
        num(t0 + r.t),
        num(r.energy),
        num(r.grad_linf),
        num(r.grad_ln),
        num(r.h1_dev),
        num(r.linf_dev),
        num(r.u_lnd),
        opt(r.grad_u_ln),
        num(r.drift),
        num(delta),
    ]
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn evolve_from(sp: &Spectral, cfg: &RunConfig, m0: &SpinField, t0: f64) -> Result<Trajectory, Failure> {
    let mut solver = cfg.solver_config();
    solver.t_end = cfg.solver.t_end - t0;
    if solver.t_end < solver.dt {
        return Err(Failure::Input(format!(
            "start time {t0} leaves less than one step before t_end = {}",
            cfg.solver.t_end
        )));
    }
    Ok(llg::evolve_with_delta(sp, m0, &solver, cfg.monitor.delta)?)
}

fn write_checkpoints(cfg: &RunConfig, out: &Path, traj: &Trajectory, t0: f64, step0: usize) -> Result<Vec<String>, Failure> {
    let dt = cfg.solver.dt;
    let mut written = Vec::new();
    let every = cfg.output.checkpoint_every;
    for (i, (t, m)) in traj.times.iter().zip(&traj.snapshots).enumerate() {
        if every == 0 || i == 0 || i % every != 0 {
            continue;
        }
        let step = step0 + (t / dt).round() as usize;
        let name = format!("checkpoint_{step:06}.llgf");
        save_checkpoint(&out.join(&name), m, t0 + t, step)?;
        written.push(name);
    }
    let last = traj.len() - 1;
    let step = step0 + (traj.times[last] / dt).round() as usize;
    save_checkpoint(&out.join("final.llgf"), &traj.snapshots[last], t0 + traj.times[last], step)?;
    written.push("final.llgf".into());
    Ok(written)
}

fn weighted_json(w: &WeightedNorms) -> Value {
    json!({
        "k_max": w.k.last(),
        "k_prime_max": w.k_prime.last(),
        "r_max": w.r.last(),
    })
}

fn default_window(cfg: &RunConfig, traj: &Trajectory) -> (f64, f64) {
    if cfg.monitor.decay_window.len() == 2 {
        return (cfg.monitor.decay_window[0], cfg.monitor.decay_window[1]);
    }
    let end = *traj.times.last().unwrap();
    (0.1, (0.5 * traj.series.spectral_gap_time).min(end))
}

/// Slope of `ln ‖m − m_∞‖_∞` against `t` over all samples, sign flipped.
fn exponential_rate(traj: &Trajectory) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj
        .series
        .records
        .iter()
        .filter(|r| r.linf_dev > 0.0)
        .map(|r| (r.t, r.linf_dev.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| -sxy / sxx)
}

fn decay_json(cfg: &RunConfig, traj: &Trajectory) -> Value {
    let window = default_window(cfg, traj);
    let fit = match fit_decay_exponent(&traj.series, Quantity::LinfDev, window) {
        Ok(f) => json!({
            "exponent": f.exponent,
            "constant": f.constant,
            "residual": f.residual,
            "poor_power_law": f.poor_power_law,
        }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    let bound = match check_decay_bound(&traj.series, Quantity::LinfDev, window, cfg.monitor.decay_exponent) {
        Ok(b) => json!({
            "exponent": b.exponent,
            "c_fit": b.c_fit,
            "samples": b.samples,
            "violations": b.violations.len(),
            "holds": b.holds(),
        }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    json!({
        "window": [window.0, window.1],
        "exponential_rate": exponential_rate(traj),
        "power_law": fit,
        "bound": bound,
    })
}

fn run_llg(cfg: &RunConfig, out: &Path, resume: Option<&Path>, all_monitors: bool) -> Result<Value, Failure> {
    let grid = cfg.grid()?;
    let sp = Spectral::new(grid);
    let delta = cfg.monitor.delta;
    let (m0, t0, step0) = initial_field(cfg, resume)?;
    let mut traj = evolve_from(&sp, cfg, &m0, t0)?;
    let mut outputs = write_checkpoints(cfg, out, &traj, t0, step0)?;
    let mon = &cfg.monitor;
    let sigma = if all_monitors && mon.sobolev_sigma == 0 { 2 } else { mon.sobolev_sigma };
    let on = |flag: bool| flag || all_monitors;

    let mut energy_residual = vec![None; traj.len()];
    let mut energy_json = Value::Null;
    if on(mon.energy_law) && traj.len() >= 3 {
        let samples = llg::energy_law_residual(&sp, &traj)?;
        let scale = samples.iter().map(|s| s.dissipation).fold(0.0, f64::max);
        let worst = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
        for (i, s) in samples.iter().enumerate() {
            energy_residual[i + 1] = Some(s.residual);
        }
        energy_json = json!({
            "max_residual": worst,
            "max_relative": if scale > 0.0 { worst / scale } else { 0.0 },
        });
    }

    let mut bootstrap_json = Value::Null;
    if on(mon.frame_norms) {
        attach_frame_norms(&sp, &mut traj)?;
        let r = weighted_norms(&traj.series, delta)?;
        let u0 = frame::coulomb_fields(&sp, &traj.snapshots[0], None)?.u;
        let r0 = r0_series(&sp, &u0, &traj.times, delta, cfg.solver.lambda)?;
        let rep = check_bootstrap(&r, &r0.norms)?;
        write_csv(
            &out.join("weighted.csv"),
            &["t", "K", "K_prime", "R", "R0", "delta"],
            (0..r.times.len()).map(|i| {
                vec![num(t0 + r.times[i]), num(r.k[i]), num(r.k_prime[i]), num(r.r[i]), num(r0.norms.r[i]), num(delta)]
            }),
        )?;
        outputs.push("weighted.csv".into());
        bootstrap_json = json!({
            "holds": rep.holds,
            "worst_margin": rep.worst_margin,
            "max_ratio": rep.max_ratio,
            "r0_constant": r0.c_fit,
            "weighted": weighted_json(&r),
        });
    }

    let theorem_json = if on(mon.theorem_bounds) {
        let th = check_theorem_bounds(&traj.series)?;
        json!({
            "grad0_ln": th.grad0_ln,
            "c_alpha": th.c_alpha,
            "c_gradient": th.c_gradient,
            "c_ln": th.c_ln,
            "h1_non_increasing": th.h1_non_increasing,
            "h1_max_increase": th.h1_max_increase,
        })
    } else {
        Value::Null
    };

    let sobolev_json = if sigma >= 2 {
        let rep = llg::sobolev_monitor(&sp, &traj, sigma)?;
        json!({ "sigma": sigma, "c_fit": rep.c_fit, "violations": rep.violations.len() })
    } else {
        Value::Null
    };

    let decay = if on(mon.decay) { decay_json(cfg, &traj) } else { Value::Null };

    let mut header: Vec<&str> = SERIES_COLUMNS.to_vec();
    header.push("energy_residual");
    write_csv(
        &out.join("series.csv"),
        &header,
        traj.series.records.iter().zip(&energy_residual).map(|(r, e)| {
            let mut row = series_row(r, t0, delta);
            row.push(opt(*e));
            row
        }),
    )?;
    outputs.insert(0, "series.csv".into());

    let first = &traj.series.records[0];
    let last = traj.series.records.last().unwrap();
    Ok(json!({
        "samples": traj.len(),
        "t_start": t0,
        "t_final": t0 + last.t,
        "energy_initial": first.energy,
        "energy_final": last.energy,
        "grad_ln_initial": first.grad_ln,
        "max_drift": traj.series.records.iter().map(|r| r.drift).fold(0.0, f64::max),
        "spectral_gap_time": traj.series.spectral_gap_time,
        "energy_law": energy_json,
        "bootstrap": bootstrap_json,
        "theorem": theorem_json,
        "sobolev": sobolev_json,
        "decay": decay,
        "outputs": outputs,
    }))
}

struct FrameRow {
    torsion: f64,
    curvature: f64,
    u0: f64,
    divergence: f64,
    reconstruction: f64,
}

fn run_frames(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<Value, Failure> {
    let grid = cfg.grid()?;
    let sp = Spectral::new(grid);
    let lambda = cfg.solver.lambda;
    let delta = cfg.monitor.delta;
    let (m0, t0, _) = initial_field(cfg, resume)?;
    let traj = if resume.is_some() {
        Trajectory::from_snapshots(&sp, lambda, vec![0.0], vec![m0])?
    } else {
        evolve_from(&sp, cfg, &m0, t0)?
    };
    let mut rows = Vec::with_capacity(traj.len());
    let mut records = Vec::with_capacity(traj.len());
    let mut last_fields = None;
    for (m, rec) in traj.snapshots.iter().zip(&traj.series.records) {
        let fr = frame::construct_frame(m, cfg.frame_reference())?;
        let raw = frame::derive_connection(&sp, m, &fr, Some(lambda))?;
        let reconstruction = frame::reconstruction_error(&sp, m, &fr, &raw)?;
        let gauged = frame::coulomb_gauge(&sp, &raw)?;
        rows.push(FrameRow {
            torsion: frame::verify_torsion(&sp, &gauged)?.max_abs,
            curvature: frame::verify_curvature(&sp, &gauged)?.max_abs,
            u0: frame::verify_u0_consistency(&sp, &gauged, lambda)?.max_abs,
            divergence: sp.divergence(&gauged.a)?.max_abs(),
            reconstruction,
        });
        let mut rec = rec.clone();
        rec.grad_u_ln = Some(grad_u_norm(&sp, &gauged.u, grid.dimension() as f64)?);
        records.push(rec);
        last_fields = Some(gauged);
    }
    let fields = last_fields.expect("at least one snapshot");
    FieldFile::from_complex(&fields.u).save(&out.join("u_final.llgf"))?;
    FieldFile::from_scalars(&fields.a).save(&out.join("a_final.llgf"))?;

    let mut header: Vec<&str> = SERIES_COLUMNS.to_vec();
    header.extend(["torsion", "curvature", "u0_consistency", "coulomb_div", "reconstruction"]);
    write_csv(
        &out.join("frames.csv"),
        &header,
        records.iter().zip(&rows).map(|(r, f)| {
            let mut row = series_row(r, t0, delta);
            row.extend([f.torsion, f.curvature, f.u0, f.divergence, f.reconstruction].map(num));
            row
        }),
    )?;
    let max = |g: fn(&FrameRow) -> f64| rows.iter().map(g).fold(0.0, f64::max);
    let worst = [max(|r| r.torsion), max(|r| r.curvature), max(|r| r.u0)];
    Ok(json!({
        "samples": rows.len(),
        "max_torsion": worst[0],
        "max_curvature": worst[1],
        "max_u0_consistency": worst[2],
        "max_coulomb_div": max(|r| r.divergence),
        "max_reconstruction": max(|r| r.reconstruction),
        "tolerance": cfg.frames.tolerance,
        "within_tolerance": worst.iter().all(|&w| w <= cfg.frames.tolerance),
        "outputs": ["frames.csv", "u_final.llgf", "a_final.llgf"],
    }))
}

fn run_picard(cfg: &RunConfig, out: &Path, resume: Option<&Path>) -> Result<Value, Failure> {
    let grid = cfg.grid()?;
    let sp = Spectral::new(grid);
    let delta = cfg.monitor.delta;
    let n = grid.dimension() as f64;
    let u0 = match resume.map(FieldFile::load).transpose()? {
        Some(file) if file.kind == ValueKind::Complex => {
            if file.grid != grid || file.components != grid.dimension() {
                return Err(Failure::Input(format!(
                    "u file needs {} complex components on the config grid",
                    grid.dimension()
                )));
            }
            file.to_complex()?
        }
        _ => {
            let (m0, _, _) = initial_field(cfg, resume)?;
            frame::coulomb_fields(&sp, &m0, None)?.u
        }
    };
    let mesh = cfg.picard_mesh()?;
    let sol = picard_solve(&sp, &u0, &mesh, &cfg.picard_config())?;
    write_csv(
        &out.join("picard_history.csv"),
        &["iter", "sup_diff", "ratio", "delta"],
        sol.history
            .iter()
            .map(|h| vec![h.iter.to_string(), num(h.sup_diff), opt(h.ratio), num(delta)]),
    )?;
    FieldFile::from_complex(sol.u.last().unwrap()).save(&out.join("picard_u_final.llgf"))?;
    let r = weighted_norms_of_u(&sp, mesh.times(), &sol.u, delta)?;
    let r0 = r0_series(&sp, &u0, mesh.times(), delta, cfg.solver.lambda)?;
    let rep = check_bootstrap(&r, &r0.norms)?;
    Ok(json!({
        "iterations": sol.history.len(),
        "contraction_ratio": sol.contraction_ratio(),
        "last_sup_diff": sol.history.last().map(|h| h.sup_diff),
        "mesh_points": mesh.len(),
        "t_end": mesh.t_end(),
        "u0_ln": lp_norm_complex_components(&u0, n)?,
        "final_u_ln": lp_norm_complex_components(sol.u.last().unwrap(), n)?,
        "bootstrap": {
            "holds": rep.holds,
            "worst_margin": rep.worst_margin,
            "max_ratio": rep.max_ratio,
            "r0_constant": r0.c_fit,
            "weighted": weighted_json(&r),
        },
        "outputs": ["picard_history.csv", "picard_u_final.llgf"],
    }))
}
