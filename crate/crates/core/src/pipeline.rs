//! Config-driven pipelines: each writes its artifacts into the output
//! directory, evaluates its tolerance gates and records a manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::calderon::{reconstruct_potential, relative_error, simulate_measurements, ReconOptions};
use crate::config::{ExperimentConfig, Pipeline};
use crate::diffusion::{decay_series, dn_cost_check, evolve, heat_kernel_free, write_decay_csv, Mode};
use crate::dirichlet::DirichletSystem;
use crate::dnmap::{assemble_dn, dn_decomposition_check, dn_pointwise, integral_identity};
use crate::error::{Error, Result};
use crate::extension::{cs_extend, trace_derivative, y_ladder};
use crate::fracop::{apply_spectral, assemble_quadrature, fmt17, oracle_bumps, oracle_discrepancy, ExportFormat};
use crate::grid::{build_grid, Grid, Sel};
use crate::runge::{default_alphas, sweep, write_sweep_csv};

#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Gate {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Gate {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub pipeline: &'static str,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub versions: serde_json::Value,
    pub wall_time_s: f64,
    pub gates: Vec<Gate>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
    pub status: &'static str,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
    gates: Vec<Gate>,
    warnings: Vec<String>,
}

impl Out {
    /// Path of an artifact; names are fixed by the pipelines, never by config.
    fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs a pipeline and writes `manifest.json`. Gate failures are reported in
/// the manifest, not as errors.
pub fn run(pipeline: Pipeline, cfg: &ExperimentConfig) -> Result<Manifest> {
    if let Some(p) = cfg.pipeline {
        if p != pipeline {
            return Err(Error::ConfigInvalid(format!(
                "config is for `{}`, invoked as `{}`",
                p.name(),
                pipeline.name()
            )));
        }
    }
    let start = Instant::now();
    let grid = build_grid(cfg.grid.clone()).map_err(|e| Error::ConfigInvalid(format!("grid: {e}")))?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut out = Out {
        dir: cfg.output_dir.clone(),
        files: Vec::new(),
        gates: Vec::new(),
        warnings: Vec::new(),
    };
    let mut seeds = Vec::new();
    match pipeline {
        Pipeline::ValidateOp => {
            seeds.push(cfg.seed);
            validate_op(cfg, &grid, &mut out)?
        }
        Pipeline::Spectrum => spectrum(cfg, &grid, &mut out)?,
        Pipeline::Dnmap => dnmap(cfg, &grid, &mut out)?,
        Pipeline::RungeSweep => runge_sweep(cfg, &grid, &mut out)?,
        Pipeline::Invert => {
            seeds.push(cfg.seed);
            invert(cfg, &grid, &mut out)?
        }
        Pipeline::Extend => extend(cfg, &grid, &mut out)?,
        Pipeline::Diffuse => diffuse(cfg, &grid, &mut out)?,
    }
    let config_path = out.file("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(cfg)?)?;
    let mut files = Vec::new();
    for p in &out.files {
        let bytes = std::fs::read(p)?;
        files.push(FileEntry {
            path: p.file_name().unwrap().to_string_lossy().into_owned(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
    }
    let pass = out.gates.iter().all(|g| g.pass);
    let manifest = Manifest {
        tool: "fraccalderon",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: cfg.schema_version,
        pipeline: pipeline.name(),
        config_hash: sha256_hex(cfg.canonical_json()?.as_bytes()),
        seeds,
        versions: serde_json::json!({
            "fraccalderon": env!("CARGO_PKG_VERSION"),
            "nalgebra": "0.35",
            "rustfft": "6",
            "statrs": "0.19",
        }),
        wall_time_s: start.elapsed().as_secs_f64(),
        gates: out.gates,
        warnings: out.warnings,
        files,
        status: if pass { "ok" } else { "GATE_FAIL" },
    };
    std::fs::write(out.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn interior_values(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> DVector<f64> {
    DVector::from_iterator(grid.interior().len(), grid.interior().iter().map(|&k| f(grid.active_coord(k))))
}

fn exterior_values(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> DVector<f64> {
    DVector::from_iterator(grid.exterior().len(), grid.exterior().iter().map(|&k| f(grid.active_coord(k))))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn validate_op(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let op = assemble_quadrature(grid, cfg.s)?;
    let p = &cfg.validate;
    let bumps = oracle_bumps(grid, p.bumps, cfg.seed, (p.width[0], p.width[1]));
    let disc: Vec<f64> = bumps
        .iter()
        .map(|u| oracle_discrepancy(grid, &op, u, p.pad))
        .collect::<Result<_>>()?;
    write_rows(
        &out.file("operator_check.csv"),
        &["bump", "discrepancy"],
        disc.iter().enumerate().map(|(i, d)| vec![i.to_string(), fmt17(*d)]),
    )?;
    let asym = (&op.matrix - op.matrix.transpose()).amax() / op.matrix.amax();
    let min_eig = op.min_eigenvalue();
    out.gates.push(Gate::at_most("oracle_discrepancy", disc.iter().cloned().fold(0.0, f64::max), cfg.tolerances.oracle));
    out.gates.push(Gate::at_most("asymmetry", asym, 1e-14));
    out.gates.push(Gate {
        name: "min_eigenvalue_positive".into(),
        value: min_eig,
        threshold: 0.0,
        pass: min_eig > 0.0,
    });
    std::fs::write(out.file("grid.json"), serde_json::to_string(&grid.to_json())?)?;
    if p.export_matrix {
        op.export(grid, &out.file("operator.csv"), ExportFormat::Csv)?;
    }
    Ok(())
}

fn spectrum(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let op = assemble_quadrature(grid, cfg.s)?;
    let sys = DirichletSystem::new(grid, &op, cfg.potentials.q.build(grid)?)?;
    let sp = sys.spectrum()?;
    write_rows(
        &out.file("spectrum.csv"),
        &["j", "lambda"],
        sp.eigenvalues.iter().enumerate().map(|(j, l)| vec![(j + 1).to_string(), fmt17(*l)]),
    )?;
    let c = sys.check_condition(cfg.tolerances.eig)?;
    out.gates.push(Gate {
        name: "condition".into(),
        value: c.margin,
        threshold: c.threshold,
        pass: c.ok,
    });
    Ok(())
}

fn dnmap(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let op = assemble_quadrature(grid, cfg.s)?;
    let sys = DirichletSystem::new(grid, &op, cfg.potentials.q.build(grid)?)?;
    // second system for the integral identity
    let sys_other = DirichletSystem::new(grid, &op, cfg.potentials.q_true.build(grid)?)?;
    let (w1, w2) = (Sel::window(&cfg.dnmap.source), Sel::window(&cfg.dnmap.target));
    let d = assemble_dn(&sys, &w1, &w2)?;
    d.export_csv(grid, &out.file("dn_matrix.csv"))?;

    let tol = cfg.tolerances.identity;
    let full = assemble_dn(&sys, &Sel::ExteriorSupport, &Sel::ExteriorSupport)?;
    let sym = (&full.matrix - full.matrix.transpose()).amax() / full.matrix.amax();
    // random data on the source window, pointwise route vs the window matrix
    let mut rng_f = DVector::zeros(grid.exterior().len());
    let src = grid.window(&cfg.dnmap.source)?;
    for (i, &k) in grid.exterior().iter().enumerate() {
        if src.contains(&k) {
            rng_f[i] = ((i as f64 + 1.0) * 0.61803).fract() - 0.5;
        }
    }
    let pw = dn_pointwise(&sys, &rng_f)?;
    let f_src = grid.restrict(&grid.embed(&rng_f, &Sel::ExteriorSupport)?, &w1)?;
    let via_matrix = d.apply(&f_src);
    let pw_w2 = grid.restrict(&grid.embed(&pw, &Sel::ExteriorSupport)?, &w2)?;
    let agree = (&pw_w2 - &via_matrix).amax() / via_matrix.amax().max(f64::MIN_POSITIVE);
    let decomp = dn_decomposition_check(&sys, &rng_f)? / pw.amax().max(f64::MIN_POSITIVE);
    let f2 = exterior_values(grid, |p| (-(p[0] + 1.5).powi(2) / 0.05).exp());
    let id = integral_identity(&sys, &sys_other, &rng_f, &f2)?;
    let id_rel = id.residual / id.lhs.abs().max(1.0);
    write_rows(
        &out.file("dn_checks.csv"),
        &["check", "value"],
        [
            ("self_adjointness", sym),
            ("pointwise_vs_bilinear", agree),
            ("decomposition", decomp),
            ("integral_identity_lhs", id.lhs),
            ("integral_identity_rhs", id.rhs),
            ("integral_identity_residual", id_rel),
        ]
        .iter()
        .map(|(k, v)| vec![k.to_string(), fmt17(*v)]),
    )?;
    out.gates.push(Gate::at_most("self_adjointness", sym, tol));
    out.gates.push(Gate::at_most("pointwise_vs_bilinear", agree, tol));
    out.gates.push(Gate::at_most("decomposition", decomp, tol));
    out.gates.push(Gate::at_most("integral_identity", id_rel, tol));
    Ok(())
}

fn runge_sweep(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let op = assemble_quadrature(grid, cfg.s)?;
    let sys = DirichletSystem::new(grid, &op, cfg.potentials.q.build(grid)?)?;
    let target = interior_values(grid, |p| cfg.runge.target.eval(p));
    let alphas = cfg.runge.alphas.clone().unwrap_or_else(default_alphas);
    let pts = sweep(&sys, &Sel::window(&cfg.runge.window), &target, &alphas)?;
    write_sweep_csv(&pts, &out.file("runge_sweep.csv"))?;
    let mut order: Vec<_> = pts.clone();
    order.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    let worst_step = order
        .windows(2)
        .map(|w| w[1].residual - w[0].residual)
        .fold(f64::NEG_INFINITY, f64::max);
    out.gates.push(Gate::at_most("monotone_in_alpha", worst_step.max(0.0), 0.0));
    if let Some(g) = cfg.tolerances.runge {
        out.gates.push(Gate::at_most("final_relative_residual", order.last().unwrap().relative_residual, g));
    }
    Ok(())
}

fn invert(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let op = assemble_quadrature(grid, cfg.s)?;
    let q_true = cfg.potentials.q_true.build(grid)?;
    let q_ref = cfg.potentials.q_ref.build(grid)?;
    let truth = &q_true.values - &q_ref.values;
    let sys_true = DirichletSystem::new(grid, &op, q_true)?;
    let sys_ref = DirichletSystem::new(grid, &op, q_ref)?;
    let p = &cfg.invert;
    let meas = simulate_measurements(
        &sys_true,
        &sys_ref,
        &Sel::window(&p.source),
        &Sel::window(&p.target),
        p.sigma,
        cfg.seed,
    )?;
    let opts = ReconOptions {
        mode: p.mode,
        alpha: p.alpha,
        max_iter: p.max_iter,
        runge_gate: cfg.tolerances.runge_gate,
        ..Default::default()
    };
    let rec = reconstruct_potential(&meas, &sys_ref, &opts)?;
    write_rows(
        &out.file("q_estimate.csv"),
        &["node", "x", "y", "estimate", "truth"],
        grid.interior().iter().enumerate().map(|(i, &k)| {
            let c = grid.active_coord(k);
            vec![i.to_string(), fmt17(c[0]), fmt17(c[1]), fmt17(rec.estimate[i]), fmt17(truth[i])]
        }),
    )?;
    write_rows(
        &out.file("residuals.csv"),
        &["iteration", "beta", "residual", "discrepancy"],
        rec.history
            .iter()
            .map(|r| vec![r.iter.to_string(), fmt17(r.beta), fmt17(r.residual), fmt17(r.discrepancy)]),
    )?;
    if !rec.runge_residuals.is_empty() {
        write_rows(
            &out.file("runge_residuals.csv"),
            &["target", "relative_residual"],
            rec.runge_residuals.iter().enumerate().map(|(k, r)| vec![k.to_string(), fmt17(*r)]),
        )?;
    }
    if !rec.converged {
        out.warnings.push("discrepancy principle not met within max_iter".into());
    }
    if let Some(g) = cfg.tolerances.reconstruction {
        if truth.norm() > 0.0 {
            out.gates.push(Gate::at_most("reconstruction_error", relative_error(&rec.estimate, &truth), g));
        }
    }
    Ok(())
}

fn extend(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let u = grid.sample(|p| cfg.extend.u.eval(p));
    let field = cs_extend(grid, &u, cfg.s, &y_ladder(grid.h(), cfg.extend.levels))?;
    field.export_csv(grid, &out.file("extension.csv"))?;
    let tr = trace_derivative(grid, &field)?;
    let sp = apply_spectral(grid, &u, cfg.s, cfg.extend.pad)?;
    let inner: Vec<usize> = grid.interior().iter().map(|&k| grid.active()[k]).collect();
    write_rows(
        &out.file("trace.csv"),
        &["x", "trace", "spectral"],
        grid.active()
            .iter()
            .map(|&g| vec![fmt17(grid.coords()[g][0]), fmt17(tr.values[g]), fmt17(sp.values[g])]),
    )?;
    let num: f64 = inner.iter().map(|&g| (tr.values[g] - sp.values[g]).powi(2)).sum();
    let den: f64 = inner.iter().map(|&g| sp.values[g].powi(2)).sum();
    out.gates.push(Gate::at_most("trace_vs_spectral", (num / den).sqrt(), cfg.tolerances.extension));
    Ok(())
}

fn diffuse(cfg: &ExperimentConfig, grid: &Grid, out: &mut Out) -> Result<()> {
    let op = assemble_quadrature(grid, cfg.s)?;
    let sys = DirichletSystem::new(grid, &op, cfg.potentials.q.build(grid)?)?;
    let p = &cfg.diffuse;
    let f = exterior_values(grid, |x| p.exterior.eval(x));
    let l1 = sys.spectrum()?.lambda1();
    // smooth interior start, exterior per the clamp
    let start_in = interior_values(grid, |x| (3.0 * x[0]).cos() + 0.5);
    let mut initial = grid.embed(&start_in, &Sel::Interior)?;
    let fdata = match p.mode {
        Mode::Clamped => {
            initial = initial.axpy(1.0, &grid.embed(&f, &Sel::ExteriorSupport)?);
            Some(&f)
        }
        Mode::Homogeneous => None,
    };
    let series = decay_series(&sys, &initial, p.mode, fdata, &p.times)?;
    write_decay_csv(&series, &out.file("decay.csv"))?;
    let d0 = decay_series(&sys, &initial, p.mode, fdata, &[0.0])?[0].1;
    let worst = series
        .iter()
        .map(|(t, d)| d / (d0 * (-l1 * t).exp()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    out.gates.push(Gate::at_most("decay_bound_ratio", worst, 1.0 + 1e-10));

    let (t1, t2) = (0.3, 0.7);
    let a = evolve(&sys, &evolve(&sys, &initial, p.mode, fdata, t1)?.state, p.mode, fdata, t2)?;
    let b = evolve(&sys, &initial, p.mode, fdata, t1 + t2)?;
    let semi = (&a.state.values - &b.state.values).amax() / b.state.values.amax().max(f64::MIN_POSITIVE);
    out.gates.push(Gate::at_most("semigroup", semi, cfg.tolerances.semigroup));

    if f.amax() > 0.0 {
        let r1 = dn_cost_check(&sys, &f, None)?;
        let r2 = dn_cost_check(&sys, &f, Some(r1.dt / 2.0))?;
        let ratio = r1.max_rel_deviation / r2.max_rel_deviation;
        write_rows(
            &out.file("dn_cost.csv"),
            &["node", "x", "cost", "dn"],
            grid.exterior().iter().enumerate().map(|(i, &k)| {
                vec![i.to_string(), fmt17(grid.active_coord(k)[0]), fmt17(r1.cost[i]), fmt17(r1.dn[i])]
            }),
        )?;
        out.gates.push(Gate::at_most("richardson_ratio_offset", (ratio - 2.0).abs(), cfg.tolerances.richardson));
    }

    if grid.dim() == 1 {
        let hk = heat_kernel_free(grid, cfg.s, p.heat_t, p.heat_pad)?;
        let closed = |x: f64| p.heat_t / (std::f64::consts::PI * (p.heat_t * p.heat_t + x * x));
        write_rows(
            &out.file("heat_kernel.csv"),
            &["x", "p"],
            grid.coords().iter().enumerate().map(|(i, c)| vec![fmt17(c[0]), fmt17(hk.values[i])]),
        )?;
        out.gates.push(Gate::at_most("heat_mass", (hk.mass - 1.0).abs(), 1e-4));
        if (cfg.s - 0.5).abs() < 1e-15 {
            let r = grid.box_radius();
            let worst = grid
                .coords()
                .iter()
                .enumerate()
                .filter(|(_, c)| c[0].abs() <= r / 2.0)
                .map(|(i, c)| ((hk.values[i] - closed(c[0])) / closed(c[0])).abs())
                .fold(0.0, f64::max);
            out.gates.push(Gate::at_most("heat_closed_form", worst, cfg.tolerances.heat));
        }
    }
    Ok(())
}
