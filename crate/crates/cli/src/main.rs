//! `crystalsim` command line: scenario runs, the two validation campaigns
//! and metrics from saved snapshots.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crystalsim_core::campaigns::{self, AdiabaticOptions, DiffusionOptions, DIFFUSION_REFERENCE};
use crystalsim_core::config::{RunConfig, ScenarioKind};
use crystalsim_core::driver::{Sample, Simulation};
use crystalsim_core::geometry::SeedShape;
use crystalsim_core::metrics;
use crystalsim_core::oracle::{self, CellParams};
use crystalsim_core::snapshot::Snapshot;

#[derive(Parser)]
#[command(name = "crystalsim", version, about = "Crystal growth with latent heat: LBM flow and phase field, FD scalars")]
struct Cli {
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gaussian-hill convergence study on four grids
    ValidateDiffusion {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adiabatic cell against the lumped model
    ValidateAdiabatic {
        /// Cells per edge
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shape, quality and temperature probes of a snapshot
    Metrics {
        snapshot: PathBuf,
        /// Seed orientation in radians
        #[arg(long, default_value_t = 0.0)]
        orientation: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.cmd {
        Cmd::Run { config, out } => cmd_run(&config, out),
        Cmd::ValidateDiffusion { out } => cmd_validate_diffusion(out),
        Cmd::ValidateAdiabatic { resolution, out } => cmd_validate_adiabatic(resolution, out),
        Cmd::Metrics { snapshot, orientation, out } => cmd_metrics(&snapshot, orientation, out),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct RunSummary {
    steps: u64,
    time_s: f64,
    growth_time_s: f64,
    solid: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth_rate_mm_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth_rate_length_mm_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
    peak_delta_t_k: f64,
    max_peak_delta_t_k: f64,
    mean_peak_delta_t_k: f64,
    heat_added_j: f64,
    reynolds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    adiabatic: Option<AdiabaticSummary>,
}

#[derive(Serialize)]
struct AdiabaticSummary {
    c_mol_cm3: f64,
    r_cm: f64,
    t_k: f64,
    oracle_c_mol_cm3: f64,
    oracle_r_cm: f64,
    oracle_t_k: f64,
    rel_err_c: f64,
    rel_err_r: f64,
    rel_err_t: f64,
    equilibrium_gap_mol_cm3: f64,
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<()> {
    // Everything that can reject the config runs before the first write.
    let cfg = RunConfig::load(config)?;
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let mut sim = Simulation::new(cfg.clone())?;
    create_dir(&dir)?;
    write_text(&dir.join("config.toml"), &cfg.to_canonical())?;

    let s = cfg.scenario;
    let snap_every = if cfg.output.snapshot_every > 0.0 {
        Some(((cfg.output.snapshot_every / s.dt).round() as u64).max(1))
    } else {
        None
    };
    let mut csv = BufWriter::new(File::create(dir.join("metrics.csv"))?);
    writeln!(csv, "{}", Sample::CSV_HEADER)?;
    let mut profiles = BufWriter::new(File::create(dir.join("centerline.csv"))?);
    writeln!(profiles, "step,x_mm,T_K")?;
    let solid0 = sim.sample().solid;
    let mut samples: Vec<Sample> = Vec::new();
    log::info!("{} steps of {} s", (s.total_time / s.dt).round(), s.dt);
    sim.run(|sim, sample| {
        sample.write_csv(&mut csv)?;
        let probe = metrics::probes(&sim.t, sim.tags());
        for (i, v) in probe.centerline.iter().enumerate() {
            writeln!(profiles, "{},{:.6e},{:.9e}", sample.step, (i as f64 + 0.5) * s.dx, v)?;
        }
        if let Some(every) = snap_every {
            if sample.step % every == 0 {
                sim.save_snapshot(&dir.join(format!("snap_{:08}.bin", sample.step)))?;
            }
        }
        log::info!(
            "step {} t = {:.1} s, solid {:.4}, peak dT {:.4} K",
            sample.step,
            sample.time,
            sample.solid,
            sample.peak_t - s.t_wall
        );
        samples.push(sample.clone());
        Ok(())
    })?;
    csv.flush()?;
    profiles.flush()?;
    sim.save_snapshot(&dir.join("final.bin"))?;

    let last = samples.last().cloned().unwrap_or_else(|| sim.sample());
    let dts: Vec<f64> = samples.iter().skip(1).map(|x| x.peak_t - s.t_wall).collect();
    let adiabatic = (s.kind == ScenarioKind::Adiabatic && cfg.seed.shape == SeedShape::Sphere && s.dim == 3)
        .then(|| -> Result<AdiabaticSummary> {
            let s0 = oracle::reference_state();
            let h = campaigns::read_state(&sim, solid0, 0.1 * cfg.seed.radius);
            let o = oracle::integrate(&CellParams::default(), s0, 1.2e7, 1.0, 1e5)?.final_state;
            Ok(AdiabaticSummary {
                c_mol_cm3: h.c,
                r_cm: h.r,
                t_k: h.t,
                oracle_c_mol_cm3: o.c,
                oracle_r_cm: o.r,
                oracle_t_k: o.t,
                rel_err_c: (h.c - o.c) / o.c,
                rel_err_r: (h.r - o.r) / o.r,
                rel_err_t: (h.t - o.t) / o.t,
                equilibrium_gap_mol_cm3: (h.c - crystalsim_core::material::c_sat(h.t)).abs(),
            })
        })
        .transpose()?;
    let summary = RunSummary {
        steps: last.step,
        time_s: last.time,
        growth_time_s: last.growth_time,
        solid: last.solid,
        growth_rate_mm_h: last.growth.map(|g| g.0),
        growth_rate_length_mm_h: last.growth.map(|g| g.1),
        quality: last.quality,
        peak_delta_t_k: last.peak_t - s.t_wall,
        max_peak_delta_t_k: dts.iter().copied().fold(0.0, f64::max),
        mean_peak_delta_t_k: if dts.is_empty() { 0.0 } else { dts.iter().sum::<f64>() / dts.len() as f64 },
        heat_added_j: last.heat_added,
        reynolds: crystalsim_core::material::reynolds(s.u_in.abs(), 2.0 * cfg.seed.radius, cfg.material.viscosity)
            .unwrap_or(f64::NAN),
        adiabatic,
    };
    write_text(&dir.join("summary.toml"), &toml::to_string(&summary)?)?;
    println!("{}", toml::to_string(&summary)?);
    Ok(())
}

fn cmd_validate_diffusion(out: Option<PathBuf>) -> Result<()> {
    let opts = DiffusionOptions::default();
    let report = campaigns::validate_diffusion(&opts)?;
    let mut text = String::from("grid,dx_mm,steps,l2,reference,ratio\n");
    for ((c, r), ratio) in report.cases.iter().zip(DIFFUSION_REFERENCE).zip(report.ratios()) {
        text += &format!("{},{},{},{:.6e},{},{:.4}\n", c.cells, c.dx, c.steps, c.l2, r, ratio);
    }
    print!("{text}");
    println!("order (three finest grids): {:.3}", report.order);
    if let Some(dir) = out {
        create_dir(&dir)?;
        write_text(&dir.join("diffusion.csv"), &text)?;
        write_text(&dir.join("diffusion_order.txt"), &format!("{:.6}\n", report.order))?;
    }
    Ok(())
}

fn cmd_validate_adiabatic(resolution: usize, out: Option<PathBuf>) -> Result<()> {
    if resolution < 20 {
        bail!("--resolution must be at least 20 cells per edge");
    }
    let opts = AdiabaticOptions { cells: resolution, ..Default::default() };
    let report = campaigns::validate_adiabatic(&opts, |p| {
        log::info!("step {} c = {:.6e} R = {:.6} cm T = {:.5} K", p.step, p.state.c, p.state.r, p.state.t);
    })?;
    let [ec, er, et] = report.relative_errors();
    let (h, o) = (report.hybrid, report.oracle);
    let text = format!(
        "quantity,hybrid,oracle,rel_err\nc_mol_cm3,{:.6e},{:.6e},{ec:.4e}\nR_cm,{:.6},{:.6},{er:.4e}\nT_K,{:.5},{:.5},{et:.4e}\n",
        h.c, o.c, h.r, o.r, h.t, o.t
    );
    print!("{text}");
    println!(
        "converged: {}, hybrid |c - c_sat(T)| = {:.3e}, oracle {:.3e}",
        report.converged, report.hybrid_gap, report.oracle_gap
    );
    if let Some(dir) = out {
        create_dir(&dir)?;
        write_text(&dir.join("adiabatic.csv"), &text)?;
        let mut tr = String::from("step,c_mol_cm3,R_cm,T_K\n");
        for p in &report.trajectory {
            tr += &format!("{},{:.9e},{:.9e},{:.9e}\n", p.step, p.state.c, p.state.r, p.state.t);
        }
        write_text(&dir.join("adiabatic_trajectory.csv"), &tr)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SnapshotSummary {
    step: u64,
    time_s: f64,
    solid: f64,
    peak_t_k: f64,
    peak_cell: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    sides_mm: Option<[f64; 6]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    centroid_mm: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
}

fn cmd_metrics(path: &Path, orientation: f64, out: Option<PathBuf>) -> Result<()> {
    let snap = Snapshot::load(path).with_context(|| format!("reading {}", path.display()))?;
    let tags = snap.tag_map()?;
    let phi = snap.field("phi")?;
    let t = snap.field("T")?;
    let shape = if snap.dim == 2 { metrics::extract_sides(&phi, &tags, snap.dx, orientation).ok() } else { None };
    let probe = metrics::probes(&t, &tags);
    let summary = SnapshotSummary {
        step: snap.step,
        time_s: snap.time,
        solid: metrics::solid_measure(&phi, &tags, snap.dx),
        peak_t_k: probe.peak,
        peak_cell: probe.peak_cell,
        sides_mm: shape.map(|s| s.sides),
        centroid_mm: shape.map(|s| s.centroid),
        quality: shape.as_ref().and_then(|s| metrics::quality(s).ok()),
    };
    let text = toml::to_string(&summary)?;
    print!("{text}");
    if let Some(dir) = out {
        create_dir(&dir)?;
        write_text(&dir.join("metrics.toml"), &text)?;
        let mut prof = String::from("x_mm,T_K\n");
        for (i, v) in probe.centerline.iter().enumerate() {
            prof += &format!("{:.6e},{:.9e}\n", (i as f64 + 0.5) * snap.dx, v);
        }
        write_text(&dir.join("centerline.csv"), &prof)?;
    }
    Ok(())
}
