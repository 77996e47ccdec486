//! Scenario execution and the figure presets.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tfqss_core::{
    compare_protocols, distance_grid, empirical_vs_analytic, evaluate, optimize_rate,
    sweep_distance, write_csv, CsvRow, SecurityParams, Sweep, TestBits, DEFAULT_SIGMA_THRESHOLD,
};

use crate::config::{Layer, Mode, Origin, ScenarioConfig};

pub const PRESETS: [&str; 3] = ["fig3", "fig4", "fig5"];

/// Settings of one preset run, to be layered over a base scenario. `label`
/// doubles as the output file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    pub label: String,
    pub layer: Layer,
}

fn preset_run(label: String, mode: Mode, delta_km: f64, n_pulses: f64) -> PresetRun {
    let mut layer = Layer::new(Origin::Preset);
    layer
        .set("mode", mode.as_str())
        .set("delta_km", delta_km)
        .set("l_min", delta_km)
        .set("l_max", 400.0)
        .set("l_step", 2.0)
        .set("n_pulses", n_pulses);
    PresetRun { label, layer }
}

/// The runs behind each distance-sweep figure:
///
/// * `fig3`: no length offset, block sizes 1e8, 1e10 and 1e12.
/// * `fig4`: offsets 10, 50 and 100 km at 1e12.
/// * `fig5`: offsets 10 and 14 km at 1e12, each compared with the
///   equal-intensity baseline.
pub fn preset(name: &str) -> Result<Vec<PresetRun>> {
    Ok(match name {
        "fig3" => [(1e8, "1e8"), (1e10, "1e10"), (1e12, "1e12")]
            .into_iter()
            .map(|(n, tag)| preset_run(format!("fig3_n{tag}"), Mode::Sweep, 0.0, n))
            .collect(),
        "fig4" => [10.0, 50.0, 100.0]
            .into_iter()
            .map(|d| preset_run(format!("fig4_delta{d}"), Mode::Sweep, d, 1e12))
            .collect(),
        "fig5" => [10.0, 14.0]
            .into_iter()
            .map(|d| preset_run(format!("fig5_delta{d}"), Mode::Compare, d, 1e12))
            .collect(),
        other => bail!(
            "unknown preset `{other}`; valid presets: {}",
            PRESETS.join(", ")
        ),
    })
}

/// Output paths of a compare run: `<stem>_asymmetric.<ext>` and `<stem>_baseline.<ext>`.
pub fn compare_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map_or("compare".into(), |s| s.to_string_lossy().into_owned());
    let ext = out
        .extension()
        .map_or("csv".into(), |e| e.to_string_lossy().into_owned());
    let with = |suffix: &str| out.with_file_name(format!("{stem}_{suffix}.{ext}"));
    (with("asymmetric"), with("baseline"))
}

/// What a finished scenario produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Grid points that were skipped, with the reason.
    pub warnings: Vec<String>,
}

fn write_rows(path: &Path, rows: &[CsvRow]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(BufWriter::new(file), rows).with_context(|| format!("writing {}", path.display()))
}

fn sweep_rows(mode: &str, sweep: &Sweep, sp: &SecurityParams) -> Vec<CsvRow> {
    sweep
        .rows
        .iter()
        .map(|r| CsvRow::from_sweep(mode, r, sp))
        .collect()
}

fn skipped(sweep: &Sweep) -> Vec<String> {
    sweep
        .skipped
        .iter()
        .map(|(l, why)| format!("skipped L = {l} km: {why}"))
        .collect()
}

fn curve_summary(sweep: &Sweep) -> String {
    let best = sweep
        .rows
        .iter()
        .max_by(|a, b| a.result.best_rate.total_cmp(&b.result.best_rate));
    let reach = sweep
        .rows
        .iter()
        .filter(|r| r.result.best_rate > 0.0)
        .map(|r| r.total_km)
        .fold(None, |acc: Option<f64>, l| {
            Some(acc.map_or(l, |a| a.max(l)))
        });
    match (best, reach) {
        (Some(b), Some(reach)) => format!(
            "{} points, peak rate {:e} at L = {} km, positive up to L = {reach} km",
            sweep.rows.len(),
            b.result.best_rate,
            b.total_km
        ),
        _ => format!("{} points, no positive rate", sweep.rows.len()),
    }
}

/// Runs `cfg` and writes its CSV output.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Outcome> {
    cfg.validate()?;
    let sp = cfg.security();
    let out = cfg.out.clone();
    let mut warnings = Vec::new();
    let summary = match cfg.mode {
        Mode::Rate => {
            let (ch, src) = (cfg.channel()?, cfg.source()?);
            let rb = evaluate(&ch, &src, &sp).context("evaluating key rate")?;
            write_rows(
                &out,
                &[CsvRow::from_breakdown("rate", &ch, &src, &sp, Some(&rb))],
            )?;
            format!(
                "rate: l_a = {} km, l_b = {} km, mu = ({}, {}): R = {:e} [{}]",
                ch.l_a,
                ch.l_b,
                src.mu_a,
                src.mu_b,
                rb.rate,
                rb.flag.as_str()
            )
        }
        Mode::Optimize => {
            let ch = cfg.channel()?;
            let r = optimize_rate(&ch, &sp, &cfg.optimizer()).context("optimizing intensities")?;
            let best_sp = SecurityParams {
                test_bits: r
                    .best_test_fraction
                    .map_or(sp.test_bits, TestBits::Fraction),
                ..sp
            };
            let src = tfqss_core::SourceParams {
                mu_a: r.best_mu_a,
                mu_b: r.best_mu_b,
            };
            write_rows(
                &out,
                &[CsvRow::from_breakdown(
                    "optimize",
                    &ch,
                    &src,
                    &best_sp,
                    r.breakdown.as_ref(),
                )],
            )?;
            if r.converged {
                format!(
                    "optimize: best R = {:e} at mu_a = {}, mu_b = {} ({} evaluations)",
                    r.best_rate, r.best_mu_a, r.best_mu_b, r.evaluations
                )
            } else {
                format!(
                    "optimize: no positive rate found ({} evaluations)",
                    r.evaluations
                )
            }
        }
        Mode::Sweep => {
            let grid = distance_grid(cfg.l_min, cfg.l_max, cfg.l_step)?;
            let sweep = sweep_distance(
                &cfg.channel_template(),
                cfg.delta_km,
                &grid,
                &sp,
                &cfg.optimizer(),
            )?;
            warnings.extend(skipped(&sweep));
            write_rows(&out, &sweep_rows("sweep", &sweep, &sp))?;
            format!(
                "sweep: delta = {} km, N = {:e}: {}",
                cfg.delta_km,
                cfg.n_pulses,
                curve_summary(&sweep)
            )
        }
        Mode::Compare => {
            let grid = distance_grid(cfg.l_min, cfg.l_max, cfg.l_step)?;
            let cmp = compare_protocols(
                &cfg.channel_template(),
                cfg.delta_km,
                &grid,
                &sp,
                &cfg.optimizer(),
            )?;
            warnings.extend(skipped(&cmp.asymmetric));
            let (asym_path, base_path) = compare_paths(&out);
            write_rows(
                &asym_path,
                &sweep_rows("compare_asymmetric", &cmp.asymmetric, &sp),
            )?;
            write_rows(
                &base_path,
                &sweep_rows("compare_baseline", &cmp.baseline, &sp),
            )?;
            let ratio = cmp
                .max_ratio
                .map_or("no L with both rates positive".into(), |(l, r)| {
                    format!("max ratio {r} at L = {l} km")
                });
            return Ok(Outcome {
                summary: format!(
                    "compare: delta = {} km, N = {:e}: {ratio}; asymmetric {}; baseline {}",
                    cfg.delta_km,
                    cfg.n_pulses,
                    curve_summary(&cmp.asymmetric),
                    curve_summary(&cmp.baseline)
                ),
                files: vec![asym_path, base_path],
                warnings,
            });
        }
        Mode::Simulate => {
            let sim_cfg = cfg.simulation()?;
            let rep = empirical_vs_analytic(&sim_cfg, DEFAULT_SIGMA_THRESHOLD)
                .context("running simulation")?;
            // The simulated slots are the pulses of this block.
            let sim_sp = SecurityParams {
                n_pulses: cfg.n_slots as f64,
                ..sp
            };
            write_rows(
                &out,
                &[CsvRow::from_simulation(&sim_cfg, &sim_sp, &rep.sim)],
            )?;
            let verdict = match (rep.pass, rep.wide_interval) {
                (_, true) => "inconclusive: confidence interval too wide for this many slots",
                (true, false) => "consistent with the closed form",
                (false, false) => "INCONSISTENT with the closed form",
            };
            format!(
                "simulate: {} slots, Q = {:e} (z = {:.2}), E = {:e} (z = {:.2}): {verdict} at {} sigma",
                cfg.n_slots, rep.sim.q_emp, rep.z_q, rep.sim.e_emp, rep.z_e, rep.threshold
            )
        }
    };
    Ok(Outcome {
        summary,
        files: vec![out],
        warnings,
    })
}
