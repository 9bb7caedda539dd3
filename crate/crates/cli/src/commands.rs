use std::io::Write;
use std::path::Path;
use std::time::Instant;

use ktcs_core::completeness::{carleman_test, resolution_of_unity, weight_tilde};
use ktcs_core::fock::{auto_n_max, ChainClass, KtcsParams};
use ktcs_core::iontrap::{evolve_density, mcwf_run, verify_laser_identity, RunConfig, SimConfig};
use ktcs_core::output::{density_time_series, mcwf_time_series, phonon_snapshot, FigureTable, RunManifest};
use ktcs_core::phase_space::{count_peaks, q_slice, resolution_too_coarse, GridSpec, DEFAULT_PEAK_FLOOR};
use ktcs_core::statistics::{csi_grid, distribution_table, mandel_grid, z_grid};
use ktcs_core::Complex64;
use serde_json::json;

use crate::{CliError, CliResult, StateArgs, ZArgs};

/// Residual above which the laser identity counts as failed.
const IDENTITY_LIMIT: f64 = 1e-9;

pub fn params(state: &StateArgs, z: Option<f64>) -> CliResult<KtcsParams<f64>> {
    let xi = match (state.xi_re, z) {
        (Some(_), Some(_)) => return Err(CliError::Invalid("give either --xi-re or --z, not both".into())),
        (Some(re), None) => Complex64::new(re, state.xi_im),
        (None, Some(z)) if z >= 0.0 => Complex64::new(z.sqrt(), 0.0),
        (None, Some(z)) => return Err(CliError::Invalid(format!("--z must be nonnegative, got {z}"))),
        (None, None) => return Err(CliError::Invalid("one of --xi-re or --z is required".into())),
    };
    Ok(KtcsParams::from_signed(xi, state.p, state.q, state.k, state.j)?)
}

pub fn class(state: &StateArgs) -> CliResult<ChainClass> {
    Ok(KtcsParams::from_signed(Complex64::new(1.0, 0.0), state.p, state.q, state.k, state.j)?.chain())
}

fn echo_state(state: &StateArgs) -> serde_json::Value {
    json!({ "K": state.k, "j": state.j, "p": state.p, "q": state.q, "xi": [state.xi_re, state.xi_im] })
}

fn zs(z: &ZArgs) -> CliResult<Vec<f64>> {
    match z.z {
        Some(v) if v > 0.0 && v.is_finite() => Ok(vec![v]),
        Some(v) => Err(CliError::Invalid(format!("--z must be positive, got {v}"))),
        None => Ok(z_grid(z.z_min, z.z_max, z.steps)?),
    }
}

/// Writes to stdout; a reader that went away (`| head`) is not an error.
pub fn say(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// One table to stdout, or to `out/name` with a manifest.
fn emit(command: &str, parameters: serde_json::Value, table: &FigureTable, out: Option<&Path>, name: &str, t0: Instant) -> CliResult<()> {
    match out {
        None => say(&table.to_csv_string())?,
        Some(dir) => {
            let mut m = RunManifest::new(command, parameters, None);
            m.write_table(dir, name, table)?;
            m.wall_time_s = t0.elapsed().as_secs_f64();
            m.save(dir)?;
        }
    }
    Ok(())
}

pub fn numdist(state: &StateArgs, z: Option<f64>, n_max: Option<usize>, out: Option<&Path>) -> CliResult<()> {
    let t0 = Instant::now();
    let p = params(state, z)?;
    let n_max = match n_max {
        Some(n) => n,
        None => auto_n_max(&p)?,
    };
    let mut table = FigureTable::new("numdist", &["n", "P_n"]);
    for (n, v) in distribution_table(&p, n_max)?.into_iter().enumerate() {
        table.push(vec![n as f64, v]);
    }
    let mut echo = echo_state(state);
    echo["z"] = json!(p.z());
    echo["n_max"] = json!(n_max);
    emit("numdist", echo, &table, out, "numdist.csv", t0)
}

pub fn mandel(state: &StateArgs, z: &ZArgs, out: Option<&Path>) -> CliResult<()> {
    let t0 = Instant::now();
    let c = class(state)?;
    let rows = mandel_grid(&c, &zs(z)?)?;
    let mut table = FigureTable::new("mandel", &["z", "Ma", "Mb", "Mc"]);
    for r in rows {
        table.push(vec![r.z, r.ma, r.mb, r.mc]);
    }
    let mut echo = echo_state(state);
    echo["z"] = json!({ "z": z.z, "z_min": z.z_min, "z_max": z.z_max, "steps": z.steps });
    emit("mandel", echo, &table, out, "mandel.csv", t0)
}

pub fn csi(state: &StateArgs, z: &ZArgs, out: Option<&Path>) -> CliResult<()> {
    let t0 = Instant::now();
    let c = class(state)?;
    let rows = csi_grid(&c, &zs(z)?)?;
    let worst = rows.iter().map(|r| r.max_discrepancy()).fold(0.0, f64::max);
    if worst > 1e-6 {
        eprintln!("warning: explicit J formulas differ from the moment path by {worst:.2e}");
    }
    let mut table = FigureTable::new("csi", &["z", "G_ab", "G_ac", "G_bc"]);
    for r in rows {
        table.push(vec![r.z, r.g[0], r.g[1], r.g[2]]);
    }
    let mut echo = echo_state(state);
    echo["z"] = json!({ "z": z.z, "z_min": z.z_min, "z_max": z.z_max, "steps": z.steps });
    emit("csi", echo, &table, out, "csi.csv", t0)
}

/// Writes `<stem>.csv` and `<stem>.json` into the manifest; returns the
/// peak count.
pub fn write_q_grid(m: &mut RunManifest, dir: &Path, stem: &str, p: &KtcsParams<f64>, spec: &GridSpec<f64>) -> CliResult<usize> {
    let grid = q_slice(p, spec)?;
    if resolution_too_coarse(&grid) {
        eprintln!("warning: {stem}: grid below the resolution needed for peak counting");
    }
    let peaks = count_peaks(&grid, DEFAULT_PEAK_FLOOR);
    let mut csv = Vec::new();
    grid.write_csv(&mut csv)?;
    m.write_file(dir, &format!("{stem}.csv"), &csv)?;
    let mut meta = grid.metadata();
    meta["peaks"] = json!(peaks);
    meta["peak_floor"] = json!(DEFAULT_PEAK_FLOOR);
    meta["state"] = json!({ "xi": [p.xi().re, p.xi().im], "p": p.p, "q": p.q, "K": p.k, "j": p.j });
    let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Numerical(e.to_string()))? + "\n";
    m.write_file(dir, &format!("{stem}.json"), text.as_bytes())?;
    Ok(peaks)
}

pub fn qfunc(state: &StateArgs, n: usize, radius: Option<f64>, out: &Path) -> CliResult<()> {
    let t0 = Instant::now();
    let p = params(state, None)?;
    let spec = match radius {
        Some(r) => GridSpec::square(r, n),
        None => GridSpec { nx: n, ny: n, ..GridSpec::default_for(&p) },
    };
    let mut echo = echo_state(state);
    echo["grid"] = json!(spec);
    let mut m = RunManifest::new("qfunc", echo, None);
    let peaks = write_q_grid(&mut m, out, "q", &p, &spec)?;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.save(out)?;
    say(&format!("peaks above {DEFAULT_PEAK_FLOOR} of the maximum: {peaks}\n"))
}

pub fn weight(state: &StateArgs, z: &ZArgs, out: Option<&Path>) -> CliResult<()> {
    let t0 = Instant::now();
    let c = class(state)?;
    let mut table = FigureTable::new("weight", &["x", "W_tilde", "W"]);
    for x in zs(z)? {
        table.push(vec![x, weight_tilde(x, c.p, c.q)?, ktcs_core::completeness::weight(&c, x)?]);
    }
    let mut echo = echo_state(state);
    echo["x"] = json!({ "x": z.z, "x_min": z.z_min, "x_max": z.z_max, "steps": z.steps });
    emit("weight", echo, &table, out, "weight.csv", t0)
}

fn print_json<S: serde::Serialize>(v: &S) -> CliResult<()> {
    say(&(serde_json::to_string_pretty(v).map_err(|e| CliError::Numerical(e.to_string()))? + "\n"))
}

pub fn unity(state: &StateArgs, n_max: usize, radial: usize, angular: usize) -> CliResult<()> {
    let c = class(state)?;
    print_json(&resolution_of_unity(c.k, c.p, c.q, n_max, radial, angular)?)
}

pub fn carleman(state: &StateArgs, n_probe: u64) -> CliResult<()> {
    let c = class(state)?;
    print_json(&carleman_test(c.k, c.j, c.p, c.q, n_probe)?)
}

pub fn identity(n_max: usize, trials: usize, seed: u64) -> CliResult<()> {
    let rel: f64 = verify_laser_identity(n_max, trials, seed)?;
    print_json(&json!({ "n_max": n_max, "trials": trials, "seed": seed, "relative_residual": rel }))?;
    if !(rel < IDENTITY_LIMIT) {
        return Err(CliError::Numerical(format!("laser identity residual {rel:e} exceeds {IDENTITY_LIMIT:e}")));
    }
    Ok(())
}

pub fn read_run_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// `(1−w) P_n(j=0) + w P_n(j=1)`: parity sectors keep their initial weights,
/// so this is the distribution the run should settle to.
pub fn target_mixture(sim: &SimConfig<f64>, len: usize) -> CliResult<Vec<f64>> {
    let even = distribution_table(&sim.target_params(0)?, len - 1)?;
    let odd = distribution_table(&sim.target_params(1)?, len - 1)?;
    Ok(even.iter().zip(&odd).map(|(e, o)| (1.0 - sim.w) * e + sim.w * o).collect())
}

/// Record index of each requested snapshot time.
pub fn snapshot_indices(sim: &SimConfig<f64>, times: &[f64]) -> CliResult<Vec<usize>> {
    let interval = sim.record_interval();
    times
        .iter()
        .map(|&t| {
            let k = (t / interval).round();
            if !(t >= 0.0) || t > sim.t_max * (1.0 + 1e-12) || (k * interval - t).abs() > 1e-9 * sim.t_max {
                Err(CliError::Invalid(format!(
                    "snapshot time {t} is not a recording time (multiples of {interval} up to {})",
                    sim.t_max
                )))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Runs trajectories (and the oracle when asked) and writes the time series
/// and snapshots under `prefix`.
pub fn mcwf_outputs(
    m: &mut RunManifest,
    dir: &Path,
    prefix: &str,
    rc: &RunConfig,
    oracle: bool,
) -> CliResult<serde_json::Value> {
    let sim = rc.to_sim()?;
    let indices = snapshot_indices(&sim, &rc.snapshots)?;
    let run = mcwf_run(&sim)?;
    m.write_table(dir, &format!("{prefix}timeseries.csv"), &mcwf_time_series(&run))?;
    for (&t, &k) in rc.snapshots.iter().zip(&indices) {
        let s = &run.snapshots[k];
        let target = target_mixture(&sim, s.pi.len())?;
        m.write_table(dir, &format!("{prefix}snapshot_t{t}.csv"), &phonon_snapshot(&s.pi, &s.pi_err, &target))?;
    }
    if oracle {
        let d = evolve_density(&sim)?;
        m.write_table(dir, &format!("{prefix}density.csv"), &density_time_series(&d))?;
    }
    Ok(json!({ "m_max": sim.m_max, "dt_gamma": sim.dt, "h_gamma": run.h, "mean_jumps": run.mean_jumps }))
}

pub fn mcwf(config: &Path, oracle: bool, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let t0 = Instant::now();
    let mut rc = read_run_config(config)?;
    if let Some(s) = seed {
        rc.seed = s;
    }
    let mut m = RunManifest::new("mcwf", json!({ "config": rc, "oracle": oracle }), Some(rc.seed));
    let derived = mcwf_outputs(&mut m, out, "", &rc, oracle)?;
    m.parameters["derived"] = derived;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.save(out)?;
    Ok(())
}
