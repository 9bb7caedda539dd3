//! Bundled recipes for the twelve figures.

use std::path::Path;
use std::time::Instant;

use ktcs_core::fock::KtcsParams;
use ktcs_core::iontrap::{evolve_density, RunConfig};
use ktcs_core::output::{FigureTable, RunManifest};
use ktcs_core::phase_space::GridSpec;
use ktcs_core::statistics::{csi_grid, distribution_table, mandel_grid, z_grid};
use ktcs_core::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{mcwf_outputs, say, write_q_grid};
use crate::{CliError, CliResult};

const RECIPES: &str = include_str!("../figures.json");

#[derive(Debug, Deserialize)]
struct Recipes {
    figures: Vec<Figure>,
}

#[derive(Debug, Deserialize)]
struct Figure {
    id: u32,
    caption: String,
    #[serde(flatten)]
    kind: Kind,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Kind {
    Numdist { n_max: usize, series: Vec<Series> },
    Mandel { z_range: [f64; 2], steps: usize, panels: Vec<Panel> },
    Csi { z_range: [f64; 2], steps: usize, panels: Vec<Panel> },
    Qfunc { series: Vec<Series> },
    Mcwf { snapshots: Vec<f64>, series: Vec<RunSeries> },
    Fidelity { panels: Vec<FidelityPanel> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Series {
    label: String,
    #[serde(rename = "K")]
    k: usize,
    j: usize,
    p: usize,
    q: usize,
    #[serde(default)]
    xi: [f64; 2],
}

impl Series {
    fn params(&self) -> CliResult<KtcsParams<f64>> {
        Ok(KtcsParams::new(Complex64::new(self.xi[0], self.xi[1]), self.p, self.q, self.k, self.j)?)
    }
}

#[derive(Debug, Deserialize)]
struct Panel {
    name: String,
    quantity: String,
    series: Vec<Series>,
}

#[derive(Debug, Deserialize)]
struct RunSeries {
    label: String,
    config: RunConfig,
}

#[derive(Debug, Deserialize)]
struct FidelityPanel {
    name: String,
    fidelity_index: usize,
    series: Vec<RunSeries>,
}

fn recipe(id: u32) -> CliResult<Figure> {
    let all: Recipes = serde_json::from_str(RECIPES).expect("bundled figure recipes are valid JSON");
    all.figures
        .into_iter()
        .find(|f| f.id == id)
        .ok_or_else(|| CliError::Invalid(format!("no figure {id}; figures are numbered 1 to 12")))
}

fn file_name(id: u32, panel: &str) -> String {
    format!("fig{id:02}{panel}.csv")
}

fn columns<'a>(first: &'a str, series: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    std::iter::once(first).chain(series).collect()
}

pub fn run_figure(id: u32, out: &Path, n_traj: Option<usize>, seed: Option<u64>) -> CliResult<()> {
    let t0 = Instant::now();
    let fig = recipe(id)?;
    let mut params = json!({ "id": id, "caption": fig.caption });
    if let Some(n) = n_traj {
        params["n_traj_override"] = json!(n);
    }
    let mut m = RunManifest::new("figure", params, seed);

    match &fig.kind {
        Kind::Numdist { n_max, series } => {
            let cols = series.iter().map(|s| s.params().and_then(|p| Ok(distribution_table(&p, *n_max)?))).collect::<CliResult<Vec<_>>>()?;
            let mut table = FigureTable::new(format!("fig{id}"), &columns("n", series.iter().map(|s| s.label.as_str())));
            for n in 0..=*n_max {
                table.push(std::iter::once(n as f64).chain(cols.iter().map(|c| c[n])).collect());
            }
            m.write_table(out, &file_name(id, ""), &table)?;
        }
        Kind::Mandel { z_range, steps, panels } | Kind::Csi { z_range, steps, panels } => {
            let csi = matches!(fig.kind, Kind::Csi { .. });
            let zs = z_grid(z_range[0], z_range[1], *steps)?;
            for panel in panels {
                let cols = panel
                    .series
                    .par_iter()
                    .map(|s| column(s, &panel.quantity, &zs, csi))
                    .collect::<CliResult<Vec<_>>>()?;
                let mut table = FigureTable::new(format!("fig{id}{}", panel.name), &columns("z", panel.series.iter().map(|s| s.label.as_str())));
                for (i, z) in zs.iter().enumerate() {
                    table.push(std::iter::once(*z).chain(cols.iter().map(|c| c[i])).collect());
                }
                m.write_table(out, &file_name(id, &panel.name), &table)?;
            }
        }
        Kind::Qfunc { series } => {
            for s in series {
                let p = s.params()?;
                let stem = format!("fig{id:02}_{}", s.label);
                let peaks = write_q_grid(&mut m, out, &stem, &p, &GridSpec::default_for(&p))?;
                say(&format!("{stem}: {peaks} peaks\n"))?;
            }
        }
        Kind::Mcwf { snapshots, series } => {
            let mut derived = serde_json::Map::new();
            for s in series {
                let mut rc = s.config.clone();
                rc.snapshots = snapshots.clone();
                if let Some(n) = n_traj {
                    rc.n_traj = n;
                }
                if let Some(v) = seed {
                    rc.seed = v;
                }
                let prefix = format!("fig{id:02}{}_", s.label);
                let info = mcwf_outputs(&mut m, out, &prefix, &rc, false)?;
                derived.insert(s.label.clone(), json!({ "config": rc, "derived": info }));
            }
            m.parameters["series"] = serde_json::Value::Object(derived);
        }
        Kind::Fidelity { panels } => {
            // deterministic density-matrix evolution; the trajectory count does not apply
            for panel in panels {
                let runs = panel
                    .series
                    .par_iter()
                    .map(|s| Ok(evolve_density(&s.config.to_sim()?)?))
                    .collect::<CliResult<Vec<_>>>()?;
                let mut table = FigureTable::new(format!("fig{id}{}", panel.name), &columns("gamma_t", panel.series.iter().map(|s| s.label.as_str())));
                let rows = runs.iter().map(|r| r.snapshots.len()).min().unwrap_or(0);
                for i in 0..rows {
                    let t = runs[0].snapshots[i].t;
                    table.push(std::iter::once(t).chain(runs.iter().map(|r| r.snapshots[i].fidelity[panel.fidelity_index])).collect());
                }
                m.write_table(out, &file_name(id, &panel.name), &table)?;
            }
            let configs: Vec<_> = panels.iter().flat_map(|p| p.series.iter().map(|s| json!({ "panel": p.name, "label": s.label, "config": s.config }))).collect();
            m.parameters["series"] = json!(configs);
        }
    }
    m.wall_time_s = t0.elapsed().as_secs_f64();
    m.save(out)?;
    Ok(())
}

fn column(s: &Series, quantity: &str, zs: &[f64], csi: bool) -> CliResult<Vec<f64>> {
    let class = KtcsParams::new(Complex64::new(1.0, 0.0), s.p, s.q, s.k, s.j)?.chain();
    if csi {
        let idx = match quantity {
            "G_ab" => 0,
            "G_ac" => 1,
            "G_bc" => 2,
            other => return Err(CliError::Invalid(format!("unknown CSI quantity {other}"))),
        };
        Ok(csi_grid(&class, zs)?.iter().map(|r| r.g[idx]).collect())
    } else {
        let rows = mandel_grid(&class, zs)?;
        Ok(match quantity {
            "Ma" => rows.iter().map(|r| r.ma).collect(),
            "Mb" => rows.iter().map(|r| r.mb).collect(),
            "Mc" => rows.iter().map(|r| r.mc).collect(),
            other => return Err(CliError::Invalid(format!("unknown Mandel quantity {other}"))),
        })
    }
}
