//! Runs one validated [`RunConfig`] and writes its data files plus a
//! `manifest.json` describing every truncation and tolerance in effect.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::basis::{partner_potential, superpotential, BoxGeometry, Evaluate, HierarchyBasis, HierarchyLevel};
use crate::cache::OverlapCache;
use crate::config::{Experiment, QuenchConfig, RunConfig};
use crate::dynamics::{
    survival_sweep, EvolutionSnapshot, Evolution, InitialState, TimeGrid, FINITE_T_TOLERANCE, ZERO_T_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::output::{sci, temperature_tag, write_json, write_wpd_json, CsvWriter};
use crate::overlap::{build_overlap, OverlapMatrix, OverlapSource, Spectrum, Truncation};
use crate::talbot::{expansion_overlap, talbot_overlap_matrix, ExpansionSpec};
use crate::thermal::{ThermalState, OCCUPATION_CUTOFF};
use crate::work::{
    average_work_quanta, enumerate_final_states, ground_state_shift_quanta, irreversible_work_quanta,
    overlap_for_work, wpd_finite_t, work_scan, ThermalWpdOptions, WorkSpectrum, WpdOptions,
};

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: PathBuf,
    /// Data files, in the order they were written.
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
}

/// Executes `config`, writing into `config.output.dir`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    fs::create_dir_all(&config.output.dir)?;
    let mut ctx = Context {
        config,
        cache: config.output.cache.then(|| OverlapCache::new(config.output.dir.join("cache"))),
        overlaps: Vec::new(),
        thermal: Vec::new(),
        files: Vec::new(),
    };
    let results = match config.experiment {
        Experiment::Survival => ctx.survival()?,
        Experiment::Phases => ctx.phases()?,
        Experiment::Wpd => ctx.wpd()?,
        Experiment::WorkScan => ctx.work_scan()?,
        Experiment::BasisDump => ctx.basis_dump()?,
    };
    let wall_time = start.elapsed().as_secs_f64();
    let file_names: Vec<String> = ctx
        .files
        .iter()
        .map(|p| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "program": "susyq",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment.name(),
        "config": config,
        "tolerances": {
            "revival_zero_temperature": ZERO_T_TOLERANCE,
            "revival_finite_temperature": FINITE_T_TOLERANCE,
            "occupation_cutoff": OCCUPATION_CUTOFF,
            "wpd_probability_threshold": config.wpd.threshold,
            "wpd_moment_tolerance": config.wpd.moment.tolerance,
        },
        "overlaps": ctx.overlaps,
        "thermal": ctx.thermal,
        "results": results,
        "files": file_names,
        "wall_time_seconds": wall_time,
    });
    let manifest = write_json(config.output.dir.join("manifest.json"), &manifest)?;
    Ok(RunSummary { manifest, files: ctx.files, wall_time })
}

/// The quench of a configuration with its bases resolved.
#[derive(Debug, Clone, Copy)]
enum Quench {
    Hierarchy { basis: HierarchyBasis, from: u32, to: u32 },
    Expansion { length_initial: f64, length_final: f64 },
}

impl Quench {
    fn new(q: &QuenchConfig) -> Result<Self> {
        Ok(match *q {
            QuenchConfig::Hierarchy { length, from_level, to_level, .. } => Quench::Hierarchy {
                basis: HierarchyBasis::new(BoxGeometry::new(length)?, from_level.max(to_level))?,
                from: from_level,
                to: to_level,
            },
            QuenchConfig::Expansion { length_initial, length_final, .. } => {
                Quench::Expansion { length_initial, length_final }
            }
        })
    }

    fn source(&self) -> OverlapSource {
        match *self {
            Quench::Hierarchy { basis, from, to } => {
                OverlapSource::Hierarchy { length: basis.geometry().length(), from_level: from, to_level: to }
            }
            Quench::Expansion { length_initial, length_final } => {
                OverlapSource::Expansion { length_initial, length_final }
            }
        }
    }

    fn initial_spectrum(&self) -> Result<Spectrum> {
        Ok(match *self {
            Quench::Hierarchy { basis, from, .. } => Spectrum::hierarchy(basis.geometry(), basis.level(from)?),
            Quench::Expansion { length_initial, .. } => {
                Spectrum { scale: BoxGeometry::new(length_initial)?.ground_energy(), shift: 0 }
            }
        })
    }

    fn expansion(&self, particles: usize, rows: usize, truncation: Truncation) -> Option<ExpansionSpec> {
        match *self {
            Quench::Expansion { length_initial, length_final } => {
                Some(ExpansionSpec { length_initial, length_final, particles, rows, truncation })
            }
            Quench::Hierarchy { .. } => None,
        }
    }

    fn build(&self, particles: usize, rows: usize, truncation: Truncation) -> Result<OverlapMatrix> {
        match self {
            Quench::Hierarchy { basis, from, to } => build_overlap(basis, *from, *to, rows, truncation),
            Quench::Expansion { .. } => talbot_overlap_matrix(&self.expansion(particles, rows, truncation).unwrap()),
        }
    }

    fn build_fixed(&self, particles: usize, rows: usize, cols: usize) -> Result<OverlapMatrix> {
        match self {
            Quench::Expansion { .. } => {
                let spec = self.expansion(particles, rows, Truncation::Fixed { columns: cols }).unwrap();
                spec.validate()?;
                Ok(expansion_overlap(&spec, cols))
            }
            Quench::Hierarchy { .. } => self.build(particles, rows, Truncation::Fixed { columns: cols }),
        }
    }
}

#[derive(Serialize)]
struct ThermalInfo {
    t_over_tf: f64,
    fermi_temperature: f64,
    beta: f64,
    mu: f64,
    levels: usize,
}

struct Context<'a> {
    config: &'a RunConfig,
    cache: Option<OverlapCache>,
    overlaps: Vec<Value>,
    thermal: Vec<ThermalInfo>,
    files: Vec<PathBuf>,
}

impl Context<'_> {
    fn quench(&self) -> Result<(Quench, usize)> {
        let q = self.config.quench.as_ref().ok_or_else(|| Error::Config("missing [quench]".into()))?;
        Ok((Quench::new(q)?, q.particles()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output.dir.join(name)
    }

    fn initial_state(&mut self, quench: &Quench, particles: usize, t_over_tf: f64) -> Result<InitialState> {
        if t_over_tf == 0.0 {
            return Ok(InitialState::FermiSea { particles });
        }
        let spectrum = quench.initial_spectrum()?;
        let th = ThermalState::at_temperature(&spectrum, particles, t_over_tf)?;
        self.note_thermal(&spectrum, &th);
        Ok(InitialState::Thermal(th))
    }

    fn note_thermal(&mut self, spectrum: &Spectrum, th: &ThermalState) {
        self.thermal.push(ThermalInfo {
            t_over_tf: th.t_over_tf,
            fermi_temperature: ThermalState::fermi_temperature(spectrum, th.particles),
            beta: th.beta,
            mu: th.mu,
            levels: th.levels(),
        });
    }

    fn cached<K: Serialize>(
        &mut self,
        purpose: &str,
        key: &K,
        source: OverlapSource,
        build: impl FnOnce() -> Result<OverlapMatrix>,
    ) -> Result<OverlapMatrix> {
        let start = Instant::now();
        let (u, hit) = match &self.cache {
            Some(cache) => cache.get_or_build(key, source, build)?,
            None => (build()?, false),
        };
        self.overlaps.push(json!({
            "purpose": purpose,
            "source": u.source,
            "rows": u.rows(),
            "columns": u.cols(),
            "max_completeness_defect": u.max_defect(),
            "quadrature_order": u.rule_order,
            "cache_hit": hit,
            "seconds": start.elapsed().as_secs_f64(),
        }));
        Ok(u)
    }

    /// Overlaps for time evolution under the configured truncation.
    fn dynamics_overlap(&mut self, quench: &Quench, particles: usize, rows: usize) -> Result<OverlapMatrix> {
        let truncation = self.config.truncation;
        let key = ("dynamics", quench.source(), rows, truncation);
        self.cached("dynamics", &key, quench.source(), || quench.build(particles, rows, truncation))
    }

    fn evolution_for(&mut self, states: &[(f64, InitialState)]) -> Result<Evolution> {
        let (quench, particles) = self.quench()?;
        let configured = self.config.quench.as_ref().and_then(|q| q.rows()).unwrap_or(0);
        let rows = states.iter().map(|(_, s)| s.required_rows()).max().unwrap_or(particles).max(configured);
        Ok(Evolution::new(self.dynamics_overlap(&quench, particles, rows)?))
    }

    fn states(&mut self) -> Result<Vec<(f64, InitialState)>> {
        let (quench, particles) = self.quench()?;
        let temps = self.config.temperatures.clone();
        temps.into_iter().map(|t| Ok((t, self.initial_state(&quench, particles, t)?))).collect()
    }

    fn survival(&mut self) -> Result<Value> {
        let states = self.states()?;
        let evolution = self.evolution_for(&states)?;
        let time = &self.config.time;
        let grid = match &time.times {
            Some(ts) => TimeGrid::new(ts.clone())?,
            None => TimeGrid::uniform(time.t_max, time.points, time.include_quarters)?,
        };
        let mut summaries = Vec::new();
        for (t_over_tf, state) in &states {
            let snapshots = survival_sweep(&evolution, state, &grid)?;
            let name = format!("survival_{}.csv", temperature_tag(*t_over_tf));
            let mut csv = CsvWriter::create(
                self.path(&name),
                &["t", "t_over_tr", "F", "logF", "max_offdiag", "classification"],
            )?;
            for s in &snapshots {
                csv.row(&[
                    sci(s.t),
                    sci(s.tau),
                    sci(s.survival),
                    sci(s.log_survival),
                    sci(s.max_offdiag),
                    s.classification.label().to_string(),
                ])?;
            }
            self.files.push(csv.finish()?);
            summaries.push(json!({
                "t_over_tf": t_over_tf,
                "points": snapshots.len(),
                "quarter_revivals": quarter_summary(&snapshots),
            }));
        }
        Ok(json!({ "revival_time": evolution.revival_time(), "temperatures": summaries }))
    }

    fn phases(&mut self) -> Result<Value> {
        let states = self.states()?;
        let evolution = self.evolution_for(&states)?;
        let times = self.config.time.times.clone().unwrap_or_else(|| vec![0.25]);
        let mut entries =
            CsvWriter::create(self.path("phases.csv"), &["T_over_TF", "t_over_tr", "k", "re", "im", "modulus", "phase"])?;
        let mut summary = CsvWriter::create(
            self.path("phases_summary.csv"),
            &["T_over_TF", "t_over_tr", "F", "logF", "max_offdiag", "classification"],
        )?;
        let mut out = Vec::new();
        for (t_over_tf, state) in &states {
            for &tau in &times {
                let s = evolution.snapshot(tau, state, false)?;
                for (k, z) in s.diagonal.iter().enumerate() {
                    entries.row(&[
                        sci(*t_over_tf),
                        sci(tau),
                        (k + 1).to_string(),
                        sci(z.re),
                        sci(z.im),
                        sci(z.norm()),
                        sci(z.arg()),
                    ])?;
                }
                summary.row(&[
                    sci(*t_over_tf),
                    sci(tau),
                    sci(s.survival),
                    sci(s.log_survival),
                    sci(s.max_offdiag),
                    s.classification.label().to_string(),
                ])?;
                out.push(json!({
                    "t_over_tf": t_over_tf,
                    "t_over_tr": tau,
                    "survival": s.survival,
                    "max_offdiag": s.max_offdiag,
                    "classification": s.classification.label(),
                }));
            }
        }
        self.files.push(entries.finish()?);
        self.files.push(summary.finish()?);
        Ok(json!({ "revival_time": evolution.revival_time(), "snapshots": out }))
    }

    fn wpd(&mut self) -> Result<Value> {
        let (quench, particles) = self.quench()?;
        let wpd = self.config.wpd;
        let truncation = self.config.truncation;
        let mut out = Vec::new();
        for t_over_tf in self.config.temperatures.clone() {
            let spectrum = quench.initial_spectrum()?;
            let thermal = if t_over_tf > 0.0 {
                let th = ThermalState::at_temperature(&spectrum, particles, t_over_tf)?;
                self.note_thermal(&spectrum, &th);
                Some(th)
            } else {
                None
            };
            let rows = thermal.as_ref().map_or(particles, |th| th.levels().max(particles + 1));
            let occupations = match &thermal {
                Some(th) => th.resized(rows).occupations,
                None => vec![1.0; particles],
            };
            // user-fixed M wins; otherwise M follows the work-moment policy
            let u = match truncation {
                Truncation::Fixed { columns } => {
                    let key = ("work", quench.source(), rows, truncation);
                    self.cached("work", &key, quench.source(), || quench.build_fixed(particles, rows, columns))?
                }
                Truncation::Adaptive { .. } => {
                    let key = ("work", quench.source(), rows, particles, t_over_tf, wpd.moment);
                    self.cached("work", &key, quench.source(), || {
                        overlap_for_work(&occupations, wpd.moment, |m| quench.build_fixed(particles, rows, m))
                    })?
                }
            };
            let start = Instant::now();
            let spectrum_out = match &thermal {
                None => enumerate_final_states(
                    &u,
                    particles,
                    &WpdOptions { max_order: wpd.max_order, threshold: wpd.threshold, candidate_cap: wpd.candidate_cap },
                )?,
                Some(th) => wpd_finite_t(
                    &u,
                    th,
                    &ThermalWpdOptions {
                        max_order_initial: wpd.max_order_initial,
                        max_order_final: wpd.max_order,
                        threshold: wpd.threshold,
                        candidate_cap: wpd.candidate_cap,
                    },
                )?,
            };
            let summary = wpd_summary(&quench, &spectrum_out, t_over_tf, start.elapsed().as_secs_f64());
            let name = format!("wpd_{}.json", temperature_tag(t_over_tf));
            self.files.push(write_wpd_json(self.path(&name), &summary, &spectrum_out)?);
            out.push(summary);
        }
        Ok(json!({ "spectra": out }))
    }

    fn work_scan(&mut self) -> Result<Value> {
        let scan = &self.config.scan;
        let geom = BoxGeometry::new(scan.length)?;
        let rows = work_scan(&scan.alphas, scan.particles_min..=scan.particles_max, &geom)?;
        let mut csv = CsvWriter::create(
            self.path("work_scan.csv"),
            &[
                "N",
                "alpha",
                "average_work",
                "irreversible_work",
                "ground_state_shift",
                "average_work_over_E1",
                "irreversible_work_over_E1",
                "ground_state_shift_over_E1",
            ],
        )?;
        for r in &rows {
            let level = HierarchyLevel::new(r.alpha)?;
            csv.row(&[
                r.particles.to_string(),
                r.alpha.to_string(),
                sci(r.average_work),
                sci(r.irreversible_work),
                sci(r.ground_state_shift),
                average_work_quanta(level, r.particles).to_string(),
                irreversible_work_quanta(level, r.particles).to_string(),
                ground_state_shift_quanta(level, r.particles).to_string(),
            ])?;
        }
        self.files.push(csv.finish()?);
        Ok(json!({ "rows": rows.len(), "ground_energy": geom.ground_energy() }))
    }

    fn basis_dump(&mut self) -> Result<Value> {
        let b = self.config.basis;
        let geom = BoxGeometry::new(b.length)?;
        let basis = HierarchyBasis::new(geom, b.alpha_max)?;
        // cell midpoints keep every node strictly inside the walls
        let nodes: Vec<f64> =
            (0..b.points).map(|i| -geom.half_width() + geom.length() * (i as f64 + 0.5) / b.points as f64).collect();
        let tables = (1..=b.alpha_max).map(|a| basis.tabulate(a, b.states, &nodes)).collect::<Result<Vec<_>>>()?;

        let mut header = vec!["x".to_string()];
        for a in 1..=b.alpha_max {
            header.extend((1..=b.states).map(|m| format!("psi_a{a}_m{m}")));
        }
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = CsvWriter::create(self.path("basis_wavefunctions.csv"), &header_refs)?;
        for (j, &x) in nodes.iter().enumerate() {
            let mut row = vec![sci(x)];
            for t in &tables {
                row.extend((0..b.states).map(|m| sci(t[(m, j)])));
            }
            csv.row(&row)?;
        }
        self.files.push(csv.finish()?);

        let levels = (1..=b.alpha_max).map(HierarchyLevel::new).collect::<Result<Vec<_>>>()?;
        let mut header = vec!["x".to_string()];
        header.extend(levels.iter().skip(1).map(|l| format!("W_a{}", l.get())));
        header.extend(levels.iter().map(|l| format!("V_a{}", l.get())));
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = CsvWriter::create(self.path("basis_potentials.csv"), &header_refs)?;
        let ws = levels.iter().skip(1).map(|&l| superpotential(l, &geom)).collect::<Result<Vec<_>>>()?;
        let vs: Vec<_> = levels.iter().map(|&l| partner_potential(l, &geom)).collect();
        for &x in &nodes {
            let mut row = vec![sci(x)];
            row.extend(ws.iter().map(|w| sci(w.value(x))));
            row.extend(vs.iter().map(|v| sci(v.value(x))));
            csv.row(&row)?;
        }
        self.files.push(csv.finish()?);

        let mut csv = CsvWriter::create(self.path("basis_energies.csv"), &["alpha", "m", "energy", "energy_over_E1"])?;
        for level in &levels {
            let spectrum = Spectrum::hierarchy(&geom, *level);
            for m in 1..=b.states {
                csv.row(&[level.get().to_string(), m.to_string(), sci(spectrum.energy(m)), spectrum.quanta(m).to_string()])?;
            }
        }
        self.files.push(csv.finish()?);
        Ok(json!({ "ground_energy": geom.ground_energy(), "nodes": nodes.len() }))
    }
}

/// F and classification at every grid point that is a multiple of t_r/4.
fn quarter_summary(snapshots: &[EvolutionSnapshot]) -> Vec<Value> {
    snapshots
        .iter()
        .filter(|s| (s.tau * 4.0).fract() == 0.0)
        .map(|s| json!({ "t_over_tr": s.tau, "survival": s.survival, "classification": s.classification.label() }))
        .collect()
}

fn wpd_summary(quench: &Quench, s: &WorkSpectrum, t_over_tf: f64, seconds: f64) -> Value {
    let scale = s.energy_scale;
    let closed_form = match quench {
        Quench::Hierarchy { from: 1, to, .. } if t_over_tf == 0.0 => HierarchyLevel::new(*to)
            .ok()
            .map(|l| average_work_quanta(l, s.particles) as f64 * scale),
        _ => None,
    };
    let ground = s.ground_record().map(|r| {
        json!({ "work": r.work, "work_quanta": r.work_quanta, "probability": r.probability })
    });
    json!({
        "t_over_tf": t_over_tf,
        "particles": s.particles,
        "energy_scale": scale,
        "records": s.records.len(),
        "total_probability": s.total_probability,
        "probability_deficit": s.probability_deficit(),
        "first_moment": s.first_moment,
        "average_work_closed_form": closed_form,
        "first_moment_relative_deficit": closed_form.map(|w| (w - s.first_moment) / w),
        "probability_by_order": s.probability_by_order(),
        "ground_record": ground,
        "truncation": s.truncation,
        "evaluated_candidates": s.evaluated_candidates,
        "initial_configurations": s.initial_configurations,
        "initial_weight_coverage": s.initial_weight_coverage,
        "seconds": seconds,
    })
}
