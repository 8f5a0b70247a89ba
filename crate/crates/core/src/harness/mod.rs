//! Experiment orchestration: configs, deterministic runs, CSV/SVG artifacts and the
//! acceptance suite.
//!
//! Every run writes into its own directory: the CSV tables, optional SVG plots and raw
//! blocks, the materialized `config.toml`, and `manifest.json`. CSVs depend only on the
//! config; timings live in the manifest.

pub mod config;
pub mod criteria;
pub mod report;

pub use config::{
    ExperimentConfig, ExperimentKind, FamilyKind, FieldSpec, FormboundSpec, InitialSpec, Level, MollifySpec, SimSpec,
    SolveSpec,
};
pub use criteria::{Criterion, CriterionResult, Scale, Suite};
pub use report::{line_plot, to_csv, Axes, Table};

use crate::error::{LabError, Result};
use crate::fields::{
    estimate_form_bound_detailed, DriftField, FormBoundCertificate, GFunction, OriginConcentratingFamily,
    RandomBumpFamily, TestFamily,
};
use crate::io::Block;
use crate::mollify::{build_sequence, l2loc_distance, sample_on_lattice, MollifierSchedule, Region};
use crate::pde::{energy_report, gaussian_exact, solve_forward_cauchy, OracleReport, SpaceTimeGrid};
use crate::sde::{expected_drift_integral, mean_stderr, modulus_of_continuity, simulate_euler};
use crate::special::{sobolev_constant, unit_ball_volume, unit_ball_volume_product_reading, unit_sphere_area};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable naming the output root.
pub const OUTPUT_ROOT_ENV: &str = "FBLAB_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "lab-output";

/// Path-functional jitter: half of the 10⁻⁶ evaluation cell.
const PATH_JITTER: f64 = 5e-7;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionRecord {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: String,
    pub detail: String,
    pub seconds: f64,
}

impl From<&CriterionResult> for CriterionRecord {
    fn from(r: &CriterionResult) -> Self {
        Self {
            id: r.id,
            name: r.name.clone(),
            pass: r.pass,
            value: r.value,
            threshold: r.threshold.clone(),
            detail: r.detail.clone(),
            seconds: r.seconds,
        }
    }
}

/// Provenance of one run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub kind: String,
    pub wall_time_s: f64,
    /// Constants used by the run (C_S, unit-ball volume readings, jitter sizes).
    pub derived: BTreeMap<String, f64>,
    pub criteria: Vec<CriterionRecord>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

fn derived_constants(d: usize, grid: &SpaceTimeGrid) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("C_S".into(), sobolev_constant(d));
    m.insert("omega_d".into(), unit_ball_volume(d));
    m.insert("omega_d_product_reading".into(), unit_ball_volume_product_reading(d));
    m.insert("sphere_area".into(), unit_sphere_area(d));
    m.insert("jitter_grid".into(), 0.5 * grid.h_x());
    m.insert("jitter_paths".into(), PATH_JITTER);
    m
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn table(&mut self, t: &Table) -> Result<()> {
        self.write(&t.name, t.csv.as_bytes())
    }

    fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<Table> {
        let t = Table::from_rows(name, rows)?;
        self.table(&t)?;
        Ok(t)
    }

    fn block(&mut self, name: &str, b: &Block) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(self.dir.join(name))?);
        b.write_to(&mut w)?;
        std::io::Write::flush(&mut w)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    match &cfg.output_dir {
        Some(d) => PathBuf::from(d),
        None => output_root().join(format!("{}-{}", cfg.kind, &cfg.hash()[..12])),
    }
}

/// The raw field and, when levels are configured, its mollified schedule.
fn prepare_field(cfg: &ExperimentConfig) -> Result<(DriftField, Vec<(DriftField, MollifierSchedule)>)> {
    let raw = cfg.field.build()?;
    if cfg.mollify.levels.is_empty() {
        return Ok((raw, Vec::new()));
    }
    let cert = raw.certificate().cloned().unwrap_or_else(FormBoundCertificate::trivial);
    let seq = build_sequence(&raw, &cert, &cfg.mollify.levels, &cfg.mollify.rule, &cfg.mollify.lattice)?;
    Ok((raw, seq))
}

/// The field a solve or simulation uses: the finest mollified level, else the raw field.
fn working_field(cfg: &ExperimentConfig) -> Result<(DriftField, Option<u32>)> {
    let (raw, seq) = prepare_field(cfg)?;
    Ok(match seq.into_iter().last() {
        Some((b, s)) => (b, Some(s.m)),
        None => (raw, None),
    })
}

/// Runs one experiment into its directory and returns the manifest it wrote.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut art = Artifacts::new(run_dir(cfg))?;
    let criteria = match cfg.kind {
        ExperimentKind::Formbound => {
            run_formbound(cfg, &mut art)?;
            Vec::new()
        }
        ExperimentKind::Mollify => {
            run_mollify(cfg, &mut art)?;
            Vec::new()
        }
        ExperimentKind::Solve => {
            run_solve(cfg, &mut art)?;
            Vec::new()
        }
        ExperimentKind::Simulate => {
            run_simulate(cfg, &mut art)?;
            Vec::new()
        }
        ExperimentKind::Verify(c) => {
            let r = Suite::new(cfg.level).run(c);
            write_criterion(&mut art, &r, "")?;
            art.rows("criteria.csv", std::slice::from_ref(&r))?;
            vec![CriterionRecord::from(&r)]
        }
    };
    art.write("config.toml", cfg.to_toml().as_bytes())?;
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.kind.to_string(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        derived: derived_constants(cfg.field.dim(), &cfg.grid),
        criteria,
        files: art.files.clone(),
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Io(e.to_string()))?;
    art.write("manifest.json", json.as_bytes())?;
    Ok(manifest)
}

/// Runs independent experiments concurrently, each in its own directory.
pub fn run_batch(cfgs: &[ExperimentConfig]) -> Vec<Result<RunManifest>> {
    cfgs.par_iter().map(run_experiment).collect()
}

fn write_criterion(art: &mut Artifacts, r: &CriterionResult, prefix: &str) -> Result<()> {
    for t in &r.tables {
        art.write(&format!("{prefix}{}", t.name), t.csv.as_bytes())?;
    }
    for (name, svg) in &r.plots {
        art.write(&format!("{prefix}{name}"), svg.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct FormboundRow {
    field_id: String,
    family: String,
    budget: usize,
    seed: u64,
    delta_certified: Option<f64>,
    estimate: f64,
    best_index: Option<usize>,
    degenerate: usize,
}

fn run_formbound(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let b = cfg.field.build()?;
    let d = b.dim();
    let fam: Box<dyn TestFamily> = match cfg.formbound.family {
        FamilyKind::Origin => Box::new(OriginConcentratingFamily::new(d, cfg.seed)),
        FamilyKind::Random => Box::new(RandomBumpFamily::new(d, cfg.seed)),
    };
    let g = b.certificate().map(|c| c.g.clone()).unwrap_or(GFunction::Zero);
    let est = estimate_form_bound_detailed(&b, fam.as_ref(), cfg.formbound.budget, &g)?;
    art.rows(
        "formbound.csv",
        &[FormboundRow {
            field_id: b.id().into(),
            family: format!("{:?}", cfg.formbound.family).to_lowercase(),
            budget: cfg.formbound.budget,
            seed: cfg.seed,
            delta_certified: b.certificate().map(|c| c.delta),
            estimate: est.estimate,
            best_index: est.best_index,
            degenerate: est.degenerate,
        }],
    )?;
    if let Some(c) = b.certificate() {
        let json = serde_json::to_string_pretty(c).map_err(|e| LabError::Io(e.to_string()))?;
        art.write("certificate.json", json.as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScheduleRow {
    field_id: String,
    m: u32,
    eps_m: f64,
    gamma_m: f64,
    c_m: f64,
    #[serde(rename = "C_S")]
    c_s: f64,
    r: f64,
    lattice_distance: f64,
    l2loc_distance: f64,
    sup_bound: f64,
}

fn run_mollify(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let mut cfg = cfg.clone();
    if cfg.mollify.levels.is_empty() {
        cfg.mollify.levels = vec![4, 8, 16, 32];
    }
    let (raw, seq) = prepare_field(&cfg)?;
    let region = Region::cube(raw.dim(), 2.0, 0.0, 1.0);
    let mut rows = Vec::new();
    for (b, s) in &seq {
        rows.push(ScheduleRow {
            field_id: b.id().into(),
            m: s.m,
            eps_m: s.eps_m,
            gamma_m: s.gamma_m,
            c_m: s.c_m,
            c_s: s.c_s,
            r: s.r,
            lattice_distance: s.lattice_distance,
            l2loc_distance: l2loc_distance(&raw, b, &region, 1.0 / 16.0, 1.0 / 16.0)?,
            sup_bound: b.sup_bound().unwrap_or(f64::INFINITY),
        });
    }
    art.rows("schedule.csv", &rows)?;
    let (b, s) = seq.last().expect("levels are nonempty");
    let lat = cfg.grid.lattice();
    let data = sample_on_lattice(b, &lat, cfg.grid.t_start);
    art.block(&format!("b_m{}.bin", s.m), &Block::from_lattice(&lat, b.dim(), data))
}

#[derive(Serialize)]
struct NormRow {
    t: f64,
    sup: f64,
    l1: f64,
    l2: f64,
}

fn run_solve(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let (b, m) = working_field(cfg)?;
    let f = cfg.initial.function();
    let sol = solve_forward_cauchy(&b, f.as_ref(), None, &cfg.grid)?;
    let lat = sol.lattice();
    let vol = lat.cell_volume();
    let norms: Vec<NormRow> = sol
        .levels
        .iter()
        .zip(&sol.times)
        .map(|(v, &t)| NormRow {
            t,
            sup: v.iter().fold(0.0f64, |a, x| a.max(x.abs())),
            l1: v.iter().map(|x| x.abs()).sum::<f64>() * vol,
            l2: (v.iter().map(|x| x * x).sum::<f64>() * vol).sqrt(),
        })
        .collect();
    let table = art.rows("norms.csv", &norms)?;
    if cfg.solve.plot {
        let svg = line_plot(&table.csv, "t", &["sup", "l2"], "norms vs time", Axes::default())?;
        art.write("norms.svg", svg.as_bytes())?;
    }
    let advection = match &cfg.field {
        FieldSpec::Zero { dim } if m.is_none() => Some(vec![0.0; *dim]),
        FieldSpec::Constant { c } if m.is_none() => Some(c.clone()),
        _ => None,
    };
    if let (Some(c), InitialSpec::Gaussian { center, sigma2 }) = (advection, &cfg.initial) {
        let rows: Vec<OracleReport> = sol
            .levels
            .iter()
            .zip(&sol.times)
            .skip(1)
            .map(|(v, &t)| {
                let dt = t - cfg.grid.t_start;
                let (mut err, mut peak) = (0.0f64, 0.0f64);
                let mut x = vec![0.0; lat.dim];
                for (i, val) in v.iter().enumerate() {
                    lat.coords(i, &mut x);
                    let e = gaussian_exact(center, *sigma2, &c, dt, &x);
                    err = err.max((val - e).abs());
                    peak = peak.max(e.abs());
                }
                OracleReport {
                    sigma2: *sigma2,
                    t: dt,
                    max_rel_error: err / peak,
                    boundary_leak: sol.boundary_leak,
                }
            })
            .collect();
        art.rows("oracle.csv", &rows)?;
    }
    if let Some(q) = cfg.solve.q {
        let cert = b.certificate().cloned().unwrap_or_else(FormBoundCertificate::trivial);
        let mut rep = energy_report(&sol, q, &cfg.weight, None, &cert)?;
        rep.m = m;
        art.rows("energy.csv", &[rep])?;
    }
    if cfg.solve.write_solution {
        art.block("solution.bin", &Block::from_lattice(&lat, 1, sol.last().to_vec()))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MomentRow {
    t: f64,
    mean_sq_displacement: f64,
    mean_radius: f64,
}

#[derive(Serialize)]
struct BaselineRow {
    t: f64,
    mean_sq_displacement: f64,
    expected: f64,
    stderr: f64,
    z_score: f64,
}

fn run_simulate(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<()> {
    let (b, m) = working_field(cfg)?;
    let d = b.dim();
    let x0 = if cfg.sim.start.is_empty() {
        vec![0.0; d]
    } else {
        cfg.sim.start.clone()
    };
    let mut sc = cfg.sim.to_config(cfg.seed);
    sc.m = m;
    let ens = simulate_euler(&b, &x0, &sc)?;
    let n = ens.n_paths();
    let mut moments = Vec::new();
    let mut baseline = Vec::new();
    for (k, &t) in ens.times.iter().enumerate() {
        let disp: Vec<f64> = (0..n)
            .map(|p| ens.position(p, k).iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let (msd, se) = mean_stderr(&disp);
        let radius = (0..n).map(|p| ens.position(p, k).iter().map(|a| a * a).sum::<f64>().sqrt()).sum::<f64>() / n as f64;
        moments.push(MomentRow {
            t,
            mean_sq_displacement: msd,
            mean_radius: radius,
        });
        if k > 0 {
            let expected = if cfg.sim.zero_noise { 0.0 } else { 2.0 * d as f64 * t };
            baseline.push(BaselineRow {
                t,
                mean_sq_displacement: msd,
                expected,
                stderr: se,
                z_score: if se > 0.0 { (msd - expected) / se } else { 0.0 },
            });
        }
    }
    art.rows("moments.csv", &moments)?;
    if matches!(cfg.field, FieldSpec::Zero { .. }) {
        art.rows("baseline.csv", &baseline)?;
    }
    let cert = b.certificate().cloned().unwrap_or_else(FormBoundCertificate::trivial);
    let mut reports = vec![expected_drift_integral(&ens, &b, &cert, (0.0, sc.horizon))?];
    let lag = 4.0 * ens.record_dt();
    if ens.n_records() > 8 {
        reports.push(modulus_of_continuity(&ens, 0.5, lag, &cert)?);
    }
    art.rows("functionals.csv", &reports)?;
    if cfg.sim.write_ensemble {
        let mut w = std::io::BufWriter::new(std::fs::File::create(art.dir.join("ensemble.bin"))?);
        ens.write_to(&mut w)?;
        std::io::Write::flush(&mut w)?;
        art.files.push("ensemble.bin".into());
    }
    Ok(())
}

/// Small configs exercised by the determinism criterion.
pub fn determinism_configs() -> Vec<ExperimentConfig> {
    let mut solve = ExperimentConfig::new(ExperimentKind::Solve, FieldSpec::Zero { dim: 3 });
    solve.grid = SpaceTimeGrid {
        cells: 32,
        steps: 40,
        save_every: 10,
        ..SpaceTimeGrid::default()
    };
    solve.solve.q = Some(4.0);
    solve.solve.plot = true;

    let hardy = FieldSpec::Hardy {
        dim: 3,
        delta: 0.04,
        sign: 1.0,
        amplitude: 1.0,
        omega: 0.0,
    };
    let mut sim = ExperimentConfig::new(ExperimentKind::Simulate, hardy.clone());
    sim.mollify.levels = vec![4];
    sim.mollify.lattice.cells = 36;
    sim.sim.n_paths = 1000;
    sim.sim.horizon = 0.25;
    sim.sim.start = vec![0.5, 0.0, 0.0];

    let mut fb = ExperimentConfig::new(ExperimentKind::Formbound, hardy);
    fb.formbound.budget = 6;
    vec![solve, sim, fb]
}

/// Aggregate result of a suite run.
#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub level: Level,
    pub results: Vec<CriterionResult>,
    pub dir: PathBuf,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn first_failure(&self) -> Option<&CriterionResult> {
        self.results.iter().find(|r| !r.pass)
    }
}

/// Runs every criterion at `level` under `root`, printing one line per criterion.
pub fn verify_suite(level: Level, root: &Path) -> Result<SuiteReport> {
    verify_criteria(&Suite::new(level), &Criterion::ALL, root)
}

/// Runs the given criteria in order with a shared suite and writes `verify-<level>/`.
pub fn verify_criteria(suite: &Suite, which: &[Criterion], root: &Path) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let mut art = Artifacts::new(root.join(format!("verify-{}", suite.level)))?;
    let mut results = Vec::new();
    for &c in which {
        let r = suite.run(c);
        println!("{}", r.line());
        write_criterion(&mut art, &r, &format!("{:02}_", r.id))?;
        results.push(r);
    }
    art.rows("criteria.csv", &results)?;
    let mut cfg = ExperimentConfig::new(ExperimentKind::Verify(which[0]), FieldSpec::default());
    cfg.level = suite.level;
    cfg.grid = suite.scale.grid.clone();
    cfg.mollify.lattice = suite.scale.mollify.clone();
    cfg.sim.n_paths = suite.scale.n_paths;
    cfg.sim.h_t = suite.scale.sim_h_t;
    cfg.formbound.budget = suite.scale.budget;
    cfg.seed = suite.scale.seed;
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: format!("verify-suite-{}", suite.level),
        wall_time_s: t0.elapsed().as_secs_f64(),
        derived: derived_constants(3, &suite.scale.grid),
        criteria: results.iter().map(CriterionRecord::from).collect(),
        files: art.files.clone(),
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| LabError::Io(e.to_string()))?;
    art.write("manifest.json", json.as_bytes())?;
    let report = SuiteReport {
        level: suite.level,
        results,
        dir: art.dir,
    };
    if let Some(f) = report.first_failure() {
        println!("first failing criterion: {}", f.line());
        println!("  detail: {}", f.detail);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_cfg(mut cfg: ExperimentConfig, dir: &Path) -> ExperimentConfig {
        cfg.output_dir = Some(dir.to_string_lossy().into_owned());
        cfg
    }

    #[test]
    fn solve_zero_field_writes_oracle_under_two_percent() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Solve, FieldSpec::Zero { dim: 3 });
        cfg.grid.cells = 48;
        cfg.grid.steps = 100;
        cfg.grid.save_every = 25;
        let m = run_experiment(&tmp_cfg(cfg, dir.path())).unwrap();
        assert!(m.files.contains(&"oracle.csv".to_string()));
        let text = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
        let cols = report::read_columns(&text, &["max_rel_error", "t"]).unwrap();
        assert_eq!(cols[0].len(), 4);
        assert!(cols[0][3] <= 0.02, "{:?}", cols[0]);
        assert!((cols[1][3] - 0.5).abs() < 1e-12);
        assert!(m.derived["C_S"] > 0.18 && m.derived["C_S"] < 0.19);
        let back: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back.config_hash, m.config_hash);
    }

    #[test]
    fn simulate_zero_field_writes_brownian_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(ExperimentKind::Simulate, FieldSpec::Zero { dim: 3 });
        cfg.sim.n_paths = 4000;
        cfg.sim.h_t = 0.01;
        run_experiment(&tmp_cfg(cfg, dir.path())).unwrap();
        let text = std::fs::read_to_string(dir.path().join("baseline.csv")).unwrap();
        let cols = report::read_columns(&text, &["z_score", "expected", "mean_sq_displacement"]).unwrap();
        assert_eq!(cols[0].len(), 50);
        let last = cols[2].len() - 1;
        assert!((cols[1][last] - 3.0).abs() < 1e-12);
        assert!(cols[0][last].abs() < 4.0, "{}", cols[0][last]);
    }

    #[test]
    fn singular_field_without_levels_is_rejected_by_the_solver() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(
            ExperimentKind::Solve,
            FieldSpec::Hardy {
                dim: 3,
                delta: 0.04,
                sign: 1.0,
                amplitude: 1.0,
                omega: 0.0,
            },
        );
        cfg.grid.cells = 16;
        cfg.grid.steps = 4;
        let err = run_experiment(&tmp_cfg(cfg, dir.path())).unwrap_err();
        assert!(matches!(err, LabError::RejectedSingularField(_)), "{err}");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        for (i, cfg) in determinism_configs().into_iter().enumerate() {
            let a = run_experiment(&tmp_cfg(cfg.clone(), &dir.path().join(format!("{i}a")))).unwrap();
            let b = run_experiment(&tmp_cfg(cfg, &dir.path().join(format!("{i}b")))).unwrap();
            assert_eq!(a.files, b.files);
            assert_eq!(a.config_hash, b.config_hash);
            for f in a.files.iter().filter(|f| f.ends_with(".csv") || f.ends_with(".svg")) {
                let x = std::fs::read(dir.path().join(format!("{i}a")).join(f)).unwrap();
                let y = std::fs::read(dir.path().join(format!("{i}b")).join(f)).unwrap();
                assert_eq!(x, y, "{f}");
            }
        }
    }

    #[test]
    fn default_run_dir_uses_kind_and_hash() {
        let cfg = ExperimentConfig::new(ExperimentKind::Solve, FieldSpec::default());
        let d = run_dir(&cfg);
        let name = d.file_name().unwrap().to_string_lossy().into_owned();
        assert!(name.starts_with("solve-") && name.len() == "solve-".len() + 12, "{name}");
    }
}
