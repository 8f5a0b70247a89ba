//! The thirteen acceptance criteria.

use super::config::Level;
use super::report::{Axes, Table};
use crate::error::{LabError, Result};
use crate::fields::{
    estimate_form_bound, make_hardy_drift, make_zero_drift, DriftField, FormBoundCertificate, Modulation,
    OriginConcentratingFamily, TestFunction,
};
use crate::mollify::{build_approximation, build_sequence, l2loc_distance, GammaRule, MollifierSchedule, MollifyConfig, Region};
use crate::pde::{
    energy_report, feller_convergence, gaussian, gaussian_oracle, lp_contraction_check, smoothing_exponent_fit,
    smoothing_ratio, solve_forward_cauchy, GridSolution, SourceTerm, SpaceTimeGrid, Weight,
};
use crate::sde::{
    drift_integral_pde, duality_check, expected_drift_integral, krylov_functional, marginal_distance,
    occupation_near_origin, simulate_euler, FunctionalReport, SimConfig,
};
use serde::Serialize;
use std::sync::OnceLock;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    HeatOracle,
    FormBound,
    DeltaPreservation,
    Feller,
    Energy,
    LpContraction,
    Smoothing,
    Krylov,
    DriftIntegral,
    Duality,
    ScheduleIndependence,
    Stickiness,
    Determinism,
}

impl Criterion {
    pub const ALL: [Criterion; 13] = [
        Criterion::HeatOracle,
        Criterion::FormBound,
        Criterion::DeltaPreservation,
        Criterion::Feller,
        Criterion::Energy,
        Criterion::LpContraction,
        Criterion::Smoothing,
        Criterion::Krylov,
        Criterion::DriftIntegral,
        Criterion::Duality,
        Criterion::ScheduleIndependence,
        Criterion::Stickiness,
        Criterion::Determinism,
    ];

    pub fn number(self) -> u32 {
        Self::ALL.iter().position(|c| *c == self).unwrap() as u32 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::HeatOracle => "heat-oracle",
            Criterion::FormBound => "form-bound",
            Criterion::DeltaPreservation => "delta-preservation",
            Criterion::Feller => "feller",
            Criterion::Energy => "energy",
            Criterion::LpContraction => "lp-contraction",
            Criterion::Smoothing => "smoothing",
            Criterion::Krylov => "krylov",
            Criterion::DriftIntegral => "drift-integral",
            Criterion::Duality => "duality",
            Criterion::ScheduleIndependence => "schedule-independence",
            Criterion::Stickiness => "stickiness",
            Criterion::Determinism => "determinism",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Wall-clock limit in seconds.
    pub fn time_limit(self) -> f64 {
        match self {
            Criterion::HeatOracle | Criterion::FormBound | Criterion::Determinism => 60.0,
            Criterion::LpContraction => 120.0,
            Criterion::DeltaPreservation
            | Criterion::Smoothing
            | Criterion::Duality
            | Criterion::ScheduleIndependence => 300.0,
            Criterion::Feller | Criterion::Energy | Criterion::Krylov | Criterion::DriftIntegral | Criterion::Stickiness => {
                600.0
            }
        }
    }
}

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    /// Headline number compared against `threshold`.
    pub value: f64,
    pub threshold: String,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    pub tables: Vec<Table>,
    #[serde(skip)]
    pub plots: Vec<(String, String)>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {:<22} {} = {} ({})  [{:.1} s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail_key(),
            fmt_num(self.value),
            self.threshold,
            self.seconds
        )
    }

    fn detail_key(&self) -> &str {
        self.detail.split(';').next().unwrap_or("")
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

/// Problem sizes for a suite level.
#[derive(Clone, Debug, PartialEq)]
pub struct Scale {
    pub grid: SpaceTimeGrid,
    pub mollify: MollifyConfig,
    pub n_paths: usize,
    pub budget: usize,
    pub sim_h_t: f64,
    /// Cells per axis for the smoothing-exponent runs on [−3, 3]³.
    pub smoothing_cells: usize,
    pub seed: u64,
}

impl Scale {
    pub fn for_level(level: Level) -> Self {
        match level {
            Level::Full => Self {
                grid: SpaceTimeGrid::default(),
                mollify: MollifyConfig::default(),
                n_paths: 10_000,
                budget: 32,
                sim_h_t: 0.0025,
                smoothing_cells: 96,
                seed: 20_240_601,
            },
            Level::Quick => Self {
                grid: SpaceTimeGrid {
                    cells: 48,
                    steps: 100,
                    ..SpaceTimeGrid::default()
                },
                mollify: MollifyConfig {
                    cells: 54,
                    dynamic_cells: 27,
                    ..MollifyConfig::default()
                },
                n_paths: 10_000,
                budget: 32,
                sim_h_t: 0.0025,
                smoothing_cells: 64,
                seed: 20_240_601,
            },
        }
    }

    fn sim(&self, horizon: f64, seed: u64) -> SimConfig {
        SimConfig {
            h_t: self.sim_h_t,
            horizon,
            n_paths: self.n_paths,
            seed,
            ..SimConfig::default()
        }
    }
}

type Levels = Vec<(DriftField, MollifierSchedule)>;

/// Shared state for one suite run: sizes plus lazily built schedules.
pub struct Suite {
    pub level: Level,
    pub scale: Scale,
    hardy04: OnceLock<std::result::Result<Levels, String>>,
    hardy01: OnceLock<std::result::Result<Levels, String>>,
}

pub const HARDY_DELTA: f64 = 0.04;
pub const ENERGY_DELTA: f64 = 0.01;
const HARDY04_LEVELS: [u32; 4] = [4, 8, 16, 32];

impl Suite {
    pub fn new(level: Level) -> Self {
        Self::with_scale(level, Scale::for_level(level))
    }

    pub fn with_scale(level: Level, scale: Scale) -> Self {
        Self {
            level,
            scale,
            hardy04: OnceLock::new(),
            hardy01: OnceLock::new(),
        }
    }

    fn schedule<'a>(&'a self, cell: &'a OnceLock<std::result::Result<Levels, String>>, delta: f64, ms: &[u32]) -> Result<&'a Levels> {
        cell.get_or_init(|| {
            hardy(delta)
                .and_then(|b| {
                    let cert = b.certificate().expect("hardy fields carry a certificate").clone();
                    build_sequence(&b, &cert, ms, &GammaRule::default(), &self.scale.mollify)
                })
                .map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(|e| LabError::ScheduleFailure {
            m: 0,
            reason: e.clone(),
        })
    }

    /// Mollified Hardy(0.04) at m = 4, 8, 16, 32.
    pub fn hardy04(&self) -> Result<&Levels> {
        self.schedule(&self.hardy04, HARDY_DELTA, &HARDY04_LEVELS)
    }

    /// Mollified Hardy(0.01) at m = 4, 8, 16.
    pub fn hardy01(&self) -> Result<&Levels> {
        self.schedule(&self.hardy01, ENERGY_DELTA, &[4, 8, 16])
    }

    fn hardy04_at(&self, m: u32) -> Result<&DriftField> {
        let i = HARDY04_LEVELS.iter().position(|&k| k == m).expect("level in the cached schedule");
        Ok(&self.hardy04()?[i].0)
    }

    pub fn run(&self, c: Criterion) -> CriterionResult {
        let t0 = Instant::now();
        let out = match c {
            Criterion::HeatOracle => self.heat_oracle(),
            Criterion::FormBound => self.form_bound(),
            Criterion::DeltaPreservation => self.delta_preservation(),
            Criterion::Feller => self.feller(),
            Criterion::Energy => self.energy(),
            Criterion::LpContraction => self.lp_contraction(),
            Criterion::Smoothing => self.smoothing(),
            Criterion::Krylov => self.krylov(),
            Criterion::DriftIntegral => self.drift_integral(),
            Criterion::Duality => self.duality(),
            Criterion::ScheduleIndependence => self.schedule_independence(),
            Criterion::Stickiness => self.stickiness(),
            Criterion::Determinism => self.determinism(),
        };
        let seconds = t0.elapsed().as_secs_f64();
        let mut r = match out {
            Ok(o) => CriterionResult {
                id: c.number(),
                name: c.name().into(),
                pass: o.pass,
                value: o.value,
                threshold: o.threshold,
                detail: o.detail,
                seconds,
                tables: o.tables,
                plots: o.plots,
            },
            Err(e) => CriterionResult {
                id: c.number(),
                name: c.name().into(),
                pass: false,
                value: f64::NAN,
                threshold: "no error".into(),
                detail: format!("error; {e}"),
                seconds,
                tables: Vec::new(),
                plots: Vec::new(),
            },
        };
        if seconds > c.time_limit() {
            r.pass = false;
            r.detail.push_str(&format!("; over the {} s limit", c.time_limit()));
        }
        r
    }
}

struct Outcome {
    pass: bool,
    value: f64,
    threshold: String,
    detail: String,
    tables: Vec<Table>,
    plots: Vec<(String, String)>,
}

fn hardy(delta: f64) -> Result<DriftField> {
    make_hardy_drift(3, delta, 1.0, Modulation::Constant(1.0))
}

fn hardy_cert(delta: f64) -> FormBoundCertificate {
    hardy(delta).expect("valid delta").certificate().unwrap().clone()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi / lo - 1.0
}

#[derive(Serialize)]
struct BoundRow {
    field_id: String,
    m: Option<u32>,
    estimate: f64,
    l2loc_distance: Option<f64>,
    c_m: Option<f64>,
    eps_m: Option<f64>,
}

#[derive(Serialize)]
struct GapRow {
    m: u32,
    m_next: u32,
    gap: f64,
    sup_f: f64,
    relative_gap: f64,
}

#[derive(Serialize)]
struct SmoothingRow {
    field_id: String,
    t: f64,
    norm_ratio: f64,
}

#[derive(Serialize)]
struct DriftRow {
    field_id: String,
    window_start: f64,
    window_end: f64,
    lhs: f64,
    stderr: f64,
    lhs_per_time: f64,
    rhs: f64,
    pde_value: f64,
    pde_sup: f64,
    budget: f64,
}

#[derive(Serialize)]
struct DualityRow {
    case: String,
    field_id: String,
    mc: f64,
    stderr: f64,
    pde: f64,
    gap: f64,
    budget: f64,
}

#[derive(Serialize)]
struct KsRow {
    t: f64,
    ks_schedules: f64,
    ks_seeds: f64,
}

#[derive(Serialize)]
struct OccupationRow {
    delta: f64,
    coefficient: f64,
    c_m: f64,
    occupation: f64,
    radius: f64,
    horizon: f64,
    #[serde(rename = "N")]
    n_paths: usize,
}

const HEAT_SIGMA2: f64 = 0.25;
const ADVECTION: [f64; 3] = [0.5, 0.0, 0.0];

impl Suite {
    fn heat_oracle(&self) -> Result<Outcome> {
        let zero = gaussian_oracle(&self.scale.grid, HEAT_SIGMA2, &[0.0; 3])?;
        let adv = gaussian_oracle(&self.scale.grid, HEAT_SIGMA2, &ADVECTION)?;
        let worst = zero.max_rel_error.max(adv.max_rel_error);
        Ok(Outcome {
            pass: worst <= 0.02,
            value: worst,
            threshold: "<= 0.02".into(),
            detail: format!(
                "max_rel_error; zero drift {:.4e}, constant drift {:.4e}",
                zero.max_rel_error, adv.max_rel_error
            ),
            tables: vec![Table::from_rows("oracle.csv", &[zero, adv])?],
            plots: Vec::new(),
        })
    }

    fn form_bound(&self) -> Result<Outcome> {
        let b = hardy(HARDY_DELTA)?;
        let fam = OriginConcentratingFamily::new(3, self.scale.seed);
        let est = estimate_form_bound(&b, &fam, self.scale.budget)?;
        let hi = HARDY_DELTA * 1.05;
        Ok(Outcome {
            pass: (0.02..=hi).contains(&est),
            value: est,
            threshold: format!("in [0.02, {hi}]"),
            detail: format!("estimate; budget {}", self.scale.budget),
            tables: vec![Table::from_rows(
                "formbound.csv",
                &[BoundRow {
                    field_id: b.id().into(),
                    m: None,
                    estimate: est,
                    l2loc_distance: None,
                    c_m: None,
                    eps_m: None,
                }],
            )?],
            plots: Vec::new(),
        })
    }

    fn delta_preservation(&self) -> Result<Outcome> {
        let b = hardy(HARDY_DELTA)?;
        let levels = &self.hardy04()?[..3];
        let fam = OriginConcentratingFamily::new(3, self.scale.seed);
        let region = Region::cube(3, 2.0, 0.0, 1.0);
        let mut rows = Vec::new();
        for (bm, s) in levels {
            let est = estimate_form_bound(bm, &fam, self.scale.budget)?;
            let dist = l2loc_distance(&b, bm, &region, 1.0 / 16.0, 1.0 / 16.0)?;
            rows.push(BoundRow {
                field_id: bm.id().into(),
                m: Some(s.m),
                estimate: est,
                l2loc_distance: Some(dist),
                c_m: Some(s.c_m),
                eps_m: Some(s.eps_m),
            });
        }
        let hi = HARDY_DELTA * 1.05;
        let worst = rows.iter().map(|r| r.estimate).fold(0.0, f64::max);
        let dists: Vec<f64> = rows.iter().map(|r| r.l2loc_distance.unwrap()).collect();
        let dec = strictly_decreasing(&dists);
        Ok(Outcome {
            pass: worst <= hi && dec,
            value: worst,
            threshold: format!("<= {hi}, distances strictly decreasing"),
            detail: format!("max estimate; distances {dists:.4?} decreasing {dec}"),
            tables: vec![Table::from_rows("delta_preservation.csv", &rows)?],
            plots: Vec::new(),
        })
    }

    fn feller(&self) -> Result<Outcome> {
        let levels = self.hardy04()?;
        let fields: Vec<DriftField> = levels.iter().map(|l| l.0.clone()).collect();
        let f = gaussian(vec![0.0; 3], HEAT_SIGMA2);
        let rep = feller_convergence(&fields, &f, &self.scale.grid)?;
        let rows: Vec<GapRow> = rep
            .gaps
            .iter()
            .enumerate()
            .map(|(i, &gap)| GapRow {
                m: levels[i].1.m,
                m_next: levels[i + 1].1.m,
                gap,
                sup_f: rep.sup_f,
                relative_gap: gap / rep.sup_f,
            })
            .collect();
        let last = *rep.gaps.last().unwrap() / rep.sup_f;
        let dec = strictly_decreasing(&rep.gaps);
        let table = Table::from_rows("feller.csv", &rows)?;
        let plot = super::report::line_plot(&table.csv, "m", &["gap"], "sup gap vs m", Axes { log_x: true, log_y: true })?;
        Ok(Outcome {
            pass: dec && last <= 0.05,
            value: last,
            threshold: "<= 0.05, gaps strictly decreasing".into(),
            detail: format!(
                "final gap / sup f; gaps {:?} decreasing {dec}, max principle {}",
                rep.gaps, rep.max_principle
            ),
            tables: vec![table],
            plots: vec![("feller.svg".into(), plot)],
        })
    }

    fn energy(&self) -> Result<Outcome> {
        let raw = hardy(ENERGY_DELTA)?;
        let cert = hardy_cert(ENERGY_DELTA);
        let f = gaussian(vec![0.0; 3], HEAT_SIGMA2);
        let src = SourceTerm::new(raw, Some(TestFunction::new(0.25, vec![0.0; 3], 1.0, 0.25)));
        let grid = self.scale.grid.clone().with_save_every(10);
        let mut rows = Vec::new();
        for (bm, s) in self.hardy01()? {
            let sol = solve_forward_cauchy(bm, &f, Some(&src), &grid)?;
            let mut r = energy_report(&sol, 4.0, &Weight::default(), Some(&src), &cert)?;
            r.m = Some(s.m);
            rows.push(r);
        }
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let v = spread(&ratios);
        Ok(Outcome {
            pass: v <= 0.2,
            value: v,
            threshold: "<= 0.2".into(),
            detail: format!("ratio spread; ratios {ratios:.5?}"),
            tables: vec![Table::from_rows("energy.csv", &rows)?],
            plots: Vec::new(),
        })
    }

    fn lp_contraction(&self) -> Result<Outcome> {
        let b = self.hardy04_at(32)?;
        let f = gaussian(vec![0.0; 3], HEAT_SIGMA2);
        let sol = solve_forward_cauchy(b, &f, None, &self.scale.grid.clone().with_save_every(10))?;
        let chk = lp_contraction_check(&sol, 4.0, &hardy_cert(HARDY_DELTA))?;
        let v = chk.lhs / chk.rhs;
        Ok(Outcome {
            pass: chk.pass,
            value: v,
            threshold: "<= 1.05".into(),
            detail: format!("lhs / rhs; lhs {:.6e}, rhs {:.6e}", chk.lhs, chk.rhs),
            tables: vec![Table::from_rows("lp_contraction.csv", &[chk])?],
            plots: Vec::new(),
        })
    }

    fn smoothing_runs(&self, b: &DriftField) -> Result<Vec<GridSolution>> {
        [0.04, 0.08, 0.16, 0.32]
            .iter()
            .map(|&t| {
                let g = SpaceTimeGrid {
                    half_width: 3.0,
                    cells: self.scale.smoothing_cells,
                    steps: 200,
                    ..SpaceTimeGrid::default()
                }
                .with_interval(0.0, t)
                .with_save_every(0);
                solve_forward_cauchy(b, &gaussian(vec![0.0; 3], t), None, &g)
            })
            .collect()
    }

    fn smoothing(&self) -> Result<Outcome> {
        let (p, q) = (2.0, 4.0);
        let expected = -1.5 * (1.0 / p - 1.0 / q);
        let zero = make_zero_drift(3)?;
        let bm = self.hardy04_at(16)?;
        let mut rows = Vec::new();
        let mut slopes = Vec::new();
        for b in [&zero, bm] {
            let runs = self.smoothing_runs(b)?;
            for r in &runs {
                let (t, ratio) = smoothing_ratio(r, p, q);
                rows.push(SmoothingRow {
                    field_id: b.id().into(),
                    t,
                    norm_ratio: ratio,
                });
            }
            slopes.push(smoothing_exponent_fit(&runs, p, q)?);
        }
        let rel = (slopes[0] / expected - 1.0).abs();
        let hardy_ok = slopes[1] >= expected - 0.15;
        Ok(Outcome {
            pass: rel <= 0.15 && hardy_ok,
            value: slopes[0],
            threshold: format!("within 15% of {expected}; hardy slope >= {}", expected - 0.15),
            detail: format!("zero-drift slope; hardy slope {:.4}", slopes[1]),
            tables: vec![Table::from_rows("smoothing.csv", &rows)?],
            plots: Vec::new(),
        })
    }

    fn krylov(&self) -> Result<Outcome> {
        let cert = hardy_cert(HARDY_DELTA);
        let h = TestFunction::new(0.25, vec![0.0; 3], 1.0, 0.25);
        let x0 = [0.5, 0.0, 0.0];
        let mut rows: Vec<FunctionalReport> = Vec::new();
        for m in [8u32, 16] {
            let b = self.hardy04_at(m)?;
            for k in 0..3 {
                let mut cfg = self.scale.sim(0.5, self.scale.seed + k);
                cfg.h_t = self.scale.sim_h_t / f64::from(1u32 << k);
                cfg.m = Some(m);
                let ens = simulate_euler(b, &x0, &cfg)?;
                rows.push(krylov_functional(&ens, b, &h, 4.0, &cert)?);
            }
        }
        let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
        let band = spread(&ratios) + 1.0;
        Ok(Outcome {
            pass: band <= 1.2,
            value: band,
            threshold: "max/min <= 1.2".into(),
            detail: format!("ratio band; ratios {ratios:.4?}"),
            tables: vec![Table::from_rows("krylov.csv", &rows)?],
            plots: Vec::new(),
        })
    }

    fn drift_integral(&self) -> Result<Outcome> {
        let cert = hardy_cert(HARDY_DELTA);
        let b_m = self.hardy04_at(16)?;
        let b_k = self.hardy04_at(8)?;
        let x0 = [2.0, 0.0, 0.0];
        let mut cfg = self.scale.sim(1.0, self.scale.seed);
        cfg.m = Some(16);
        let ens = simulate_euler(b_m, &x0, &cfg)?;
        let mut rows = Vec::new();
        let mut ok = true;
        let mut worst = 0.0f64;
        for r in [0.25, 0.5, 1.0] {
            let rep = expected_drift_integral(&ens, b_k, &cert, (0.0, r))?;
            let steps = (r / self.scale.grid.h_t()).round() as usize;
            let pde = drift_integral_pde(b_m, b_k, (0.0, r), &x0, &self.scale.grid.clone().with_steps(steps))?;
            let tol = 3.0 * rep.stderr + pde.budget;
            let gap = (rep.lhs - pde.value_at_x).abs();
            ok &= gap <= tol && rep.lhs <= pde.sup + pde.budget;
            worst = worst.max(gap / tol);
            rows.push(DriftRow {
                field_id: b_k.id().into(),
                window_start: 0.0,
                window_end: r,
                lhs: rep.lhs,
                stderr: rep.stderr,
                lhs_per_time: rep.lhs / r,
                rhs: rep.rhs,
                pde_value: pde.value_at_x,
                pde_sup: pde.sup,
                budget: pde.budget,
            });
        }
        let per: Vec<f64> = rows.iter().map(|r| r.lhs_per_time).collect();
        let drift = spread(&per);
        Ok(Outcome {
            pass: ok && drift <= 0.2,
            value: worst,
            threshold: "<= 1 (gap / (3 stderr + budget)); per-time spread <= 0.2".into(),
            detail: format!("worst normalized gap; per-time spread {drift:.4}, lhs/(r-s) {per:.4?}"),
            tables: vec![Table::from_rows("drift_integral.csv", &rows)?],
            plots: Vec::new(),
        })
    }

    fn duality(&self) -> Result<Outcome> {
        let b = self.hardy04_at(16)?;
        let x = [0.5, 0.0, 0.0];
        let grid = self.scale.grid.clone();
        let cfg = self.scale.sim(grid.t_end - grid.t_start, self.scale.seed);
        let f = gaussian(vec![0.0; 3], 0.5);
        let g = duality_check(&x, &f, b, &grid, &cfg)?;
        let one = duality_check(&x, &|_: &[f64]| 1.0, b, &grid, &cfg)?;
        let one_err = (one.report.lhs - 1.0).abs().max((one.report.rhs - 1.0).abs());
        let row = |case: &str, d: &crate::sde::DualityReport| DualityRow {
            case: case.into(),
            field_id: d.report.field_id.clone(),
            mc: d.report.lhs,
            stderr: d.report.stderr,
            pde: d.report.rhs,
            gap: d.gap,
            budget: d.budget,
        };
        let norm = g.gap / (3.0 * g.report.stderr + g.budget);
        Ok(Outcome {
            pass: g.pass && one_err <= 1e-3,
            value: norm,
            threshold: "<= 1 (gap / (3 stderr + budget)); f = 1 within 1e-3".into(),
            detail: format!("normalized gap; f = 1 error {one_err:.3e}"),
            tables: vec![Table::from_rows("duality.csv", &[row("gaussian", &g), row("one", &one)])?],
            plots: Vec::new(),
        })
    }

    fn schedule_independence(&self) -> Result<Outcome> {
        let m = 16;
        let harmonic = self.hardy04_at(m)?;
        let raw = hardy(HARDY_DELTA)?;
        let (quadratic, _) = build_approximation(
            &raw,
            &hardy_cert(HARDY_DELTA),
            m,
            &GammaRule::Quadratic { gamma0: 4.0 },
            &self.scale.mollify,
        )?;
        let horizon = 0.5;
        let x0 = [0.0; 3];
        let cfg = self.scale.sim(horizon, self.scale.seed);
        let mut cfg2 = cfg.clone();
        cfg2.seed = self.scale.seed + 1;
        let a = simulate_euler(harmonic, &x0, &cfg)?;
        let b = simulate_euler(&quadratic, &x0, &cfg)?;
        let c = simulate_euler(harmonic, &x0, &cfg2)?;
        let mut rows = Vec::new();
        for t in [horizon / 2.0, horizon] {
            rows.push(KsRow {
                t,
                ks_schedules: marginal_distance(&a, &b, t)?,
                ks_seeds: marginal_distance(&a, &c, t)?,
            });
        }
        let worst = rows.iter().map(|r| r.ks_schedules / r.ks_seeds).fold(0.0, f64::max);
        Ok(Outcome {
            pass: worst <= 2.0,
            value: worst,
            threshold: "<= 2 (KS schedules / KS seeds)".into(),
            detail: format!(
                "worst KS ratio; {}",
                rows.iter()
                    .map(|r| format!("t={} {:.4}/{:.4}", r.t, r.ks_schedules, r.ks_seeds))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            tables: vec![Table::from_rows("schedule_independence.csv", &rows)?],
            plots: Vec::new(),
        })
    }

    fn stickiness(&self) -> Result<Outcome> {
        let m = 64;
        let (radius, horizon) = (0.1, 0.5);
        let cfg_m = MollifyConfig {
            half_width: 1.0,
            cells: 128,
            t_roi: horizon,
            eps_floor: 1e-20,
            eps_max: 1e-3,
            ..self.scale.mollify.clone()
        };
        // coefficient √δ(d−2)/2: subcritical, between, and past the 4(d/(d−2))² threshold
        let deltas = [0.5 / 9.0, 9.0, 1.5 * 36.0];
        let mut rows = Vec::new();
        for delta in deltas {
            let raw = hardy(delta)?;
            let (bm, s) = build_approximation(&raw, &hardy_cert(delta), m, &GammaRule::default(), &cfg_m)?;
            let mut cfg = self.scale.sim(horizon, self.scale.seed);
            cfg.m = Some(m);
            let ens = simulate_euler(&bm, &[0.0; 3], &cfg)?;
            rows.push(OccupationRow {
                delta,
                coefficient: delta.sqrt() / 2.0,
                c_m: s.c_m,
                occupation: occupation_near_origin(&ens, radius, (0.0, horizon))?,
                radius,
                horizon,
                n_paths: self.scale.n_paths,
            });
        }
        let occ: Vec<f64> = rows.iter().map(|r| r.occupation).collect();
        let factor = occ[2] / occ[0];
        let mono = occ.windows(2).all(|w| w[1] > w[0]);
        let table = Table::from_rows("stickiness.csv", &rows)?;
        let plot = super::report::line_plot(
            &table.csv,
            "coefficient",
            &["occupation"],
            "occupation near the origin",
            Axes { log_x: true, log_y: true },
        )?;
        Ok(Outcome {
            pass: factor >= 10.0 && mono,
            value: factor,
            threshold: ">= 10, monotone".into(),
            detail: format!("supercritical / subcritical; occupations {occ:?} monotone {mono}"),
            tables: vec![table],
            plots: vec![("stickiness.svg".into(), plot)],
        })
    }

    fn determinism(&self) -> Result<Outcome> {
        let base = std::env::temp_dir().join(format!("fblab-determinism-{}", std::process::id()));
        let configs = super::determinism_configs();
        let mut compared = 0usize;
        let mut mismatched = Vec::new();
        for (i, cfg) in configs.iter().enumerate() {
            let mut dirs = Vec::new();
            for rep in 0..2 {
                let mut c = cfg.clone();
                let dir = base.join(format!("cfg{i}-run{rep}"));
                c.output_dir = Some(dir.to_string_lossy().into_owned());
                super::run_experiment(&c)?;
                dirs.push(dir);
            }
            for entry in std::fs::read_dir(&dirs[0])? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "csv") {
                    let name = path.file_name().unwrap();
                    let a = std::fs::read(&path)?;
                    let b = std::fs::read(dirs[1].join(name))?;
                    compared += 1;
                    if a != b {
                        mismatched.push(format!("cfg{i}/{}", name.to_string_lossy()));
                    }
                }
            }
        }
        let _ = std::fs::remove_dir_all(&base);
        Ok(Outcome {
            pass: mismatched.is_empty() && compared >= configs.len(),
            value: mismatched.len() as f64,
            threshold: "0 differing CSVs".into(),
            detail: format!("differing CSVs; compared {compared}, differing {mismatched:?}"),
            tables: Vec::new(),
            plots: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip_and_number_in_order() {
        for (i, c) in Criterion::ALL.iter().enumerate() {
            assert_eq!(Criterion::from_name(c.name()), Some(*c));
            assert_eq!(c.number(), i as u32 + 1);
        }
        assert_eq!(Criterion::from_name("nope"), None);
    }

    #[test]
    fn helpers() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0, 1.0]));
        assert!((spread(&[1.0, 1.1, 1.05]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn heat_oracle_passes_on_the_quick_grid() {
        let r = Suite::new(Level::Quick).run(Criterion::HeatOracle);
        assert!(r.pass, "{}", r.line());
        assert!(r.line().starts_with("PASS  1 heat-oracle"));
        assert_eq!(r.tables[0].name, "oracle.csv");
    }

    #[test]
    fn injected_time_step_surfaces_as_failure() {
        let mut scale = Scale::for_level(Level::Quick);
        scale.grid.steps = 2;
        let r = Suite::with_scale(Level::Quick, scale).run(Criterion::HeatOracle);
        assert!(!r.pass);
        assert!(r.detail.contains("error"), "{}", r.detail);
    }
}
