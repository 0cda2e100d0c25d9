//! Config dispatch and run manifests.

use super::config::{ExperimentKind, LoadedConfig};
use super::criteria::{self, Context};
use crate::error::{Error, Result};
use crate::estimates::{self, EstimateOptions};
use crate::evolution::{self, CalibratedConstants, CalibrationOptions, TrackOptions};
use crate::kernels::{check_conditions, SamplingPlan};
use crate::nonlinear::{self, NonlinearOptions, NonlinearProblem, Phi, PhiHolder};
use crate::nonlocal_op::{self, verify_mean_zero};
use crate::solver::{self, SolveOptions};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub name: Option<String>,
    pub seed: u64,
    pub wall_time: f64,
    pub stages: Vec<Stage>,
    pub pass: bool,
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

struct Recorder {
    out: PathBuf,
    stages: Vec<Stage>,
    files: Vec<PathBuf>,
    summary: Vec<String>,
    pass: bool,
}

impl Recorder {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.stages.push(Stage { name: name.into(), seconds: t.elapsed().as_secs_f64() });
        r
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.files.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, serde_json::to_vec_pretty(v)?)?;
        Ok(())
    }

    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.summary.push(format!("{} {line}", if ok { "pass" } else { "FAIL" }));
    }
}

/// Output directory: `out` if given, else the config's `output_dir`, else
/// `./nlh-out`.
pub fn output_dir(cfg: &LoadedConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| cfg.config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("nlh-out"))
}

/// Runs the experiment, writes its outputs and `manifest.json` under `out`.
pub fn run(cfg: &LoadedConfig, out: &Path, seed: Option<u64>) -> Result<RunManifest> {
    let t0 = Instant::now();
    std::fs::create_dir_all(out)?;
    let seed = seed.unwrap_or_else(|| cfg.seed());
    let mut rec = Recorder { out: out.to_path_buf(), stages: Vec::new(), files: Vec::new(), summary: Vec::new(), pass: true };
    dispatch(cfg, seed, &mut rec)?;
    let manifest_path = out.join("manifest.json");
    rec.files.push(manifest_path.clone());
    let m = RunManifest {
        config_hash: cfg.hash.clone(),
        version: ARTIFACT_VERSION.into(),
        experiment: cfg.config.experiment,
        name: cfg.config.name.clone(),
        seed,
        wall_time: t0.elapsed().as_secs_f64(),
        stages: rec.stages,
        pass: rec.pass,
        summary: rec.summary,
        files: rec.files,
    };
    m.write_json(&manifest_path)?;
    Ok(m)
}

fn nonlinear_problem(cfg: &LoadedConfig) -> Result<NonlinearProblem> {
    let spec = cfg.config.problem.as_ref().ok_or_else(|| Error::Config { path: "problem".into(), msg: "required for this experiment".into() })?;
    let phi = Phi::from_exprs(&spec.phi.phi, &spec.phi.d1, &spec.phi.d2).map_err(|e| Error::Config { path: "problem.phi".into(), msg: e.to_string() })?;
    let holder_phi = match (spec.phi.holder_nu, spec.phi.holder_seminorm) {
        (Some(nu), Some(seminorm)) => Some(PhiHolder { nu, seminorm }),
        (None, None) => None,
        _ => return Err(Error::Config { path: "problem.phi".into(), msg: "holder_nu and holder_seminorm go together".into() }),
    };
    Ok(NonlinearProblem { phi, g: cfg.kernel()?, lambda: spec.lambda, holder_phi, theta0: cfg.initial()? })
}

fn dispatch(cfg: &LoadedConfig, seed: u64, rec: &mut Recorder) -> Result<()> {
    let c = &cfg.config;
    match c.experiment {
        ExperimentKind::CheckKernel => {
            let k = cfg.kernel()?;
            let (radius, h) = c.grid.map(|g| (g.radius, 2.0 * g.radius / g.n_points as f64)).unwrap_or((8.0, 1.0 / 16.0));
            let t_max = c.time.map(|t| t.t_end).unwrap_or(k.t_max);
            let plan = SamplingPlan::default_for(k.dim(), radius, h, t_max);
            let rep = rec.stage("check_conditions", || check_conditions(&k, &plan))?;
            rec.json("condition_report.json", &rep)?;
            rec.check(rep.pass(), format!("kernel {} conditions (symmetry defect {:.1e})", k.name, rep.symmetry_max_defect));
        }
        ExperimentKind::OperatorTest => {
            let k = cfg.kernel()?;
            let f = cfg.initial()?;
            let t = c.time.map(|t| t.t_end).unwrap_or(0.0);
            let out = rec.stage("apply", || nonlocal_op::apply(&k, &f, t))?;
            out.write_csv(&rec.path("operator.csv"))?;
            let mz = rec.stage("mean_zero", || verify_mean_zero(&k, &f, t))?;
            rec.json("mean_zero.json", &mz)?;
            rec.check(out.values.values.iter().all(|v| v.is_finite()), "operator values finite".into());
            rec.check(mz.residual <= 1e-6, format!("mean-zero residual {:.1e}", mz.residual));
        }
        ExperimentKind::SolveLinear => {
            let k = cfg.kernel()?;
            let w0 = cfg.initial()?;
            let time = cfg.time()?;
            let opts = SolveOptions { dt: time.dt.0, snapshot_stride: time.snapshot_stride.unwrap_or(1), holder_beta: c.beta, ..SolveOptions::default() };
            let tr = rec.stage("solve", || solver::solve_with(&k, &w0, time.t_end, &opts))?;
            let (a, b, f) = (rec.path("norms.csv"), rec.path("steps.csv"), rec.path("frames.bin"));
            rec.stage("write", || {
                tr.write_norms_csv(&a)?;
                tr.write_steps_csv(&b)?;
                tr.write_frames(&f)
            })?;
            let mp = solver::verify_max_principle(&tr);
            rec.check(mp.pass, format!("maximum principle excess {:.1e}", mp.max_excess));
            for p in [solver::Lp::One, solver::Lp::Two] {
                let r = solver::verify_lp_monotone(&tr, p);
                rec.check(r.pass, format!("{} monotonicity defect {:.1e} (tolerance {:.1e})", if p == solver::Lp::One { "L1" } else { "L2" }, r.max_defect, r.tolerance));
            }
        }
        ExperimentKind::SolveNonlinear => {
            let p = nonlinear_problem(cfg)?;
            let time = cfg.time()?;
            let v = p.validate()?;
            rec.json("problem_report.json", &v)?;
            rec.check(v.pass, "problem hypotheses".into());
            let opts = NonlinearOptions { dt: time.dt.0, holder_beta: c.beta, ..NonlinearOptions::default() };
            let tr = rec.stage("solve", || nonlinear::solve_nonlinear(&p, time.t_end, &opts))?;
            tr.write_norms_csv(&rec.path("gradient_norms.csv"))?;
            solver::write_frames(&rec.path("frames.bin"), &tr.frames, tr.dt)?;
            if p.holder_phi.is_some() {
                let (k, _) = nonlinear::induced_kernel(&tr, &p)?;
                let cert = rec.stage("certify", || nonlinear::certify_induced(&k, p.theta0.grid))?;
                rec.json("induced_certificate.json", &cert)?;
                rec.check(cert.pass, format!("induced kernel certified (symmetry defect {:.1e})", cert.symmetry_defect));
            }
            rec.summary.push(format!("info grad Linf growth {:.1e}", tr.grad_monotone_defect));
        }
        ExperimentKind::Calibrate => {
            let k = cfg.kernel()?;
            let grid = cfg.grid()?;
            let ens = c.ensemble.as_ref().ok_or_else(|| Error::Config { path: "ensemble".into(), msg: "required for calibrate".into() })?;
            let gamma = k.params.gamma;
            let plan = crate::nonlocal_op::PlanOptions { fft: Some(true), ..Default::default() };
            let members = evolution::double_bump_ensemble(grid, &ens.radii, ens.count, gamma, seed ^ ens.seed)?;
            let (cc, _) = rec.stage("calibrate", || evolution::calibrate(&k, &members, gamma, &CalibrationOptions { plan, ..Default::default() }))?;
            cc.write_json(&rec.path("constants.json"))?;
            rec.json("invariants.json", &cc.invariants())?;
            rec.check(cc.invariants_hold(), format!("algebraic invariants (A {:.3}, beta {:.4}, L {:.3}, delta {:.3})", cc.a, cc.beta, cc.l, cc.delta));
            if let Some(count) = ens.heldout_count {
                let held = evolution::double_bump_ensemble(grid, &ens.radii, count, gamma, seed ^ ens.heldout_seed.unwrap_or(ens.seed + 1))?;
                track_members(&k, &held, &cc, c.slack.unwrap_or(0.05), plan, rec)?;
            }
        }
        ExperimentKind::TrackEvolution => {
            let path = cfg.constants_path().ok_or_else(|| Error::Config { path: "constants_file".into(), msg: "required for track-evolution".into() })?;
            let cc: CalibratedConstants = serde_json::from_slice(&std::fs::read(&path)?)?;
            let k = cfg.kernel()?;
            let grid = cfg.grid()?;
            let ens = c.ensemble.as_ref().ok_or_else(|| Error::Config { path: "ensemble".into(), msg: "required for track-evolution".into() })?;
            let plan = crate::nonlocal_op::PlanOptions { fft: Some(true), ..Default::default() };
            let members = evolution::double_bump_ensemble(grid, &ens.radii, ens.count, cc.gamma, seed ^ ens.seed)?;
            let slack = c.slack.unwrap_or(0.05);
            match c.time {
                None => track_members(&k, &members, &cc, slack, plan, rec)?,
                Some(t) => {
                    let opts = TrackOptions { slack, plan, ..Default::default() };
                    for (i, m) in members.iter().enumerate() {
                        let r = rec.stage(&format!("member {i}"), || evolution::track_long_time(&k, &m.phi0, m.r, &cc, t.t_end, &opts))?;
                        rec.json(&format!("long_time_{i:02}.json"), &r)?;
                        rec.check(r.pass_membership, format!("member {i} (r = {}) long-time worst ratio {:.4}", m.r, r.worst_ratio));
                    }
                }
            }
        }
        ExperimentKind::VerifyEstimates => {
            let k = cfg.kernel()?;
            let w0 = cfg.initial()?;
            let beta = c.beta.ok_or_else(|| Error::Config { path: "beta".into(), msg: "required for verify-estimates".into() })?;
            let horizons = c.horizons.clone().unwrap_or_else(|| vec![1.0, 4.0, 16.0]);
            let r = rec.stage("persistence", || estimates::persistence_experiment(&k, &w0, &horizons, beta, &EstimateOptions::default()))?;
            r.write_csv(&rec.path("persistence.csv"))?;
            rec.json("persistence.json", &r)?;
            rec.check(r.pass, format!("persistence across {:?}: {}", horizons, r.note));
        }
        ExperimentKind::Criterion => {
            let id = c.criterion.unwrap_or(0);
            let ctx = Context { out: Some(rec.out.clone()), seed };
            let o = rec.stage(&format!("criterion {id}"), || Ok(criteria::run_one(id, &ctx)))?;
            rec.files.extend(o.files.iter().cloned());
            rec.json(&format!("criterion_{id}.json"), &o)?;
            rec.check(o.pass, o.line());
        }
    }
    Ok(())
}

fn track_members(
    k: &crate::kernels::Kernel,
    members: &[evolution::Member],
    cc: &CalibratedConstants,
    slack: f64,
    plan: crate::nonlocal_op::PlanOptions,
    rec: &mut Recorder,
) -> Result<()> {
    let opts = TrackOptions { slack, plan, ..Default::default() };
    for (i, m) in members.iter().enumerate() {
        let r = rec.stage(&format!("track {i}"), || evolution::track_short_time(k, &m.phi0, m.r, cc, &opts))?;
        r.write_csv(&rec.path(&format!("track_{i:02}.csv")))?;
        rec.check(r.pass, format!("member {i} (r = {}) worst factor/envelope {:.4}", m.r, r.worst_ratio));
    }
    Ok(())
}
