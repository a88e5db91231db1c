//! The six compared estimators behind one call.

use moeaar::classic::{default_lambda_grid, gcv_select, ClassicSolver};
use moeaar::coevolution::{run_moeaar, CycleLog, MoeaarConfig, RunStats};
use moeaar::objectives::PenaltyModel;
use ndarray::{Array1, ArrayView1};
use serde::Serialize;

use crate::config::Method;
use crate::error::{BenchError, Result};
use crate::workbench::Workbench;

/// What the decision maker saw and chose.
#[derive(Debug, Clone, Serialize)]
pub struct DecisionTrace {
    pub roi: usize,
    pub roi_counts: Vec<usize>,
    pub candidates: Vec<usize>,
    pub chosen: usize,
    pub knee: (f64, f64),
    /// Objective vectors of the final known front.
    pub front: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum Trace {
    Classic { lambda: f64, gcv_curve: Vec<(f64, f64)>, converged: bool, jittered: bool },
    Moeaar { decision: DecisionTrace, telemetry: Vec<CycleLog<f64>>, stats: RunStats },
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub j: Array1<f64>,
    pub trace: Trace,
}

pub fn moeaar_config(bench: &Workbench, method: Method, seed: u64) -> Result<MoeaarConfig<f64>> {
    let name = method.penalty_name().ok_or_else(|| BenchError::Usage(format!("{method} is not an evolutionary method")))?;
    let penalty = PenaltyModel::from_name(name, bench.laplacian.clone())?;
    let s = &bench.config.moeaar;
    let mut c = MoeaarConfig::new(penalty, seed);
    c.iterations = s.iterations;
    c.crossover_fraction = s.crossover_fraction;
    c.mutation_fraction = s.mutation_fraction;
    c.sigma0_factor = s.sigma0_factor;
    c.clamp_factor = s.clamp_factor;
    c.local_search = s.local_search;
    c.lsts_max_iter = s.lsts_max_iter;
    c.lsts_tol = s.lsts_tol;
    c.lambda_rule = s.lambda_rule.into();
    c.inject_context = s.inject_context;
    c.lsts_roi_free = s.lsts_roi_free;
    c.validate()?;
    Ok(c)
}

/// Runs `method` on the recording `v`; `seed` drives the evolutionary methods.
pub fn estimate(bench: &Workbench, method: Method, v: ArrayView1<f64>, seed: u64) -> Result<Estimate> {
    let k = bench.leadfield.matrix().view();
    let cc = &bench.config.classic;
    let classic = |solver: ClassicSolver<'_, f64>| -> Result<Estimate> {
        let grid = default_lambda_grid(k, v, cc.grid_size);
        let sol = gcv_select(solver, k, v, &grid)?;
        let (lambda, _) = sol.gcv_curve.iter().copied().find(|&(l, _)| Some(&l) == sol.lambdas.first()).unwrap_or((f64::NAN, f64::NAN));
        Ok(Estimate {
            j: sol.j.values,
            trace: Trace::Classic { lambda, gcv_curve: sol.gcv_curve, converged: sol.converged, jittered: sol.jittered },
        })
    };
    match method {
        Method::RidgeL => classic(ClassicSolver::RidgeL { lap: &bench.laplacian }),
        Method::Lasso => classic(ClassicSolver::Lasso { tol: cc.tol, max_iter: cc.max_iter }),
        Method::EnetL => classic(ClassicSolver::EnetL {
            lap: &bench.laplacian,
            l2_ratio: cc.enet_l2_ratio,
            tol: cc.tol,
            max_iter: cc.max_iter,
        }),
        Method::MoeaarL0 | Method::MoeaarL1 | Method::MoeaarL2 => {
            let config = moeaar_config(bench, method, seed)?;
            let run = run_moeaar(k, v, &bench.space, &config)?;
            let decision = DecisionTrace {
                roi: run.decision.roi,
                roi_counts: run.decision.counts.clone(),
                candidates: run.decision.candidates.clone(),
                chosen: run.decision.index,
                knee: run.decision.knee,
                front: run.archive.iter().map(|o| o.0.clone()).collect(),
            };
            Ok(Estimate { j: run.solution.coeffs, trace: Trace::Moeaar { decision, telemetry: run.telemetry, stats: run.stats } })
        }
    }
}
