use nalgebra::{DMatrix, DVector};

use super::cost::{edge_cost, free_mask, EdgeCost, Params, N_PARAMS};
use super::{CalibError, CalibProblem, Stage};
use crate::formats::StageReportDoc;

/// Levenberg–Marquardt over the stage's free parameter blocks.
///
/// Damping starts at 1e-3, grows 10x on a rejected step and shrinks 2x on an
/// accepted one; a step is accepted only on strict cost decrease. Terminates
/// on relative cost decrease < 1e-8, proposed step norm < 1e-10, or
/// `max_iters`.
pub fn lm_minimize(
    problem: &CalibProblem,
    stage: &Stage,
    start: Params,
) -> Result<(Params, StageReportDoc), CalibError> {
    let mask = free_mask(&stage.free_params);
    let free_idx: Vec<usize> = (0..N_PARAMS).filter(|&i| mask[i]).collect();
    let m = free_idx.len();

    let mut params = start;
    let mut current = edge_cost(
        &params.intr,
        &params.extr,
        problem,
        stage.pyramid_level,
        stage.huber_delta,
    )?;
    let mut cost_history = vec![current.cost];
    let mut lambda = 1e-3;
    let mut accepted_steps = 0usize;
    let mut iterations = 0usize;
    let mut termination = "max_iters".to_string();

    for _ in 0..stage.max_iters {
        iterations += 1;
        let (h, g) = normal_equations(problem, &current, &free_idx, stage.huber_delta);

        // damp the diagonal multiplicatively (Marquardt scaling)
        let mut damped = h.clone();
        for i in 0..m {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let step_free = match damped.cholesky() {
            Some(chol) => chol.solve(&(-&g)),
            None => {
                lambda *= 10.0;
                continue;
            }
        };

        if step_free.norm() < 1e-10 {
            termination = "step_norm".to_string();
            break;
        }

        let mut delta = [0.0; N_PARAMS];
        for (k, &i) in free_idx.iter().enumerate() {
            delta[i] = step_free[k];
        }
        let candidate = match params.apply_step(&delta) {
            Ok(p) => p,
            Err(_) => {
                lambda *= 10.0;
                continue;
            }
        };
        let cand_cost = match edge_cost(
            &candidate.intr,
            &candidate.extr,
            problem,
            stage.pyramid_level,
            stage.huber_delta,
        ) {
            Ok(ec) => ec,
            // a trial step that throws every point out of view is a rejection,
            // not a terminal failure
            Err(CalibError::NoValidProjections) => {
                lambda *= 10.0;
                continue;
            }
            Err(e) => return Err(e),
        };

        if cand_cost.cost < current.cost {
            let rel = (current.cost - cand_cost.cost) / current.cost.max(f64::MIN_POSITIVE);
            params = candidate;
            current = cand_cost;
            cost_history.push(current.cost);
            accepted_steps += 1;
            lambda *= 0.5;
            if rel < 1e-8 {
                termination = "relative_decrease".to_string();
                break;
            }
        } else {
            lambda *= 10.0;
        }
    }

    let report = StageReportDoc {
        pyramid_level: stage.pyramid_level,
        free_params: stage.free_params.clone(),
        cost_history,
        iterations,
        accepted_steps,
        termination,
    };
    Ok((params, report))
}

/// Gauss-Newton normal equations of the robustified cost, restricted to the
/// free columns. The stored Jacobian rows differentiate w_i * D_i, while the
/// cost term is w_i * huber(D_i); the IRLS factor huber'(D)/(D * w_i) makes
/// the gradient exact and the Hessian the usual robust approximation.
fn normal_equations(
    problem: &CalibProblem,
    ec: &EdgeCost,
    free_idx: &[usize],
    delta: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let m = free_idx.len();
    let mut h = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    let mut row = vec![0.0; m];
    for (i, &valid) in ec.valid_mask.iter().enumerate() {
        if !valid {
            continue;
        }
        let w = problem.lidar_edges[i].1;
        if w <= 0.0 {
            continue;
        }
        let d = ec.residuals[i] / w;
        let irls = if d > delta { delta / d } else { 1.0 } / w;
        for (k, &c) in free_idx.iter().enumerate() {
            row[k] = ec.jacobian[(i, c)];
        }
        for a in 0..m {
            g[a] += irls * row[a] * ec.residuals[i];
            for b in a..m {
                h[(a, b)] += irls * row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    (h, g)
}
