//! Relative-pose estimation between consecutive surface-point sets by
//! minimizing a Huber-robustified point-to-line distance.
//!
//! The solver alternates data association and quasi-Newton descent: fix the
//! correspondences found at the current pose iterate, run BFGS with a
//! backtracking line search on (dx, dy, dtheta) to convergence, re-associate,
//! and stop once the pose iterate settles.

use crate::geometry::{rotation_from_yaw, RelativePose};
use crate::pipeline::{OdometryConfig, SurfaceRepresentation};
use crate::spatial::SpatialGrid;
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// Pairing of a current surface point with its predecessor-scan neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Correspondence {
    pub src_index: usize,
    pub dst_index: usize,
}

/// Outcome of one scan-pair registration.
#[derive(Debug, Clone, Copy)]
pub struct RegistrationResult {
    pub estimated: RelativePose,
    pub final_cost: f64,
    pub iterations: usize,
    pub correspondences_used: usize,
    pub converged: bool,
}

/// Huber loss: a^2/2 inside the delta band, delta(|a| - delta/2) outside.
pub fn huber(a: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    let abs = a.abs();
    if abs <= delta {
        0.5 * a * a
    } else {
        delta * (abs - 0.5 * delta)
    }
}

/// Derivative of the Huber loss.
pub fn huber_derivative(a: f64, delta: f64) -> f64 {
    if a.abs() <= delta {
        a
    } else {
        delta * a.signum()
    }
}

/// Finds, for each current point transformed by `guess`, the closest previous
/// point within the search radius whose normal agrees within the angle
/// tolerance. At most one pair per source point.
pub fn find_correspondences(
    cur: &SurfaceRepresentation,
    prev: &SurfaceRepresentation,
    guess: &RelativePose,
    cfg: &OdometryConfig,
) -> Vec<Correspondence> {
    if prev.is_empty() || cur.is_empty() {
        return Vec::new();
    }
    let prev_points: Vec<Vector2<f64>> = prev.items.iter().map(|s| s.mu).collect();
    let grid = SpatialGrid::build(&prev_points, cfg.cell_side);
    let rot = rotation_from_yaw(guess.dtheta);
    let t = guess.translation();
    let cos_tol = cfg.angle_tolerance.cos();
    let mut pairs = Vec::new();
    for (i, sp) in cur.items.iter().enumerate() {
        let p = rot * sp.mu + t;
        let n = rot * sp.normal;
        // closest candidate whose normal passes the angle gate
        let mut best: Option<(f64, usize)> = None;
        for j in grid.within(&p, cfg.cell_side) {
            let cand = &prev.items[j as usize];
            if n.dot(&cand.normal) < cos_tol {
                continue;
            }
            let d2 = (cand.mu - p).norm_squared();
            if best.is_none_or(|(bd2, _)| d2 < bd2) {
                best = Some((d2, j as usize));
            }
        }
        if let Some((_, j)) = best {
            pairs.push(Correspondence {
                src_index: i,
                dst_index: j,
            });
        }
    }
    pairs
}

/// Point-to-line objective: sum of Huber losses of the normal-projected
/// residuals over the fixed pairs. Empty pair sets cost +infinity.
pub fn p2l_cost(
    delta_pose: &RelativePose,
    pairs: &[Correspondence],
    cur: &SurfaceRepresentation,
    prev: &SurfaceRepresentation,
    cfg: &OdometryConfig,
) -> f64 {
    if pairs.is_empty() {
        return f64::INFINITY;
    }
    let rot = rotation_from_yaw(delta_pose.dtheta);
    let t = delta_pose.translation();
    pairs
        .iter()
        .map(|c| {
            let mu_i = cur.items[c.src_index].mu;
            let pp = &prev.items[c.dst_index];
            let r = pp.normal.dot(&(rot * mu_i + t - pp.mu));
            huber(r, cfg.huber_delta)
        })
        .sum()
}

fn cost_and_gradient(
    params: &Vector3<f64>,
    pairs: &[Correspondence],
    cur: &SurfaceRepresentation,
    prev: &SurfaceRepresentation,
    cfg: &OdometryConfig,
) -> (f64, Vector3<f64>) {
    let rot = rotation_from_yaw(params.z);
    // d(rot)/d(theta)
    let (s, c) = params.z.sin_cos();
    let drot = Matrix2::new(-s, -c, c, -s);
    let t = Vector2::new(params.x, params.y);
    let mut cost = 0.0;
    let mut grad = Vector3::zeros();
    for pair in pairs {
        let mu_i = cur.items[pair.src_index].mu;
        let pp = &prev.items[pair.dst_index];
        let r = pp.normal.dot(&(rot * mu_i + t - pp.mu));
        cost += huber(r, cfg.huber_delta);
        let w = huber_derivative(r, cfg.huber_delta);
        grad.x += w * pp.normal.x;
        grad.y += w * pp.normal.y;
        grad.z += w * pp.normal.dot(&(drot * mu_i));
    }
    (cost, grad)
}

/// Analytic gradient of `p2l_cost` at a pose, exposed for testing against
/// finite differences.
pub fn p2l_gradient(
    delta_pose: &RelativePose,
    pairs: &[Correspondence],
    cur: &SurfaceRepresentation,
    prev: &SurfaceRepresentation,
    cfg: &OdometryConfig,
) -> Vector3<f64> {
    let p = Vector3::new(delta_pose.dx, delta_pose.dy, delta_pose.dtheta);
    cost_and_gradient(&p, pairs, cur, prev, cfg).1
}

/// BFGS with backtracking line search on a fixed correspondence set.
/// Returns the minimizing parameters, final cost and gradient norm.
fn bfgs_fixed_pairs(
    start: Vector3<f64>,
    pairs: &[Correspondence],
    cur: &SurfaceRepresentation,
    prev: &SurfaceRepresentation,
    cfg: &OdometryConfig,
) -> (Vector3<f64>, f64, f64) {
    const MAX_ITERS: usize = 40;
    const GRAD_TOL: f64 = 1e-10;
    const STEP_TOL: f64 = 1e-12;

    let mut x = start;
    let (mut fx, mut gx) = cost_and_gradient(&x, pairs, cur, prev, cfg);
    let mut h_inv = Matrix3::identity();

    for _ in 0..MAX_ITERS {
        if gx.norm() <= GRAD_TOL {
            break;
        }
        let mut dir = -(h_inv * gx);
        if dir.dot(&gx) >= 0.0 {
            // not a descent direction; restart from steepest descent
            h_inv = Matrix3::identity();
            dir = -gx;
        }
        // backtracking Armijo line search
        let mut step = 1.0;
        let slope = gx.dot(&dir);
        let mut accepted = None;
        for _ in 0..40 {
            let cand = x + step * dir;
            let (fc, gc) = cost_and_gradient(&cand, pairs, cur, prev, cfg);
            if fc <= fx + 1e-4 * step * slope {
                accepted = Some((cand, fc, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            break; // no acceptable step along this direction
        };
        let s = x_new - x;
        let y = g_new - gx;
        let sy = s.dot(&y);
        if sy > 1e-14 {
            // BFGS inverse-Hessian update
            let rho = 1.0 / sy;
            let i = Matrix3::identity();
            let left = i - rho * s * y.transpose();
            h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
        }
        let moved = s.norm();
        x = x_new;
        fx = f_new;
        gx = g_new;
        if moved <= STEP_TOL {
            break;
        }
    }
    (x, fx, gx.norm())
}

/// Registers the current representation against the previous one starting
/// from a motion prior. On success the estimate `d` satisfies
/// `T_cur = T_prev * d`. With fewer than the configured minimum of
/// correspondences at the prior the result carries the prior itself and
/// `converged = false`.
pub fn register(
    prev: &SurfaceRepresentation,
    cur: &SurfaceRepresentation,
    motion_prior: &RelativePose,
    cfg: &OdometryConfig,
) -> RegistrationResult {
    const MAX_OUTER: usize = 50;
    const POSE_TOL: f64 = 1e-6;

    let prior_pairs = find_correspondences(cur, prev, motion_prior, cfg);
    if prior_pairs.len() < cfg.min_correspondences {
        return RegistrationResult {
            estimated: *motion_prior,
            final_cost: f64::INFINITY,
            iterations: 0,
            correspondences_used: prior_pairs.len(),
            converged: false,
        };
    }
    let prior_cost = p2l_cost(motion_prior, &prior_pairs, cur, prev, cfg);

    let mut x = Vector3::new(motion_prior.dx, motion_prior.dy, motion_prior.dtheta);
    let mut pairs = prior_pairs;
    let mut outer = 0;
    let mut grad_norm = f64::INFINITY;
    let mut settled = false;
    for _ in 0..MAX_OUTER {
        outer += 1;
        let (x_new, _, g_norm) = bfgs_fixed_pairs(x, &pairs, cur, prev, cfg);
        let moved = (x_new - x).norm();
        x = x_new;
        grad_norm = g_norm;
        let pose = RelativePose::new(x.x, x.y, x.z);
        let new_pairs = find_correspondences(cur, prev, &pose, cfg);
        if new_pairs.len() >= cfg.min_correspondences {
            pairs = new_pairs;
        }
        if moved < POSE_TOL {
            settled = true;
            break;
        }
    }

    let candidate = RelativePose::new(x.x, x.y, x.z);
    let candidate_cost = p2l_cost(&candidate, &pairs, cur, prev, cfg);
    // monotone acceptance: never hand back something worse than the prior
    if candidate_cost <= prior_cost {
        // gradient tolerance scales with the pair count (each linear-branch
        // residual contributes up to huber_delta to the gradient)
        let grad_tol = 1e-5 * (1.0 + pairs.len() as f64);
        RegistrationResult {
            estimated: candidate,
            final_cost: candidate_cost,
            iterations: outer,
            correspondences_used: pairs.len(),
            converged: settled && grad_norm <= grad_tol,
        }
    } else {
        RegistrationResult {
            estimated: *motion_prior,
            final_cost: prior_cost,
            iterations: outer,
            correspondences_used: pairs.len(),
            converged: false,
        }
    }
}
