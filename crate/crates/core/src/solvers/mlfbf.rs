use super::{prox_quadratic_in_place, ConstraintMode, Monitor, ProblemInstance, SolverConfig, SolverTrace, Step};
use crate::error::{Error, Result};
use crate::image::MultiComponentImage;
use crate::operators::{operator_norm, LinearOperator, TensorField};
use crate::projections::{project_box, project_d_direct};

/// `θ = √(‖A‖² + max{‖Φ‖², 1})` from inflated power-iteration estimates.
pub(crate) fn step_bound(problem: &ProblemInstance, cfg: &SolverConfig) -> f64 {
    let na = operator_norm(problem.degradation(), cfg.norm_tol, cfg.norm_max_iter, cfg.seed).bound();
    let nphi = operator_norm(problem.analysis(), cfg.norm_tol, cfg.norm_max_iter, cfg.seed.wrapping_add(1)).bound();
    (na * na + (nphi * nphi).max(1.0)).sqrt()
}

fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// M+LFBF with constant step `γ = (1 − ε)/θ`.
///
/// Returns the last `p = P_C(x̂)`, which lies in the box exactly.
pub fn mlfbf_solve(problem: &ProblemInstance, cfg: &SolverConfig) -> Result<(MultiComponentImage, SolverTrace)> {
    let mut monitor = Monitor::new(problem, cfg)?;
    let theta = step_bound(problem, cfg);
    if cfg.epsilon >= 1.0 / (theta + 1.0) {
        return Err(Error::Config(format!(
            "epsilon {} must be below 1/(θ+1) = {:.6} for θ = {theta:.6}",
            cfg.epsilon,
            1.0 / (theta + 1.0)
        )));
    }
    let gamma = (1.0 - cfg.epsilon) / theta;
    debug_assert!(gamma >= cfg.epsilon && gamma <= (1.0 - cfg.epsilon) / theta);
    monitor.set_step(gamma);

    let (a, phi) = (problem.degradation(), problem.analysis());
    let z = problem.observation();
    let bounds = problem.constraint().bounds();
    let eta = problem.constraint().eta();
    let cols = phi.dims().components;
    let offsets = phi.offsets().clone();
    let epi = cfg.mode == ConstraintMode::Epigraphical;
    let aux = problem.auxiliary()?;

    let (nx, ny, nz) = (phi.input_len(), phi.output_len(), a.output_len());
    let mut x = problem.initial_point();
    let mut zeta = if epi {
        aux.norms(&TensorField::from_data(offsets.clone(), cols, phi.apply_vec(&x)))?
    } else {
        Vec::new()
    };
    let nl = zeta.len();
    let mut y1 = vec![0.0; ny];
    let mut nu = vec![0.0; nl];
    let mut y2 = vec![0.0; nz];

    let mut xhat = vec![0.0; nx];
    let mut p = vec![0.0; nx];
    let mut diff = vec![0.0; nx];
    let mut back = vec![0.0; nx];
    let mut back2 = vec![0.0; nx];
    let mut xnew = vec![0.0; nx];
    let mut phix = vec![0.0; ny];
    let mut ytil = vec![0.0; ny];
    let mut scaled = vec![0.0; ny];
    let mut ax = vec![0.0; nz];
    let mut y2til = vec![0.0; nz];
    let mut zhat = vec![0.0; nl];
    let mut rho = vec![0.0; nl];
    let mut nutil = vec![0.0; nl];
    let mut zscaled = vec![0.0; nl];

    let mut converged = false;
    for iter in 1..=cfg.max_iter {
        // primal forward step and projections onto C and W
        phi.adjoint_into(&y1, &mut back);
        a.adjoint_into(&y2, &mut back2);
        for i in 0..nx {
            xhat[i] = x[i] - gamma * (back[i] + back2[i]);
        }
        p.copy_from_slice(&xhat);
        project_box(&mut p, bounds.lo(), bounds.hi());
        for i in 0..nl {
            zhat[i] = zeta[i] - gamma * nu[i];
        }
        rho.copy_from_slice(&zhat);
        if epi {
            aux.project_halfspace(&mut rho, eta);
        }

        // dual step on (Φx, ζ) through P_E or P_D
        phi.apply_into(&x, &mut phix);
        for i in 0..ny {
            ytil[i] = y1[i] + gamma * phix[i];
            scaled[i] = ytil[i] / gamma;
        }
        for i in 0..nl {
            nutil[i] = nu[i] + gamma * zeta[i];
            zscaled[i] = nutil[i] / gamma;
        }
        let mut field = TensorField::from_data(offsets.clone(), cols, std::mem::take(&mut scaled));
        if epi {
            aux.project_epigraphs(&mut field, &mut zscaled)?;
        } else {
            project_d_direct(&mut field, phi.coupling(), problem.constraint())?;
        }
        scaled = field.into_data();
        axpy(&mut ytil, -gamma, &scaled);
        axpy(&mut nutil, -gamma, &zscaled);

        // dual step on Ax through the prox of f/γ
        a.apply_into(&x, &mut ax);
        for i in 0..nz {
            y2til[i] = (y2[i] + gamma * ax[i]) / gamma;
        }
        prox_quadratic_in_place(&mut y2til, z, 1.0 / gamma);
        for i in 0..nz {
            y2til[i] = y2[i] + gamma * ax[i] - gamma * y2til[i];
        }

        // correction: dual updates with the primal displacement
        for i in 0..nx {
            diff[i] = p[i] - x[i];
        }
        phi.apply_into(&diff, &mut phix);
        for i in 0..ny {
            y1[i] = ytil[i] + gamma * phix[i];
        }
        for i in 0..nl {
            nu[i] = nutil[i] + gamma * (rho[i] - zeta[i]);
        }
        a.apply_into(&diff, &mut ax);
        for i in 0..nz {
            y2[i] = y2til[i] + gamma * ax[i];
        }

        // primal correction
        phi.adjoint_into(&ytil, &mut back);
        a.adjoint_into(&y2til, &mut back2);
        for i in 0..nx {
            let xtil = p[i] - gamma * (back[i] + back2[i]);
            xnew[i] = x[i] - xhat[i] + xtil;
        }
        for i in 0..nl {
            let ztil = rho[i] - gamma * nutil[i];
            zeta[i] = zeta[i] - zhat[i] + ztil;
        }

        let step = monitor.observe(iter, &x, &xnew, &p)?;
        std::mem::swap(&mut x, &mut xnew);
        if let Step::Converged = step {
            converged = true;
            break;
        }
    }
    monitor.finish(converged, p)
}
