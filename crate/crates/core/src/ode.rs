//! Adaptive Runge-Kutta-Fehlberg 4(5) integrator.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            h_init: 1e-2,
            h_min: 1e-10,
            h_max: 1.0,
            max_steps: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::input("solver tolerances must be positive"));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return Err(Error::input(format!(
                "step sizes must satisfy 0 < h_min <= h_init <= h_max, got {} / {} / {}",
                self.h_min, self.h_init, self.h_max
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::input("max_steps must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxSteps,
    StepUnderflow,
}

/// Accepted states of one integration, starting with the initial state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub times: Vec<f64>,
    pub terminated: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// An initial value problem `y' = f(y)`. The stop test sees each accepted
/// state together with its derivative; `t_end` additionally stops the
/// integration exactly at that time.
pub struct IvpProblem<F, S> {
    pub vector_field: F,
    pub initial_state: DVector<f64>,
    pub stop_test: S,
    pub t_end: Option<f64>,
    pub config: SolverConfig,
}

// Fehlberg tableau. The fields are autonomous, so the stage times are not needed.
const A: [[f64; 5]; 6] = [
    [0.0; 5],
    [1.0 / 4.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 32.0, 9.0 / 32.0, 0.0, 0.0, 0.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0, 0.0, 0.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0, 0.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
];
const B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];
const B5: [f64; 6] = [
    16.0 / 135.0,
    0.0,
    6656.0 / 12825.0,
    28561.0 / 56430.0,
    -9.0 / 50.0,
    2.0 / 55.0,
];

fn eval<F>(f: &mut F, y: &DVector<f64>) -> Result<DVector<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let dy = f(y)?;
    if dy.len() != y.len() || dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "vector field returned a non-finite derivative",
            y.as_slice(),
        ));
    }
    Ok(dy)
}

/// Integrates the problem with the Fehlberg pair. The step error is
/// `|y5 - y4|`, a step is accepted when it is below
/// `abs_tol + rel_tol * |y|`, and the fifth-order solution is propagated.
pub fn integrate<F, S>(problem: IvpProblem<F, S>) -> Result<Trajectory>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    S: FnMut(&DVector<f64>, &DVector<f64>) -> bool,
{
    let IvpProblem {
        mut vector_field,
        initial_state,
        mut stop_test,
        t_end,
        config,
    } = problem;
    config.validate()?;
    if initial_state.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite initial state", initial_state.as_slice()));
    }

    let mut y = initial_state;
    let mut t = 0.0;
    let mut dy = eval(&mut vector_field, &y)?;
    let mut traj = Trajectory {
        states: vec![y.clone()],
        times: vec![0.0],
        terminated: Termination::MaxSteps,
    };
    if stop_test(&y, &dy) || t_end.is_some_and(|te| te <= 0.0) {
        traj.terminated = Termination::Converged;
        return Ok(traj);
    }

    let mut h = config.h_init;
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(6);
    let mut accepted = 0;
    while accepted < config.max_steps {
        let mut step = h;
        let mut hits_end = false;
        if let Some(te) = t_end {
            if t + step >= te {
                step = te - t;
                hits_end = true;
            }
        }

        k.clear();
        k.push(dy.clone());
        for row in &A[1..] {
            let mut ys = y.clone();
            for (a, kj) in row.iter().zip(&k) {
                if *a != 0.0 {
                    ys.axpy(step * a, kj, 1.0);
                }
            }
            k.push(eval(&mut vector_field, &ys)?);
        }
        let mut y4 = y.clone();
        let mut y5 = y.clone();
        for s in 0..6 {
            if B4[s] != 0.0 {
                y4.axpy(step * B4[s], &k[s], 1.0);
            }
            if B5[s] != 0.0 {
                y5.axpy(step * B5[s], &k[s], 1.0);
            }
        }
        let err = (&y5 - &y4).norm();
        let tol = config.abs_tol + config.rel_tol * y.norm().max(y5.norm());
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0)
        };

        if err <= tol {
            t = if hits_end { t_end.unwrap() } else { t + step };
            y = y5;
            dy = eval(&mut vector_field, &y)?;
            traj.states.push(y.clone());
            traj.times.push(t);
            accepted += 1;
            if hits_end || stop_test(&y, &dy) {
                traj.terminated = Termination::Converged;
                return Ok(traj);
            }
            if !hits_end {
                h = (step * factor).min(config.h_max);
            }
        } else {
            h = step * factor;
            if h < config.h_min {
                traj.terminated = Termination::StepUnderflow;
                return Ok(traj);
            }
        }
    }
    traj.terminated = Termination::MaxSteps;
    Ok(traj)
}
