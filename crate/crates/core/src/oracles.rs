//! Closed-form and reduced-model references used to validate the solver
//! independently: the heat kernel, the spatially-uniform ODE reduction,
//! and a high-order adaptive integrator for it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Value ceiling at which the ODE integrator declares blow-up. Deliberately
/// above the PDE detector's ceiling so oracle truncation never masks
/// detector calibration.
pub const ODE_CEILING: f64 = 1e10;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("sigma_eff must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// The t0-shifted heat kernel (4π(t+t0))^{-n/2} exp(-|x|²/(4(t+t0))),
/// an exact solution of u_t = Δu; t0 > 0 avoids the initial singularity.
pub fn heat_exact<T: Real>(x: &[T], t: T, n: u32, t0: T) -> T {
    let tau = t + t0;
    let four = real::<T>(4.0);
    let r2 = x.iter().fold(T::zero(), |acc, &xi| acc + xi * xi);
    let pref = (four * real::<T>(std::f64::consts::PI) * tau)
        .powf(-real::<T>(f64::from(n)) / real(2.0));
    pref * (-r2 / (four * tau)).exp()
}

/// Exact blow-up time u0^{1-α}/(α-1) of u' = u^α; ∞ when α ≤ 1.
pub fn ode_blowup_time<T: Real>(alpha: T, u0: T) -> T {
    if alpha <= T::one() {
        return T::infinity();
    }
    u0.powf(T::one() - alpha) / (alpha - T::one())
}

/// Positive root u* = sigma_eff^{-1/β} of 1 - sigma_eff · u^β.
pub fn ode_steady_state<T: Real>(beta: T, sigma_eff: T) -> Result<T, OracleError> {
    if !(sigma_eff > T::zero()) {
        return Err(OracleError::NonPositiveSigma(
            sigma_eff.to_f64().unwrap_or(f64::NAN),
        ));
    }
    Ok(sigma_eff.powf(-beta.recip()))
}

/// The spatially-uniform reduction u' = u^α (1 - sigma_eff · u^β), where
/// sigma_eff = σ · volume of the periodic box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeReduction<T> {
    pub alpha: T,
    pub beta: T,
    pub sigma_eff: T,
    pub u0: T,
}

impl<T: Real> OdeReduction<T> {
    pub fn rhs(&self, u: T) -> T {
        u.powf(self.alpha) * (T::one() - self.sigma_eff * u.powf(self.beta))
    }
}

/// Accepted points of an adaptive integration, with a blow-up flag when the
/// value crossed [`ODE_CEILING`] or the step size underflowed while growing.
#[derive(Debug, Clone)]
pub struct OdeTrajectory<T> {
    pub points: Vec<(T, T)>,
    pub blew_up: bool,
}

impl<T: Real> OdeTrajectory<T> {
    pub fn last(&self) -> (T, T) {
        *self.points.last().expect("trajectory has the initial point")
    }
}

/// Dormand-Prince 5(4) with proportional step control; local tolerance is
/// `tol` scaled by (1 + |u|).
pub fn ode_solve<T: Real>(
    red: &OdeReduction<T>,
    t_end: T,
    tol: T,
) -> Result<OdeTrajectory<T>, OracleError> {
    if !(tol > T::zero()) {
        return Err(OracleError::BadTolerance(tol.to_f64().unwrap_or(f64::NAN)));
    }
    let ceiling = real::<T>(ODE_CEILING);
    let mut t = T::zero();
    let mut u = red.u0;
    let mut points = vec![(t, u)];
    let mut blew_up = false;

    // order-5 and order-4 weights of the dopri pair
    let a: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    let b5 = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    let b4 = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut dt = (t_end * real(1e-4)).min(real(1e-3)).max(real(1e-12));
    let dt_floor = real::<T>(1e-14);
    while t < t_end {
        if dt < dt_floor * t.max(T::one()) {
            // step underflow: only happens while racing toward the ceiling
            blew_up = true;
            break;
        }
        let step = dt.min(t_end - t);
        let mut k = [T::zero(); 7];
        k[0] = red.rhs(u);
        let mut bad = false;
        for (i, row) in a.iter().enumerate() {
            let mut ui = u;
            for (j, &coef) in row.iter().enumerate().take(i + 1) {
                ui = ui + step * real::<T>(coef) * k[j];
            }
            // nonnegative dynamics; tiny negative excursions in stage values
            // would make powf undefined for fractional exponents
            k[i + 1] = red.rhs(ui.max(T::zero()));
            if !k[i + 1].is_finite() {
                bad = true;
                break;
            }
        }
        let (u5, err) = if bad {
            (T::nan(), T::infinity())
        } else {
            let mut u5 = u;
            let mut e = T::zero();
            for i in 0..7 {
                u5 = u5 + step * real::<T>(b5[i]) * k[i];
                e = e + step * real::<T>(b5[i] - b4[i]) * k[i];
            }
            (u5, e.abs())
        };
        let scale = tol * (T::one() + u.abs());
        if err <= scale && u5.is_finite() {
            t = t + step;
            u = u5.max(T::zero());
            points.push((t, u));
            if u > ceiling {
                blew_up = true;
                break;
            }
            let factor = if err > T::zero() {
                (scale / err).powf(real(0.2)) * real(0.9)
            } else {
                real(5.0)
            };
            dt = step * factor.min(real(5.0)).max(real(0.2));
        } else {
            let factor = if err.is_finite() && err > T::zero() {
                (scale / err).powf(real(0.2)) * real(0.9)
            } else {
                real(0.5)
            };
            dt = step * factor.min(real(1.0)).max(real(0.1));
        }
    }
    Ok(OdeTrajectory { points, blew_up })
}
