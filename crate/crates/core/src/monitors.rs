//! Trajectory observables and the constant-free invariant checks: the
//! L^β cap, uniform boundedness of the tracked norms, and the discrete
//! residual of the L^k evolution identity
//!
//!   d/dt ∫u^k + 4(k-1)/k ∫|∇u^{k/2}|² + kσ ∫u^β ∫u^{k+α-1} = k ∫u^{k+α-1}.
//!
//! Every check is a pure function of a persisted time series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{gradient_power_energy, integral_power, shell_mass, sup_norm, FieldError};
use crate::scalar::{real, Real};
use crate::stepper::{ProblemSpec, State};

/// Fraction of the half-width that counts as the outer diagnostic shell.
pub const SHELL_FRACTION: f64 = 0.9;

/// Default relative slack of the invariant checks, covering quadrature,
/// truncation and splitting error; reported alongside every verdict.
pub const DEFAULT_SLACK: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("check not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("record at t = {t} is missing the k = {k} entry")]
    MissingNorm { k: f64, t: f64 },
    #[error("series is empty")]
    EmptySeries,
    #[error("records are not in increasing time order (t1 = {t1}, t2 = {t2})")]
    BadOrder { t1: f64, t2: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Observables of one accepted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord<T> {
    pub t: T,
    pub dt: T,
    /// ∫ u^β dx (the nonlocal mass).
    pub mass_beta: T,
    /// ‖u‖_β = (∫u^β)^{1/β}.
    pub norm_beta: T,
    /// ∫ u^{β+α-1} dx.
    pub norm_crit: T,
    pub sup: T,
    pub clipped_mass_cum: T,
    /// ∫ u dx over the outer 10% shell (truncation diagnostic).
    pub boundary_shell_mass: T,
    /// (k, ∫u^k dx) for every tracked k, ascending in k.
    pub norm_k: Vec<(T, T)>,
    /// (k, ∫|∇u^{k/2}|² dx) for every tracked k; not persisted to CSV.
    pub grad_energy_k: Vec<(T, T)>,
}

fn key_eq<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() <= real::<T>(1e-12) * T::one().max(a.abs())
}

impl<T: Real> TimeSeriesRecord<T> {
    pub fn norm(&self, k: T) -> Option<T> {
        self.norm_k
            .iter()
            .find(|(kk, _)| key_eq(*kk, k))
            .map(|&(_, v)| v)
    }

    pub fn grad_energy(&self, k: T) -> Option<T> {
        self.grad_energy_k
            .iter()
            .find(|(kk, _)| key_eq(*kk, k))
            .map(|&(_, v)| v)
    }
}

pub type TimeSeries<T> = Vec<TimeSeriesRecord<T>>;

/// The ks actually tracked for a run: the requested list extended by
/// β and β+α-1, deduplicated and sorted.
pub fn tracked_ks<T: Real>(prob: &ProblemSpec<T>, requested: &[T]) -> Vec<T> {
    let mut ks: Vec<T> = requested.to_vec();
    ks.push(prob.beta);
    ks.push(prob.beta + prob.alpha - T::one());
    ks.sort_by(|a, b| a.partial_cmp(b).expect("finite exponents"));
    ks.dedup_by(|a, b| key_eq(*a, *b));
    ks
}

/// Computes all observables of a state. `ks` must contain β and β+α-1
/// (use [`tracked_ks`]).
pub fn observe<T: Real>(
    state: &State<T>,
    prob: &ProblemSpec<T>,
    ks: &[T],
    dt: T,
) -> Result<TimeSeriesRecord<T>, MonitorError> {
    let field = &state.field;
    let beta = prob.beta;
    let crit = beta + prob.alpha - T::one();
    let mut norm_k = Vec::with_capacity(ks.len());
    let mut grad_energy_k = Vec::with_capacity(ks.len());
    for &k in ks {
        norm_k.push((k, integral_power(field, k)?));
        grad_energy_k.push((k, gradient_power_energy(field, k)));
    }
    let find = |k: T| {
        norm_k
            .iter()
            .find(|(kk, _)| key_eq(*kk, k))
            .map(|&(_, v)| v)
            .ok_or(MonitorError::MissingNorm {
                k: k.to_f64().unwrap_or(f64::NAN),
                t: state.t.to_f64().unwrap_or(f64::NAN),
            })
    };
    let mass_beta = find(beta)?;
    let norm_crit = find(crit)?;
    Ok(TimeSeriesRecord {
        t: state.t,
        dt,
        mass_beta,
        norm_beta: mass_beta.powf(beta.recip()),
        norm_crit,
        sup: sup_norm(field),
        clipped_mass_cum: state.clipped_mass_cum,
        boundary_shell_mass: shell_mass(field, real(SHELL_FRACTION)),
        norm_k,
        grad_energy_k,
    })
}

/// Normalized residual of the L^k evolution identity between two
/// consecutive records: the time difference of ∫u^k against the midpoint
/// values of the other terms, divided by the largest participating term.
pub fn energy_residual<T: Real>(
    r1: &TimeSeriesRecord<T>,
    r2: &TimeSeriesRecord<T>,
    k: T,
    prob: &ProblemSpec<T>,
) -> Result<T, MonitorError> {
    if !(r2.t > r1.t) {
        return Err(MonitorError::BadOrder {
            t1: r1.t.to_f64().unwrap_or(f64::NAN),
            t2: r2.t.to_f64().unwrap_or(f64::NAN),
        });
    }
    let missing = |r: &TimeSeriesRecord<T>, kk: T| MonitorError::MissingNorm {
        k: kk.to_f64().unwrap_or(f64::NAN),
        t: r.t.to_f64().unwrap_or(f64::NAN),
    };
    let ka = k + prob.alpha - T::one();
    let n1 = r1.norm(k).ok_or_else(|| missing(r1, k))?;
    let n2 = r2.norm(k).ok_or_else(|| missing(r2, k))?;
    let g1 = r1.grad_energy(k).ok_or_else(|| missing(r1, k))?;
    let g2 = r2.grad_energy(k).ok_or_else(|| missing(r2, k))?;
    let a1 = r1.norm(ka).ok_or_else(|| missing(r1, ka))?;
    let a2 = r2.norm(ka).ok_or_else(|| missing(r2, ka))?;

    let half = real::<T>(0.5);
    let ddt = (n2 - n1) / (r2.t - r1.t);
    let grad = half * (g1 + g2);
    let mass = half * (r1.mass_beta + r2.mass_beta);
    let napk = half * (a1 + a2);

    let coeff = real::<T>(4.0) * (k - T::one()) / k;
    let t_grad = coeff * grad;
    let t_sink = k * prob.sigma * mass * napk;
    let t_source = k * napk;
    let residual = (ddt + t_grad + t_sink - t_source).abs();
    let scale = ddt
        .abs()
        .max(t_grad.abs())
        .max(t_sink.abs())
        .max(t_source.abs());
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok(residual / scale)
}

/// Outcome of one invariant check over a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport<T> {
    pub name: String,
    pub holds: bool,
    /// Largest signed relative excess over the bound; negative values mean
    /// the bound held with margin everywhere.
    pub worst_violation: T,
    pub location_t: T,
    /// max{1, ‖u₀‖_∞, ‖u₀‖_β} from the first record.
    pub k0: T,
    /// The relative slack the verdict was taken at.
    pub slack: T,
}

fn k0_of<T: Real>(series: &[TimeSeriesRecord<T>]) -> Result<T, MonitorError> {
    let first = series.first().ok_or(MonitorError::EmptySeries)?;
    Ok(T::one().max(first.sup).max(first.norm_beta))
}

/// Checks mass_beta(t) ≤ max{∫u₀^β, 1/σ}·(1+slack) and that mass_beta
/// decreases (up to the same slack) whenever it sits above the balance
/// point 1/σ.
pub fn lbeta_cap_check<T: Real>(
    series: &[TimeSeriesRecord<T>],
    sigma: T,
    u0_mass_beta: T,
    slack: T,
) -> Result<InvariantReport<T>, MonitorError> {
    if !(sigma > T::zero()) {
        return Err(MonitorError::NotApplicable(
            "the L^beta cap requires sigma > 0",
        ));
    }
    let k0 = k0_of(series)?;
    let balance = sigma.recip();
    let cap = u0_mass_beta.max(balance);
    let mut worst = T::neg_infinity();
    let mut location_t = series[0].t;
    for r in series {
        let excess = (r.mass_beta - cap) / cap;
        if excess > worst {
            worst = excess;
            location_t = r.t;
        }
    }
    for pair in series.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.mass_beta > balance * (T::one() + slack) {
            let growth = (b.mass_beta - a.mass_beta) / a.mass_beta;
            if growth > worst {
                worst = growth;
                location_t = b.t;
            }
        }
    }
    Ok(InvariantReport {
        name: "lbeta_cap".to_string(),
        holds: worst <= slack,
        worst_violation: worst,
        location_t,
        k0,
        slack,
    })
}

/// Checks that every tracked norm stays finite with no monotone escape in
/// the trailing 20% of the run, and that ∫u^{β+α-1} never exceeds its
/// global maximum after attaining it.
pub fn uniform_bound_check<T: Real>(
    series: &[TimeSeriesRecord<T>],
    ks: &[T],
    slack: T,
) -> Result<InvariantReport<T>, MonitorError> {
    let k0 = k0_of(series)?;
    let split = (series.len() * 4).div_ceil(5).max(1);
    let mut worst = T::neg_infinity();
    let mut location_t = series[0].t;
    let tiny = real::<T>(1e-300);

    let mut track = |values: &dyn Fn(&TimeSeriesRecord<T>) -> Option<T>,
                     worst: &mut T,
                     location_t: &mut T|
     -> Result<(), MonitorError> {
        let mut head_max = T::zero();
        let mut tail_max = T::zero();
        for (i, r) in series.iter().enumerate() {
            let v = values(r).ok_or(MonitorError::MissingNorm {
                k: f64::NAN,
                t: r.t.to_f64().unwrap_or(f64::NAN),
            })?;
            if !v.is_finite() {
                *worst = T::infinity();
                *location_t = r.t;
                return Ok(());
            }
            if i < split {
                head_max = head_max.max(v);
            } else {
                tail_max = tail_max.max(v);
            }
        }
        let escape = (tail_max - head_max) / head_max.max(tiny);
        if escape > *worst {
            *worst = escape;
            *location_t = series[split.min(series.len() - 1)].t;
        }
        Ok(())
    };

    track(&|r| Some(r.mass_beta), &mut worst, &mut location_t)?;
    track(&|r| Some(r.norm_crit), &mut worst, &mut location_t)?;
    track(&|r| Some(r.sup), &mut worst, &mut location_t)?;
    for &k in ks {
        track(&|r| r.norm(k), &mut worst, &mut location_t)?;
    }

    // envelope shape of ∫u^{β+α-1}: after the global max, never above it
    let (peak_idx, peak) = series
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.norm_crit))
        .fold((0, T::neg_infinity()), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    for r in &series[peak_idx + 1..] {
        let excess = (r.norm_crit - peak) / peak.max(tiny);
        if excess > worst {
            worst = excess;
            location_t = r.t;
        }
    }

    Ok(InvariantReport {
        name: "uniform_bound".to_string(),
        holds: worst <= slack,
        worst_violation: worst,
        location_t,
        k0,
        slack,
    })
}
