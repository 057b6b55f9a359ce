//! Derived exponents of the regime analysis.
//!
//! Everything here is a pure function of (n, α, β) and auxiliary exponents
//! (k, k', Moser index). The two machine-checked equivalences are
//!
//! * `small_exponent`:  bθ/(k+α-1) < 1   ⇔   α < 1 + (1 - 2/p)β,
//! * `gamma1_ok`:       γ₁ ≤ 2           ⇔   α ≤ 1 + (1 - 2/p)β,
//!
//! and [`sweep_equivalence`] verifies both over parameter grids.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Extended, Real};

/// Absolute tolerance for comparisons against regime thresholds. Tuples
/// within this band of the threshold are treated as boundary cases.
pub const THRESHOLD_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ExponentError {
    #[error("dimension must be >= 1, got {0}")]
    InvalidDimension(u32),
    #[error("{name} = {value} is outside the model range ({constraint})")]
    OutOfModel {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("invalid parameter {name} = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("exponent ordering violated: need {need} (r = {r}, q = {q}, p = {p})")]
    OrderingViolation {
        need: &'static str,
        r: f64,
        q: f64,
        p: String,
    },
    #[error("precondition violated: {quantity} = {value} must exceed {bound} = {bound_value}")]
    PreconditionViolated {
        quantity: &'static str,
        value: f64,
        bound: &'static str,
        bound_value: f64,
    },
}

fn f<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// The embedding exponent for H¹(ℝⁿ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SobolevExponent<T> {
    /// A pinned value: 2n/(n-2) for n ≥ 3, ∞ for n = 1, or a user-chosen
    /// finite value for n = 2.
    Value(Extended<T>),
    /// n = 2 without a chosen value: any exponent in (2, ∞) is admissible.
    FreeInTwoInfinity,
}

impl<T: Real> SobolevExponent<T> {
    /// The supremal choice: ∞ for the free n = 2 case.
    pub fn supremal(self) -> Extended<T> {
        match self {
            SobolevExponent::Value(p) => p,
            SobolevExponent::FreeInTwoInfinity => Extended::Infinity,
        }
    }
}

/// 2n/(n-2) for n ≥ 3, ∞ for n = 1; for n = 2 either the caller's `p2`
/// (validated to lie in (2, ∞)) or the free-interval sentinel.
pub fn sobolev_exponent<T: Real>(
    n: u32,
    p2: Option<T>,
) -> Result<SobolevExponent<T>, ExponentError> {
    if n < 1 {
        return Err(ExponentError::InvalidDimension(n));
    }
    if n != 2 {
        if let Some(p2) = p2 {
            return Err(ExponentError::InvalidParameter {
                name: "p2",
                value: f(p2),
                constraint: "only meaningful for n = 2",
            });
        }
    }
    Ok(match n {
        1 => SobolevExponent::Value(Extended::Infinity),
        2 => match p2 {
            Some(p2) => {
                if !(p2 > real(2.0)) || !p2.is_finite() {
                    return Err(ExponentError::InvalidParameter {
                        name: "p2",
                        value: f(p2),
                        constraint: "must lie in (2, inf)",
                    });
                }
                SobolevExponent::Value(Extended::Finite(p2))
            }
            None => SobolevExponent::FreeInTwoInfinity,
        },
        _ => {
            let nn = real::<T>(f64::from(n));
            SobolevExponent::Value(Extended::Finite(
                real::<T>(2.0) * nn / (nn - real(2.0)),
            ))
        }
    })
}

/// 1 + (1 - 2/p)β for a concrete extended p.
pub fn threshold_for<T: Real>(p: Extended<T>, beta: T) -> T {
    T::one() + (T::one() - real::<T>(2.0) * p.inv()) * beta
}

/// Regime classification of a problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport<T> {
    pub n: u32,
    pub alpha: T,
    pub beta: T,
    /// Embedding exponent; for n = 2 this is the supremal (infinite) choice.
    pub p: Extended<T>,
    /// 1 + (1 - 2/p)β, i.e. 1 + 2β/n for n ≥ 3 and 1 + β for n ∈ {1, 2}.
    pub threshold: T,
    /// False exactly for n = 2, where the threshold is a supremum over
    /// finite embedding exponents and is not attained by any of them.
    pub threshold_attained: bool,
    /// Whether 1 ≤ α < threshold holds strictly.
    pub covered: bool,
    /// 1 + 2/n, for comparison runs with the nonlocal term switched off.
    pub fujita_exponent: T,
}

/// Classifies (n, α, β) against the global-existence threshold.
pub fn classify<T: Real>(n: u32, alpha: T, beta: T) -> Result<RegimeReport<T>, ExponentError> {
    if n < 1 {
        return Err(ExponentError::InvalidDimension(n));
    }
    if alpha < T::one() {
        return Err(ExponentError::OutOfModel {
            name: "alpha",
            value: f(alpha),
            constraint: "alpha >= 1",
        });
    }
    if beta < T::one() {
        return Err(ExponentError::OutOfModel {
            name: "beta",
            value: f(beta),
            constraint: "beta >= 1",
        });
    }
    let p = sobolev_exponent::<T>(n, None)?.supremal();
    let threshold = threshold_for(p, beta);
    let covered = threshold - alpha > real(THRESHOLD_TOL);
    Ok(RegimeReport {
        n,
        alpha,
        beta,
        p,
        threshold,
        threshold_attained: n != 2,
        covered,
        fujita_exponent: T::one() + real::<T>(2.0) / real(f64::from(n)),
    })
}

/// Exponents of the gradient interpolation inequality for 1 ≤ r < q < p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationExponents<T> {
    pub r: T,
    pub q: T,
    pub p: Extended<T>,
    /// λ = (1/r - 1/q)/(1/r - 1/p) ∈ (0, 1).
    pub lambda: T,
    /// γ = 2(1-λ)q/(2-λq); only defined when `valid`.
    pub gamma: Option<T>,
    /// λq < 2, equivalently q/r < 2/r + 1 - 2/p.
    pub valid: bool,
}

pub fn interpolation_exponents<T: Real>(
    r: T,
    q: T,
    p: Extended<T>,
) -> Result<InterpolationExponents<T>, ExponentError> {
    let ordering = r >= T::one() && r < q && p.exceeds(q);
    if !ordering {
        return Err(ExponentError::OrderingViolation {
            need: "1 <= r < q < p",
            r: f(r),
            q: f(q),
            p: p.to_string(),
        });
    }
    let inv_p = p.inv();
    let lambda = (r.recip() - q.recip()) / (r.recip() - inv_p);
    let lambda_q = lambda * q;
    let two = real::<T>(2.0);
    let valid = lambda_q < two;
    let gamma = valid.then(|| two * (T::one() - lambda) * q / (two - lambda_q));
    Ok(InterpolationExponents {
        r,
        q,
        p,
        lambda,
        gamma,
        valid,
    })
}

impl<T: Real> InterpolationExponents<T> {
    /// The window inequality q/r < 2/r + 1 - 2/p, an equivalent form of
    /// λq < 2; kept as a second route for cross-checking `valid`.
    pub fn window_inequality_holds(&self) -> bool {
        let two = real::<T>(2.0);
        self.q / self.r < two / self.r + T::one() - two * self.p.inv()
    }
}

/// Exponents of the k' interpolation step with the midpoint choice
/// k' = (k + α - 1 + β)/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponents<T> {
    pub k: T,
    pub alpha: T,
    pub beta: T,
    pub p: Extended<T>,
    /// Midpoint of (β, k+α-1).
    pub k_prime: T,
    /// θ = (1/β - 1/k')/(1/β - 1/(k+α-1)) ∈ (0, 1).
    pub theta: T,
    /// Interpolation weight of the L^{k'} bound, λ ∈ (0, 1).
    pub lambda: T,
    /// b = (1-λ)(k+α-1)/(1 - λ(k+α-1)/k).
    pub b: T,
    /// bθ/(k+α-1) < 1; equivalent to α < 1 + (1 - 2/p)β.
    pub small_exponent: bool,
}

impl<T: Real> HolderExponents<T> {
    /// bθ/(k+α-1), the exponent whose position relative to 1 decides the
    /// regime; exactly 1 on the threshold.
    pub fn ratio(&self) -> T {
        self.b * self.theta / (self.k + self.alpha - T::one())
    }

    /// Residual of the midpoint identity 1 - θ - θβ/(k+α-1) = 0.
    pub fn midpoint_identity_residual(&self) -> T {
        T::one() - self.theta - self.theta * self.beta / (self.k + self.alpha - T::one())
    }
}

pub fn holder_exponents<T: Real>(
    k: T,
    alpha: T,
    beta: T,
    p: Extended<T>,
) -> Result<HolderExponents<T>, ExponentError> {
    if alpha < T::one() {
        return Err(ExponentError::OutOfModel {
            name: "alpha",
            value: f(alpha),
            constraint: "alpha >= 1",
        });
    }
    if beta < T::one() {
        return Err(ExponentError::OutOfModel {
            name: "beta",
            value: f(beta),
            constraint: "beta >= 1",
        });
    }
    let one = T::one();
    let two = real::<T>(2.0);
    let inv_p = p.inv();
    // 2/(p-2) written through 1/p so that p = ∞ gives 0.
    let two_over_pm2 = two * inv_p / (one - two * inv_p);
    let k_floor = ((alpha - one) * two_over_pm2).max(one);
    if k <= k_floor {
        return Err(ExponentError::PreconditionViolated {
            quantity: "k",
            value: f(k),
            bound: "max{2(alpha-1)/(p-2), 1}",
            bound_value: f(k_floor),
        });
    }
    let kam1 = k + alpha - one;
    if kam1 <= beta {
        return Err(ExponentError::PreconditionViolated {
            quantity: "k+alpha-1",
            value: f(kam1),
            bound: "beta (k' interval must be nonempty)",
            bound_value: f(beta),
        });
    }
    let k_prime = (kam1 + beta) / two;
    // Lower bound for k' from the gradient interpolation; also guarantees
    // λ(k+α-1)/k < 1 so the b denominator stays positive.
    let kp_floor = ((alpha - one) * p.over_minus_two()).max(one);
    if k_prime <= kp_floor {
        return Err(ExponentError::PreconditionViolated {
            quantity: "k'",
            value: f(k_prime),
            bound: "max{p(alpha-1)/(p-2), 1}",
            bound_value: f(kp_floor),
        });
    }
    let lambda = (k / (two * k_prime) - k / (two * kam1)) / (k / (two * k_prime) - inv_p);
    let b = (one - lambda) * kam1 / (one - lambda * kam1 / k);
    let theta = (beta.recip() - k_prime.recip()) / (beta.recip() - kam1.recip());
    let out = HolderExponents {
        k,
        alpha,
        beta,
        p,
        k_prime,
        theta,
        lambda,
        b,
        small_exponent: false,
    };
    let small_exponent = out.ratio() < one;
    Ok(HolderExponents {
        small_exponent,
        ..out
    })
}

/// Exponents of the iteration sequence q_k = 2^k + β + α - 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoserExponents<T> {
    pub k_index: u32,
    pub q_k: T,
    pub q_km1: T,
    /// γ₁ = 1 + (q_k + α - 1 - q_{k-1})/(q_{k-1} - p(α-1)/(p-2)).
    pub gamma1: T,
    /// γ₂ = q_k/q_{k-1}, always below 2.
    pub gamma2: T,
    /// δ₁ = (q_k - 2q_{k-1}/p)/(q_k + α - 1 - q_{k-1}).
    pub delta1: T,
    /// d₀ = δ₁/(δ₁ - 1).
    pub d0: T,
    /// γ₁ ≤ 2 with a positive denominator; equivalent to α ≤ 1 + (1 - 2/p)β.
    pub gamma1_ok: bool,
    pub gamma2_ok: bool,
}

pub fn moser_exponents<T: Real>(
    k_index: u32,
    alpha: T,
    beta: T,
    p: Extended<T>,
) -> Result<MoserExponents<T>, ExponentError> {
    if k_index < 1 {
        return Err(ExponentError::InvalidParameter {
            name: "k_index",
            value: f64::from(k_index),
            constraint: "must be >= 1",
        });
    }
    if alpha < T::one() || beta < T::one() {
        return Err(ExponentError::OutOfModel {
            name: "alpha/beta",
            value: f(alpha.min(beta)),
            constraint: "alpha, beta >= 1",
        });
    }
    let one = T::one();
    let tail = beta + alpha - one;
    let q_k = real::<T>(2.0).powi(k_index as i32) + tail;
    let q_km1 = real::<T>(2.0).powi(k_index as i32 - 1) + tail;
    let gamma2 = q_k / q_km1;
    let pam = (alpha - one) * p.over_minus_two();
    let denom = q_km1 - pam;
    let gamma1 = one + (q_k + alpha - one - q_km1) / denom;
    let delta1 = (q_k - real::<T>(2.0) * q_km1 * p.inv()) / (q_k + alpha - one - q_km1);
    let d0 = delta1 / (delta1 - one);
    Ok(MoserExponents {
        k_index,
        q_k,
        q_km1,
        gamma1,
        gamma2,
        delta1,
        d0,
        // The interpolation behind γ₁ requires q_{k-1} > p(α-1)/(p-2);
        // with a nonpositive denominator the γ₁ ≤ 2 comparison is vacuous.
        gamma1_ok: denom > T::zero() && gamma1 <= real(2.0),
        gamma2_ok: gamma2 < real(2.0),
    })
}

/// One sampled tuple of the equivalence sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepTuple<T> {
    pub n: u32,
    pub alpha: T,
    pub beta: T,
    pub k: T,
    /// Concrete embedding exponent for n = 2 tuples; ignored otherwise.
    pub p2: Option<T>,
}

/// A tuple for which one of the checked identities failed, with the full
/// exponent dump for diagnosis.
#[derive(Debug, Clone)]
pub struct SweepCounterexample<T> {
    pub tuple: SweepTuple<T>,
    pub holder: Option<HolderExponents<T>>,
    pub moser: Option<MoserExponents<T>>,
    pub what: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport<T> {
    /// Tuples that passed the preconditions and were checked.
    pub checked: usize,
    /// Tuples rejected by the preconditions (k or k' out of range).
    pub inadmissible: usize,
    /// Tuples within `THRESHOLD_TOL` of the threshold, excluded from the
    /// strict/non-strict comparisons.
    pub boundary: usize,
    pub counterexamples: Vec<SweepCounterexample<T>>,
}

impl<T> SweepReport<T> {
    pub fn clean(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Verifies, for every admissible tuple, that
/// `small_exponent ⇔ α < 1 + (1-2/p)β` and `gamma1_ok ⇔ α ≤ 1 + (1-2/p)β`
/// (the latter at Moser indices 1..=3), plus the pointwise range and
/// midpoint identities. Boundary tuples are counted and skipped.
pub fn sweep_equivalence<T, I>(tuples: I) -> SweepReport<T>
where
    T: Real,
    I: IntoIterator<Item = SweepTuple<T>>,
{
    let mut report = SweepReport {
        checked: 0,
        inadmissible: 0,
        boundary: 0,
        counterexamples: Vec::new(),
    };
    for tuple in tuples {
        let p = match tuple.n {
            0 => {
                report.inadmissible += 1;
                continue;
            }
            2 => match tuple.p2 {
                Some(p2) if p2 > real(2.0) && p2.is_finite() => Extended::Finite(p2),
                _ => {
                    report.inadmissible += 1;
                    continue;
                }
            },
            _ => match sobolev_exponent::<T>(tuple.n, None) {
                Ok(s) => s.supremal(),
                Err(_) => {
                    report.inadmissible += 1;
                    continue;
                }
            },
        };
        let threshold = threshold_for(p, tuple.beta);
        if (tuple.alpha - threshold).abs() <= real(THRESHOLD_TOL) {
            report.boundary += 1;
            continue;
        }
        let strictly_below = tuple.alpha < threshold;
        let holder = match holder_exponents(tuple.k, tuple.alpha, tuple.beta, p) {
            Ok(h) => h,
            Err(_) => {
                report.inadmissible += 1;
                continue;
            }
        };
        report.checked += 1;
        let mut fail = |what: String, h: Option<HolderExponents<T>>, m: Option<MoserExponents<T>>| {
            report.counterexamples.push(SweepCounterexample {
                tuple,
                holder: h,
                moser: m,
                what,
            });
        };
        if holder.small_exponent != strictly_below {
            fail(
                format!(
                    "small_exponent = {} but alpha {} threshold (ratio = {})",
                    holder.small_exponent,
                    if strictly_below { "<" } else { ">" },
                    holder.ratio()
                ),
                Some(holder),
                None,
            );
        }
        if !(holder.theta > T::zero() && holder.theta < T::one()) {
            fail(format!("theta = {} out of (0,1)", holder.theta), Some(holder), None);
        }
        if !(holder.lambda > T::zero() && holder.lambda < T::one()) {
            fail(format!("lambda = {} out of (0,1)", holder.lambda), Some(holder), None);
        }
        if holder.midpoint_identity_residual().abs() >= real(1e-12) {
            fail(
                format!(
                    "midpoint identity residual = {}",
                    holder.midpoint_identity_residual()
                ),
                Some(holder),
                None,
            );
        }
        for k_index in 1..=3 {
            let moser = match moser_exponents(k_index, tuple.alpha, tuple.beta, p) {
                Ok(m) => m,
                Err(_) => {
                    fail(format!("moser_exponents failed at k_index {k_index}"), Some(holder), None);
                    continue;
                }
            };
            if moser.gamma1_ok != (tuple.alpha < threshold) {
                fail(
                    format!(
                        "gamma1_ok = {} at k_index {k_index} but alpha {} threshold",
                        moser.gamma1_ok,
                        if strictly_below { "<" } else { ">" },
                    ),
                    Some(holder),
                    Some(moser),
                );
            }
            if !moser.gamma2_ok {
                fail(
                    format!("gamma2 = {} not below 2", moser.gamma2),
                    Some(holder),
                    Some(moser),
                );
            }
            if strictly_below && !(moser.delta1 > T::one()) {
                fail(
                    format!("delta1 = {} not above 1 in covered regime", moser.delta1),
                    Some(holder),
                    Some(moser),
                );
            }
        }
    }
    report
}

/// Uniformly random tuples over the given ranges, reproducible from the seed.
pub fn random_tuples<T: Real>(
    seed: u64,
    count: usize,
    ns: &[u32],
    alpha: (f64, f64),
    beta: (f64, f64),
    k: (f64, f64),
) -> Vec<SweepTuple<T>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| SweepTuple {
            n: ns[rng.gen_range(0..ns.len())],
            alpha: real(rng.gen_range(alpha.0..=alpha.1)),
            beta: real(rng.gen_range(beta.0..=beta.1)),
            k: real(rng.gen_range(k.0..=k.1)),
            p2: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sobolev_exponent_cases() {
        assert_eq!(
            sobolev_exponent::<f64>(1, None).unwrap().supremal(),
            Extended::Infinity
        );
        assert_eq!(
            sobolev_exponent::<f64>(3, None).unwrap().supremal(),
            Extended::Finite(6.0)
        );
        assert_eq!(
            sobolev_exponent::<f64>(4, None).unwrap().supremal(),
            Extended::Finite(4.0)
        );
        assert!(matches!(
            sobolev_exponent::<f64>(2, None).unwrap(),
            SobolevExponent::FreeInTwoInfinity
        ));
        assert_eq!(
            sobolev_exponent::<f64>(2, Some(8.0)).unwrap().supremal(),
            Extended::Finite(8.0)
        );
        assert!(sobolev_exponent::<f64>(0, None).is_err());
        assert!(sobolev_exponent::<f64>(2, Some(2.0)).is_err());
        assert!(sobolev_exponent::<f64>(2, Some(f64::INFINITY)).is_err());
        assert!(sobolev_exponent::<f64>(3, Some(7.0)).is_err());
    }

    #[test]
    fn classify_examples() {
        let r = classify::<f64>(3, 1.5, 1.0).unwrap();
        assert_relative_eq!(r.threshold, 5.0 / 3.0, max_relative = 1e-15);
        assert!(r.covered);
        assert!(r.threshold_attained);

        let r = classify::<f64>(3, 2.0, 1.0).unwrap();
        assert!(!r.covered, "2 >= 5/3 must not be covered");

        let r = classify::<f64>(2, 1.8, 1.0).unwrap();
        assert_eq!(r.threshold, 2.0);
        assert!(!r.threshold_attained);
        assert!(r.covered);
        assert_eq!(r.fujita_exponent, 2.0);
    }

    #[test]
    fn boundary_alpha_is_not_covered() {
        let thr = 1.0 + 2.0 / 3.0;
        assert!(!classify::<f64>(3, thr, 1.0).unwrap().covered);
        assert!(!classify::<f64>(3, thr - 1e-13, 1.0).unwrap().covered);
        assert!(classify::<f64>(3, thr - 1e-9, 1.0).unwrap().covered);
    }

    #[test]
    fn classify_rejects_out_of_model() {
        assert!(classify::<f64>(3, 0.5, 1.0).is_err());
        assert!(classify::<f64>(3, 1.5, 0.9).is_err());
        assert!(classify::<f64>(0, 1.5, 1.0).is_err());
    }

    #[test]
    fn fujita_threshold_coincides_for_beta_one() {
        for n in 2..=8 {
            let r = classify::<f64>(n, 1.0, 1.0).unwrap();
            assert_relative_eq!(r.threshold, r.fujita_exponent, max_relative = 1e-15);
        }
    }

    #[test]
    fn interpolation_hand_values() {
        let e = interpolation_exponents(1.0, 2.0, Extended::Finite(6.0)).unwrap();
        assert_relative_eq!(e.lambda, 0.6, max_relative = 1e-15);
        assert!(e.valid);
        assert_relative_eq!(e.gamma.unwrap(), 2.0, max_relative = 1e-14);

        let e = interpolation_exponents(1.0, 3.0, Extended::Finite(6.0)).unwrap();
        assert_relative_eq!(e.lambda, 0.8, max_relative = 1e-15);
        assert!(!e.valid);
        assert!(e.gamma.is_none());
    }

    #[test]
    fn interpolation_degenerate_q_near_r() {
        let e = interpolation_exponents(2.0, 2.0 + 1e-9, Extended::Finite(6.0)).unwrap();
        assert!(e.lambda < 1e-8);
        assert_relative_eq!(e.gamma.unwrap(), e.q, max_relative = 1e-7);
    }

    #[test]
    fn interpolation_rejects_bad_ordering() {
        assert!(interpolation_exponents(2.0, 2.0, Extended::Finite(6.0)).is_err());
        assert!(interpolation_exponents(0.5, 2.0, Extended::Finite(6.0)).is_err());
        assert!(interpolation_exponents(1.0, 6.0, Extended::Finite(6.0)).is_err());
    }

    #[test]
    fn interpolation_window_matches_validity() {
        // λq < 2 and the window inequality are two routes to the same flag.
        for &(r, q, p) in &[
            (1.0, 2.0, 6.0),
            (1.0, 3.0, 6.0),
            (1.5, 2.5, 4.0),
            (2.0, 3.0, 10.0),
            (1.0, 1.2, 2.5),
        ] {
            let e = interpolation_exponents(r, q, Extended::Finite(p)).unwrap();
            assert_eq!(e.valid, e.window_inequality_holds(), "r={r} q={q} p={p}");
        }
        let e = interpolation_exponents(1.0, 2.0, Extended::<f64>::Infinity).unwrap();
        assert_eq!(e.valid, e.window_inequality_holds());
    }

    #[test]
    fn holder_hand_values() {
        let h = holder_exponents(2.0, 1.0, 1.0, Extended::Finite(6.0)).unwrap();
        assert_relative_eq!(h.k_prime, 1.5, max_relative = 1e-15);
        assert_relative_eq!(h.theta, 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(h.b, 2.0, max_relative = 1e-14);
        assert_relative_eq!(h.ratio(), 2.0 / 3.0, max_relative = 1e-14);
        assert!(h.small_exponent);

        let h = holder_exponents(2.0, 1.5, 1.0, Extended::Finite(6.0)).unwrap();
        assert_relative_eq!(h.k_prime, 1.75, max_relative = 1e-15);
        assert_relative_eq!(h.theta, 5.0 / 7.0, max_relative = 1e-14);
        assert_relative_eq!(h.b, 3.0625, max_relative = 1e-14);
        assert_relative_eq!(h.ratio(), 0.875, max_relative = 1e-14);
        assert!(h.small_exponent);
    }

    #[test]
    fn holder_ratio_is_one_on_the_threshold() {
        let h = holder_exponents(2.0f64, 5.0 / 3.0, 1.0, Extended::Finite(6.0)).unwrap();
        assert!((h.ratio() - 1.0).abs() < 1e-12, "ratio = {}", h.ratio());
    }

    #[test]
    fn holder_b_agrees_with_interpolation_gamma() {
        // b = kγ/2 where γ comes from the lemma applied to v = u^{k/2},
        // q = 2(k+α-1)/k, r = 2k'/k. Two independent routes.
        for &(k, alpha, beta, p) in &[
            (2.0, 1.0, 1.0, 6.0),
            (2.0, 1.5, 1.0, 6.0),
            (3.5, 1.2, 2.0, 4.0),
            (5.0, 1.9, 3.0, 10.0),
        ] {
            let h = holder_exponents(k, alpha, beta, Extended::Finite(p)).unwrap();
            let kam1 = k + alpha - 1.0;
            let e = interpolation_exponents(
                2.0 * h.k_prime / k,
                2.0 * kam1 / k,
                Extended::Finite(p),
            )
            .unwrap();
            assert!(e.valid, "k={k} alpha={alpha} beta={beta} p={p}");
            assert_relative_eq!(h.b, k * e.gamma.unwrap() / 2.0, max_relative = 1e-12);
            assert_relative_eq!(h.lambda, e.lambda, max_relative = 1e-12);
        }
    }

    #[test]
    fn holder_rejects_k_out_of_range() {
        // k must exceed max{2(alpha-1)/(p-2), 1}.
        let err = holder_exponents(1.0, 1.0, 1.0, Extended::Finite(6.0)).unwrap_err();
        assert!(matches!(err, ExponentError::PreconditionViolated { quantity: "k", .. }));
        // interval (beta, k+alpha-1) empty
        let err = holder_exponents(2.0, 1.0, 4.0, Extended::Finite(6.0)).unwrap_err();
        assert!(matches!(
            err,
            ExponentError::PreconditionViolated { quantity: "k+alpha-1", .. }
        ));
        // k' below the gradient-interpolation floor: alpha large, n large
        let err = holder_exponents(1.2, 4.0, 1.0, Extended::Finite(2.5)).unwrap_err();
        assert!(matches!(err, ExponentError::PreconditionViolated { .. }));
    }

    #[test]
    fn moser_hand_values() {
        let m = moser_exponents(3, 1.5, 1.0, Extended::Finite(6.0)).unwrap();
        assert_relative_eq!(m.q_k, 9.5, max_relative = 1e-15);
        assert_relative_eq!(m.q_km1, 5.5, max_relative = 1e-15);
        assert_relative_eq!(m.gamma2, 9.5 / 5.5, max_relative = 1e-14);
        assert!(m.gamma2_ok);
        assert_relative_eq!(m.delta1, 46.0 / 27.0, max_relative = 1e-13);
        assert_relative_eq!(m.d0, 46.0 / 19.0, max_relative = 1e-13);
        assert_relative_eq!(m.gamma1, 37.0 / 19.0, max_relative = 1e-13);
        assert!(m.gamma1_ok);
    }

    #[test]
    fn moser_q0_is_beta_plus_alpha() {
        let m = moser_exponents(1, 1.5, 2.0, Extended::<f64>::Infinity).unwrap();
        assert_relative_eq!(m.q_km1, 3.5, max_relative = 1e-15);
        // midpoint identity q_{k-1} = (q_k + beta + alpha - 1)/2
        assert_relative_eq!(m.q_km1, (m.q_k + 2.0 + 1.5 - 1.0) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn moser_handles_infinite_p_by_limits() {
        // p = ∞: 2q/p -> 0 and p(α-1)/(p-2) -> α-1.
        let m = moser_exponents(2, 1.5, 1.0, Extended::<f64>::Infinity).unwrap();
        let tail = 1.0 + 1.5 - 1.0;
        let qk = 4.0 + tail;
        let qkm1 = 2.0 + tail;
        assert_relative_eq!(m.delta1, qk / (qk + 0.5 - qkm1), max_relative = 1e-14);
        assert_relative_eq!(
            m.gamma1,
            1.0 + (qk + 0.5 - qkm1) / (qkm1 - 0.5),
            max_relative = 1e-14
        );
        assert!(m.gamma1_ok);
    }

    #[test]
    fn sweep_boundary_tuple_counted_not_failed() {
        let tuples = vec![SweepTuple {
            n: 3,
            alpha: 5.0 / 3.0,
            beta: 1.0,
            k: 2.0,
            p2: None,
        }];
        let report = sweep_equivalence(tuples);
        assert_eq!(report.boundary, 1);
        assert_eq!(report.checked, 0);
        assert!(report.clean());
    }

    #[test]
    fn sweep_alpha_one_is_always_small() {
        for n in [1u32, 3, 4, 5, 10] {
            for beta in [1.0, 2.0, 4.0] {
                for k in [1.5, 2.0, 4.0] {
                    let p = sobolev_exponent::<f64>(n, None).unwrap().supremal();
                    if let Ok(h) = holder_exponents(k, 1.0, beta, p) {
                        assert!(h.small_exponent, "n={n} beta={beta} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn sweep_random_grid_is_clean() {
        let tuples = random_tuples::<f64>(7, 20_000, &[1, 3, 4, 5, 10], (1.0, 4.0), (1.0, 4.0), (1.0, 12.0));
        let report = sweep_equivalence(tuples);
        assert!(report.checked > 5_000, "only {} admissible", report.checked);
        assert!(
            report.clean(),
            "counterexamples: {:?}",
            &report.counterexamples[..report.counterexamples.len().min(3)]
        );
    }

    #[test]
    fn threshold_monotonicity() {
        // non-increasing in n (n >= 3), increasing in beta
        for beta in [1.0, 1.7, 3.2] {
            let mut prev = classify::<f64>(3, 1.0, beta).unwrap().threshold;
            for n in 4..=12 {
                let t = classify::<f64>(n, 1.0, beta).unwrap().threshold;
                assert!(t <= prev + 1e-15, "n={n} beta={beta}");
                prev = t;
            }
        }
        for n in [1u32, 2, 3, 5] {
            let mut prev = classify::<f64>(n, 1.0, 1.0).unwrap().threshold;
            for ib in 1..=10 {
                let beta = 1.0 + 0.5 * f64::from(ib);
                let t = classify::<f64>(n, 1.0, beta).unwrap().threshold;
                assert!(t > prev, "n={n} beta={beta}");
                prev = t;
            }
        }
    }

    #[test]
    fn regime_report_serializes_infinity() {
        let r = classify::<f64>(1, 1.5, 1.0).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"p\":\"inf\""), "{json}");
        let back: RegimeReport<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
