//! Binomial tails, the prior scenario sample size, the posterior confidence
//! equation and the sample-size planner.
//!
//! Everything runs in log space: `N` reaches the millions, where binomial
//! coefficients and the posterior terms leave double range long before the
//! quantities we compare do.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{u_of_r, SampleSpace};

/// `ln C(n, k)`. Exact zero on the edges.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n, "ln_binomial: k > n");
    if k == 0 || k == n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// `ln Σ exp(v)` over the iterator; `-inf` when empty.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn check_probability(name: &str, t: f64, closed: bool) -> Result<()> {
    let ok = if closed {
        (0.0..=1.0).contains(&t)
    } else {
        t > 0.0 && t < 1.0
    };
    if ok {
        Ok(())
    } else {
        let range = if closed { "[0, 1]" } else { "(0, 1)" };
        Err(Error::Domain(format!("{name} = {t} outside {range}")))
    }
}

/// `ln B_N(t; m)` where `B_N(t; m) = Σ_{i=0}^{m} C(N,i) tⁱ (1-t)^{N-i}`.
pub fn ln_binom_tail(n: u64, m: u64, t: f64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("tail index m = {m} exceeds N = {n}")));
    }
    check_probability("t", t, true)?;
    if m == n || t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (lt, l1t) = (t.ln(), (-t).ln_1p());
    let v = log_sum_exp((0..=m).map(|i| ln_binomial(n, i) + i as f64 * lt + (n - i) as f64 * l1t));
    Ok(v.min(0.0))
}

/// `B_N(t; m)`, the probability of at most `m` successes in `N` trials.
pub fn binom_tail(n: u64, m: u64, t: f64) -> Result<f64> {
    ln_binom_tail(n, m, t).map(f64::exp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorInputs {
    pub eps: f64,
    pub beta: f64,
    /// Number of decision variables.
    pub dim: u64,
}

impl PriorInputs {
    pub fn validate(&self) -> Result<()> {
        check_probability("eps", self.eps, false)?;
        check_probability("beta", self.beta, false)
    }

    /// Whether `N` samples give violation level `eps` with confidence `1 - beta`.
    pub fn holds_at(&self, n: u64) -> Result<bool> {
        if n < self.dim {
            return Ok(false);
        }
        Ok(ln_binom_tail(n, self.dim, self.eps)? <= self.beta.ln())
    }
}

/// Smallest `N` with `B_N(eps; dim) <= beta`.
pub fn prior_sample_size(inputs: &PriorInputs) -> Result<u64> {
    inputs.validate()?;
    // the tail is 1 for N <= dim, so the predicate first holds strictly above it
    let mut lo = inputs.dim;
    let mut step = 1u64;
    let mut hi = lo + step;
    while !inputs.holds_at(hi)? {
        lo = hi;
        step = step.saturating_mul(2);
        hi = lo.saturating_add(step);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if inputs.holds_at(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorInputs {
    /// Scenario samples.
    pub n: u64,
    /// Validation samples.
    pub n0: u64,
    /// Upper bound on the number of support constraints.
    pub n_star: u64,
    /// Violations observed on the validation set.
    pub r: u64,
    pub beta: f64,
}

impl PosteriorInputs {
    pub fn validate(&self) -> Result<()> {
        if self.n_star > self.n {
            return Err(Error::Domain(format!(
                "support count {} exceeds N = {}",
                self.n_star, self.n
            )));
        }
        if self.r > self.n0 {
            return Err(Error::Domain(format!(
                "violation count {} exceeds N0 = {}",
                self.r, self.n0
            )));
        }
        check_probability("beta", self.beta, false)
    }
}

/// The left-hand side of the posterior equation as `first - second`, kept as
/// two logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorValue {
    pub ln_first: f64,
    pub ln_second: f64,
}

impl PosteriorValue {
    pub fn sign(&self) -> Ordering {
        self.ln_first
            .partial_cmp(&self.ln_second)
            .unwrap_or(Ordering::Equal)
    }

    /// The plain difference; may over- or underflow.
    pub fn value(&self) -> f64 {
        self.ln_first.exp() - self.ln_second.exp()
    }
}

/// Posterior equation with the κ-independent parts precomputed.
#[derive(Debug, Clone)]
pub struct PosteriorEquation {
    inputs: PosteriorInputs,
    /// `ln C(i, N*)` for `i = N*..=N`.
    ln_choose: Vec<f64>,
    ln_prefactor: f64,
    ln_choose_n: f64,
}

impl PosteriorEquation {
    pub fn new(inputs: PosteriorInputs) -> Result<Self> {
        inputs.validate()?;
        let ln_choose = (inputs.n_star..=inputs.n)
            .map(|i| ln_binomial(i, inputs.n_star))
            .collect();
        Ok(Self {
            inputs,
            ln_choose,
            ln_prefactor: inputs.beta.ln() - ((inputs.n + 1) as f64).ln(),
            ln_choose_n: ln_binomial(inputs.n, inputs.n_star),
        })
    }

    pub fn inputs(&self) -> &PosteriorInputs {
        &self.inputs
    }

    /// `g(κ) = β/(N+1) Σ_{i=N*}^{N} C(i,N*) κ^{i-N} - C(N,N*) B_{N0}(1-κ; R)`.
    pub fn eval(&self, kappa: f64) -> Result<PosteriorValue> {
        check_probability("kappa", kappa, false)?;
        let PosteriorInputs { n, n_star, n0, r, .. } = self.inputs;
        let ln_inv = -kappa.ln();
        let sum = log_sum_exp(
            self.ln_choose
                .iter()
                .enumerate()
                .map(|(k, lc)| lc + (n - (n_star + k as u64)) as f64 * ln_inv),
        );
        Ok(PosteriorValue {
            ln_first: self.ln_prefactor + sum,
            ln_second: self.ln_choose_n + ln_binom_tail(n0, r, 1.0 - kappa)?,
        })
    }

    /// Root of `g` by bisection. Returns the lower end of the final bracket,
    /// which never overstates the confidence level.
    pub fn solve(&self) -> Result<f64> {
        let (mut lo, mut hi) = (KAPPA_LO, KAPPA_HI);
        let s_lo = self.eval(lo)?.sign();
        let s_hi = self.eval(hi)?.sign();
        if s_lo != Ordering::Greater || s_hi != Ordering::Less {
            return Err(Error::NoSignChange {
                lo_sign: sign_name(s_lo),
                hi_sign: sign_name(s_hi),
            });
        }
        for _ in 0..200 {
            if hi - lo <= 1e-10 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            match self.eval(mid)?.sign() {
                Ordering::Greater => lo = mid,
                Ordering::Less => hi = mid,
                Ordering::Equal => return Ok(mid),
            }
        }
        Ok(lo)
    }
}

const KAPPA_LO: f64 = 1e-12;
const KAPPA_HI: f64 = 1.0 - 1e-12;

fn sign_name(s: Ordering) -> &'static str {
    match s {
        Ordering::Greater => "positive",
        Ordering::Less => "negative",
        Ordering::Equal => "zero",
    }
}

pub fn posterior_g(kappa: f64, inputs: &PosteriorInputs) -> Result<PosteriorValue> {
    PosteriorEquation::new(*inputs)?.eval(kappa)
}

/// Confidence level κ* solving the posterior equation.
pub fn solve_kappa(inputs: &PosteriorInputs) -> Result<f64> {
    PosteriorEquation::new(*inputs)?.solve()
}

/// Pilot-run estimates fed to the planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerEstimates {
    pub k_hat: f64,
    pub n_star_hat: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOptions {
    pub growth: f64,
    /// Give up beyond this many scenario samples.
    pub max_n: u64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            growth: 1.5,
            max_n: 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub n: u64,
    pub n0: u64,
    pub r_hat: u64,
    /// Smallest κ that would certify the estimated optimum.
    pub kappa_threshold: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n: u64,
    pub n0: u64,
    pub steps: Vec<PlanStep>,
}

/// Expected violations on `n0` validation samples, rounded to nearest with
/// ties going up.
pub fn estimated_violations(n: u64, n0: u64, n_star_hat: u64) -> u64 {
    (n0 as f64 * n_star_hat as f64 / n as f64 + 0.5).floor() as u64
}

/// Checks one candidate pair with an explicit violation estimate.
pub fn plan_check(
    n: u64,
    n0: u64,
    r_hat: u64,
    est: &PlannerEstimates,
    lipschitz: f64,
    space: &SampleSpace,
    beta: f64,
) -> Result<PlanStep> {
    let kappa_threshold = 1.0 - u_of_r(-est.k_hat / lipschitz, space)?;
    let passes = if kappa_threshold <= 0.0 {
        true
    } else {
        let inputs = PosteriorInputs {
            n,
            n0,
            n_star: est.n_star_hat.min(n),
            r: r_hat.min(n0),
            beta,
        };
        posterior_g(kappa_threshold, &inputs)?.sign() != Ordering::Less
    };
    Ok(PlanStep {
        n,
        n0,
        r_hat,
        kappa_threshold,
        passes,
    })
}

/// Grows `(N, N0)` geometrically from the starting pair until the estimated
/// optimum would be certified at the posterior confidence level.
pub fn plan_sample_sizes(
    est: &PlannerEstimates,
    lipschitz: f64,
    space: &SampleSpace,
    beta: f64,
    start: (u64, u64),
    opts: &PlannerOptions,
) -> Result<SamplePlan> {
    if !(est.k_hat < 0.0) {
        return Err(Error::Planner(format!(
            "estimated optimum not strictly negative (K = {})",
            est.k_hat
        )));
    }
    if !(lipschitz > 0.0) {
        return Err(Error::Planner(format!("Lipschitz constant must be positive, got {lipschitz}")));
    }
    if !(opts.growth > 1.0) {
        return Err(Error::Planner(format!("growth factor must exceed 1, got {}", opts.growth)));
    }
    check_probability("beta", beta, false)?;
    let (mut n, mut n0) = (start.0.max(1), start.1.max(1));
    let mut steps = Vec::new();
    while n <= opts.max_n {
        let r_hat = estimated_violations(n, n0, est.n_star_hat);
        let step = plan_check(n, n0, r_hat, est, lipschitz, space, beta)?;
        steps.push(step);
        if step.passes {
            return Ok(SamplePlan { n, n0, steps });
        }
        n = grow(n, opts.growth);
        n0 = grow(n0, opts.growth);
    }
    Err(Error::Planner(format!(
        "no sample size up to {} passes the posterior check",
        opts.max_n
    )))
}

fn grow(v: u64, factor: f64) -> u64 {
    ((v as f64 * factor).ceil() as u64).max(v + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HyperRect;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn room_space() -> SampleSpace {
        SampleSpace::new(HyperRect::new(vec![22.5, 0.0], vec![26.5, 1.0]).unwrap()).unwrap()
    }

    fn exact_tail(n: u64, m: u64, t: &BigRational) -> BigRational {
        let one = BigRational::one();
        let mut total = BigRational::zero();
        let mut choose = BigInt::one();
        for i in 0..=m {
            if i > 0 {
                choose = choose * BigInt::from(n - i + 1) / BigInt::from(i);
            }
            let term = BigRational::from_integer(choose.clone())
                * num_traits::pow(t.clone(), i as usize)
                * num_traits::pow(&one - t, (n - i) as usize);
            total += term;
        }
        total
    }

    #[test]
    fn tail_matches_exact_rationals() {
        for n in 1..=60u64 {
            for tenth in 1..=9i64 {
                let t = BigRational::new(BigInt::from(tenth), BigInt::from(10));
                for m in 0..=n {
                    let exact = exact_tail(n, m, &t).to_f64().unwrap();
                    let got = binom_tail(n, m, tenth as f64 / 10.0).unwrap();
                    let rel = (got - exact).abs() / exact;
                    assert!(rel < 1e-12, "N={n} m={m} t={tenth}/10: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn tail_edges() {
        assert_eq!(binom_tail(7, 7, 0.3).unwrap(), 1.0);
        assert!((binom_tail(1, 0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        assert!((binom_tail(5, 2, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(binom_tail(5, 2, 0.0).unwrap(), 1.0);
        assert_eq!(binom_tail(5, 2, 1.0).unwrap(), 0.0);
        assert!(binom_tail(5, 6, 0.5).is_err());
        assert!(binom_tail(5, 2, 1.5).is_err());
    }

    #[test]
    fn tail_monotonicity() {
        for n in [5u64, 40, 1000] {
            for m in 0..n.min(30) {
                for k in 1..40 {
                    let t = k as f64 / 41.0;
                    let here = binom_tail(n, m, t).unwrap();
                    assert!(binom_tail(n, m + 1, t).unwrap() >= here);
                    let (a, b) = (
                        ln_binom_tail(n, m, t).unwrap(),
                        ln_binom_tail(n, m, t + 0.01).unwrap(),
                    );
                    // strict only where the tail is distinguishable from 1
                    if a < -1e-12 {
                        assert!(b < a, "N={n} m={m} t={t}");
                    } else {
                        assert!(b <= a);
                    }
                }
            }
        }
    }

    #[test]
    fn prior_closed_form_for_dim_zero() {
        let inputs = PriorInputs {
            eps: 0.1,
            beta: 0.5,
            dim: 0,
        };
        assert_eq!(prior_sample_size(&inputs).unwrap(), 7);
        for (eps, beta) in [(0.01, 0.05), (0.2, 0.001), (1e-4, 0.3)] {
            let inputs = PriorInputs { eps, beta, dim: 0 };
            let closed = (beta.ln() / (1.0 - eps as f64).ln()).ceil() as u64;
            assert_eq!(prior_sample_size(&inputs).unwrap(), closed);
        }
    }

    #[test]
    fn prior_is_minimal() {
        for dim in [0u64, 1, 3, 13, 40] {
            for (eps, beta) in [(0.1, 0.05), (0.01, 1e-6), (0.3, 0.5), (1e-3, 0.01)] {
                let inputs = PriorInputs { eps, beta, dim };
                let n = prior_sample_size(&inputs).unwrap();
                assert!(inputs.holds_at(n).unwrap());
                assert!(!inputs.holds_at(n - 1).unwrap());
            }
        }
    }

    #[test]
    fn prior_room_case_magnitude() {
        let inputs = PriorInputs {
            eps: 7.492e-6,
            beta: 0.05,
            dim: 13,
        };
        let n = prior_sample_size(&inputs).unwrap();
        assert!(inputs.holds_at(n).unwrap() && !inputs.holds_at(n - 1).unwrap());
        assert!((2_600_000..2_900_000).contains(&n), "{n}");
    }

    fn direct_g(kappa: f64, p: &PosteriorInputs) -> f64 {
        let choose = |n: u64, k: u64| -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        };
        let first: f64 = (p.n_star..=p.n)
            .map(|i| choose(i, p.n_star) * kappa.powi(i as i32 - p.n as i32))
            .sum::<f64>()
            * p.beta
            / (p.n + 1) as f64;
        let t = 1.0 - kappa;
        let tail: f64 = (0..=p.r)
            .map(|i| choose(p.n0, i) * t.powi(i as i32) * kappa.powi((p.n0 - i) as i32))
            .sum();
        first - choose(p.n, p.n_star) * tail
    }

    const SMALL: PosteriorInputs = PosteriorInputs {
        n: 3,
        n0: 2,
        n_star: 1,
        r: 0,
        beta: 0.1,
    };

    #[test]
    fn posterior_small_case_matches_direct_sum() {
        let v = posterior_g(0.9, &SMALL).unwrap();
        assert!((v.value() - direct_g(0.9, &SMALL)).abs() < 1e-12);
        for k in 1..100 {
            let kappa = k as f64 / 100.0;
            let v = posterior_g(kappa, &SMALL).unwrap().value();
            assert!((v - direct_g(kappa, &SMALL)).abs() < 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn posterior_limit_case() {
        // N* = 0, R = N0: second term is exactly 1, first tends to beta
        let p = PosteriorInputs {
            n: 10,
            n0: 4,
            n_star: 0,
            r: 4,
            beta: 0.2,
        };
        let v = posterior_g(1.0 - 1e-9, &p).unwrap();
        assert_eq!(v.ln_second, 0.0);
        assert!((v.ln_first.exp() - 0.2).abs() < 1e-6);
        assert_eq!(v.sign(), Ordering::Less);
    }

    #[test]
    fn posterior_decreasing_in_kappa() {
        for p in [
            SMALL,
            PosteriorInputs { n: 50, n0: 20, n_star: 3, r: 2, beta: 0.05 },
            PosteriorInputs { n: 2000, n0: 1000, n_star: 2, r: 1, beta: 0.01 },
        ] {
            let eq = PosteriorEquation::new(p).unwrap();
            let mut prev = f64::INFINITY;
            for k in 1..1000 {
                let v = eq.eval(k as f64 / 1000.0).unwrap().value();
                assert!(v <= prev + 1e-12 * prev.abs(), "{p:?} at {k}");
                prev = v;
            }
        }
    }

    #[test]
    fn bisection_matches_dense_scan() {
        let eq = PosteriorEquation::new(SMALL).unwrap();
        let root = eq.solve().unwrap();
        let steps = 2_000_000;
        let mut scan = None;
        for k in 1..steps {
            let kappa = k as f64 / steps as f64;
            if direct_g(kappa, &SMALL) < 0.0 {
                scan = Some(kappa);
                break;
            }
        }
        let scan = scan.unwrap();
        // refine the scan bracket with the direct oracle
        let (mut lo, mut hi) = (scan - 1.0 / steps as f64, scan);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if direct_g(mid, &SMALL) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((root - lo).abs() < 1e-8, "{root} vs {lo}");
    }

    #[test]
    fn room_case_kappa() {
        let p = PosteriorInputs {
            n: 140_000,
            n0: 70_000,
            n_star: 1,
            r: 0,
            beta: 0.05,
        };
        let kappa = solve_kappa(&p).unwrap();
        assert!((kappa - 0.9999723).abs() < 1e-6, "{kappa}");
    }

    #[test]
    fn vacuous_inputs_report_signs() {
        // beta/(N+1) * C(N,N) = beta/(N+1) < 1 = second term everywhere
        let p = PosteriorInputs {
            n: 4,
            n0: 3,
            n_star: 4,
            r: 3,
            beta: 0.5,
        };
        match solve_kappa(&p) {
            Err(Error::NoSignChange { lo_sign, hi_sign }) => {
                assert_eq!((lo_sign, hi_sign), ("negative", "negative"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kappa_monotone_on_small_grid() {
        for n in [20u64, 60] {
            for n0 in [10u64, 30] {
                let mut by_r = Vec::new();
                for r in 0..=5 {
                    let p = PosteriorInputs { n, n0, n_star: 1, r, beta: 0.05 };
                    by_r.push(solve_kappa(&p).unwrap());
                }
                assert!(by_r.windows(2).all(|w| w[1] <= w[0]), "{by_r:?}");
                let mut by_star = Vec::new();
                for n_star in 0..=4 {
                    let p = PosteriorInputs { n, n0, n_star, r: 1, beta: 0.05 };
                    by_star.push(solve_kappa(&p).unwrap());
                }
                assert!(by_star.windows(2).all(|w| w[1] <= w[0]), "{by_star:?}");
            }
        }
        let by_n: Vec<f64> = [10u64, 20, 40, 80, 160]
            .iter()
            .map(|&n| solve_kappa(&PosteriorInputs { n, n0: 20, n_star: 2, r: 1, beta: 0.05 }).unwrap())
            .collect();
        assert!(by_n.windows(2).all(|w| w[1] >= w[0]), "{by_n:?}");
    }

    proptest! {
        #[test]
        fn single_sign_change(
            n in 1u64..80,
            n0 in 1u64..40,
            star_frac in 0.0f64..1.0,
            r_frac in 0.0f64..1.0,
            beta in 0.001f64..0.5,
        ) {
            let p = PosteriorInputs {
                n,
                n0,
                n_star: (star_frac * n as f64) as u64,
                r: (r_frac * n0 as f64) as u64,
                beta,
            };
            let eq = PosteriorEquation::new(p).unwrap();
            let signs: Vec<Ordering> = (1..400)
                .map(|k| eq.eval(k as f64 / 400.0).unwrap().sign())
                .filter(|s| *s != Ordering::Equal)
                .collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            prop_assert!(changes <= 1);
        }
    }

    #[test]
    fn planner_room_estimates() {
        let space = room_space();
        let est = PlannerEstimates {
            k_hat: -0.149,
            n_star_hat: 1,
        };
        // with the estimate R = 0 the pair certifies
        let step = plan_check(140_000, 70_000, 0, &est, 11.63, &space, 0.05).unwrap();
        assert!(step.passes);
        assert!((step.kappa_threshold - (1.0 - 3.2232e-5)).abs() < 1e-8);
        // 70000 / 140000 = 0.5 rounds up to one violation, which does not
        assert_eq!(estimated_violations(140_000, 70_000, 1), 1);
        let step = plan_check(140_000, 70_000, 1, &est, 11.63, &space, 0.05).unwrap();
        assert!(!step.passes);
        let plan =
            plan_sample_sizes(&est, 11.63, &space, 0.05, (140_000, 70_000), &PlannerOptions::default())
                .unwrap();
        assert!(plan.n > 140_000 && plan.steps.last().unwrap().passes);
        assert!(plan.steps[..plan.steps.len() - 1].iter().all(|s| !s.passes));
    }

    #[test]
    fn planner_doubling_keeps_passing() {
        let space = room_space();
        let est = PlannerEstimates {
            k_hat: -0.3,
            n_star_hat: 2,
        };
        let plan =
            plan_sample_sizes(&est, 11.63, &space, 0.05, (1000, 500), &PlannerOptions::default()).unwrap();
        for mult in [2u64, 4, 8] {
            let (n, n0) = (plan.n * mult, plan.n0 * mult);
            let r = estimated_violations(n, n0, 2);
            assert!(plan_check(n, n0, r, &est, 11.63, &space, 0.05).unwrap().passes);
        }
    }

    #[test]
    fn planner_huge_margin_passes_immediately() {
        let est = PlannerEstimates {
            k_hat: -1e6,
            n_star_hat: 3,
        };
        let plan = plan_sample_sizes(&est, 11.63, &room_space(), 0.05, (2, 1), &PlannerOptions::default())
            .unwrap();
        assert_eq!((plan.n, plan.n0), (2, 1));
        assert!(plan.steps[0].kappa_threshold <= 0.0);
    }

    #[test]
    fn planner_rejects_nonnegative_estimate() {
        let est = PlannerEstimates {
            k_hat: 0.0,
            n_star_hat: 1,
        };
        let err = plan_sample_sizes(&est, 11.63, &room_space(), 0.05, (100, 50), &PlannerOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("not strictly negative"));
    }
}
