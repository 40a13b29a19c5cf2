//! Semantic-layer model: BLEU score as a function of the extraction ratio,
//! the induced lower bound on the ratio, semantic transmission rate, and the
//! computation/transmit power ledger.

use crate::error::{IsscError, Result};
use crate::scalar::Scalar;

/// Per-user n-gram similarity profile plus the shared quality floor.
///
/// The BLEU model here is closed form: brevity penalty `e^{1 - 1/rho}` times
/// `exp(sum_g w_g ln p_g)`. Natural logarithms are used throughout so that the
/// quality floor inverts exactly (see [`SemanticProfile::rho_lower_bound`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticProfile<T> {
    weights: Vec<T>,
    precisions: Vec<T>,
    quality_floor: T,
}

impl<T: Scalar> SemanticProfile<T> {
    /// Validates and builds a profile. Requirements: equal non-empty weight
    /// and precision lists, non-negative weights summing to one, precisions
    /// and quality floor in (0, 1], and `ln Q <= sum_g w_g ln p_g` so a
    /// feasible extraction ratio exists.
    pub fn new(weights: Vec<T>, precisions: Vec<T>, quality_floor: T) -> Result<Self> {
        if weights.is_empty() || weights.len() != precisions.len() {
            return Err(IsscError::domain(format!(
                "profile needs matching non-empty weights/precisions, got {} and {}",
                weights.len(),
                precisions.len()
            )));
        }
        if weights.iter().any(|w| *w < T::zero()) {
            return Err(IsscError::domain("n-gram weights must be non-negative"));
        }
        let sum: T = weights.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(1e-12) {
            return Err(IsscError::domain(format!(
                "n-gram weights must sum to 1, got {sum}"
            )));
        }
        if precisions.iter().any(|p| *p <= T::zero() || *p > T::one()) {
            return Err(IsscError::domain("precisions must lie in (0, 1]"));
        }
        if quality_floor <= T::zero() || quality_floor > T::one() {
            return Err(IsscError::domain("quality floor must lie in (0, 1]"));
        }
        let profile = Self {
            weights,
            precisions,
            quality_floor,
        };
        let wlp = profile.weighted_log_precision();
        if quality_floor.ln() > wlp {
            return Err(IsscError::domain(format!(
                "infeasible profile: ln(quality floor) = {} exceeds weighted log precision = {}; \
                 no extraction ratio in (0, 1] can reach the floor",
                quality_floor.ln(),
                wlp
            )));
        }
        Ok(profile)
    }

    /// Uniform weights over `n_grams`, one shared precision value.
    pub fn uniform(n_grams: usize, precision: T, quality_floor: T) -> Result<Self> {
        let w = T::one() / T::of(n_grams as f64);
        Self::new(vec![w; n_grams], vec![precision; n_grams], quality_floor)
    }

    pub fn n_grams(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn precisions(&self) -> &[T] {
        &self.precisions
    }

    pub fn quality_floor(&self) -> T {
        self.quality_floor
    }

    /// `sum_g w_g ln p_g` (non-positive).
    pub fn weighted_log_precision(&self) -> T {
        self.weights
            .iter()
            .zip(self.precisions.iter())
            .map(|(w, p)| *w * p.ln())
            .sum()
    }

    /// BLEU score at extraction ratio `rho` in (0, 1].
    pub fn bleu(&self, rho: T) -> Result<T> {
        if rho <= T::zero() {
            return Err(IsscError::domain(format!(
                "extraction ratio must be positive, got {rho}"
            )));
        }
        let bp = (T::one() - T::one() / rho).exp();
        Ok(bp * self.weighted_log_precision().exp())
    }

    /// Smallest extraction ratio that still meets the quality floor:
    /// `1 / (1 - ln Q + sum_g w_g ln p_g)`.
    pub fn rho_lower_bound(&self) -> Result<T> {
        let wlp = self.weighted_log_precision();
        let ln_q = self.quality_floor.ln();
        if ln_q > wlp {
            return Err(IsscError::domain(format!(
                "infeasible profile: ln(quality floor) = {ln_q} exceeds weighted log precision = {wlp}"
            )));
        }
        Ok(T::one() / (T::one() - ln_q + wlp))
    }
}

/// Semantic transmission rate `(1/rho) log2(1 + sinr)` in bits/s/Hz.
pub fn semantic_rate<T: Scalar>(rho: T, sinr: T) -> Result<T> {
    if rho <= T::zero() {
        return Err(IsscError::domain(format!(
            "extraction ratio must be positive, got {rho}"
        )));
    }
    Ok((T::one() + sinr).log2() / rho)
}

/// Total extraction computation power `sum_k F ln(1/rho_k)` in mW.
pub fn computation_power<T: Scalar>(coeff_f: T, rhos: &[T]) -> Result<T> {
    let mut total = T::zero();
    for &rho in rhos {
        if rho <= T::zero() || rho > T::one() {
            return Err(IsscError::domain(format!(
                "extraction ratio must lie in (0, 1], got {rho}"
            )));
        }
        total += coeff_f * (T::one() / rho).ln();
    }
    Ok(total)
}

/// Computation vs transmit power accounting against the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLedger<T> {
    /// Semantic extraction computation power (mW).
    pub comp_mw: T,
    /// Communication-and-sensing radiated power (mW).
    pub cands_mw: T,
    /// Total budget (mW).
    pub budget_mw: T,
}

impl<T: Scalar> PowerLedger<T> {
    pub fn new(comp_mw: T, cands_mw: T, budget_mw: T) -> Self {
        Self {
            comp_mw,
            cands_mw,
            budget_mw,
        }
    }

    /// True iff `comp + c&s <= budget` within a 1e-9 mW slack.
    pub fn within_budget(&self) -> bool {
        self.comp_mw + self.cands_mw <= self.budget_mw + T::of(1e-9)
    }
}

/// Free-function form of [`PowerLedger::within_budget`].
pub fn power_check<T: Scalar>(ledger: &PowerLedger<T>) -> bool {
    ledger.within_budget()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn profile_08() -> SemanticProfile<f64> {
        SemanticProfile::<f64>::uniform(4, 0.8, 0.5).unwrap()
    }

    #[test]
    fn bleu_perfect_precision_at_rho_one() {
        let p = SemanticProfile::<f64>::uniform(3, 1.0, 0.5).unwrap();
        assert!((p.bleu(1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bleu_uniform_quarter_weights() {
        // exp(sum 0.25 ln 0.8) = 0.8 at rho = 1.
        let p = profile_08();
        assert!((p.bleu(1.0).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn bleu_vanishes_as_rho_goes_to_zero() {
        let p = profile_08();
        assert!(p.bleu(1e-3).unwrap() < 1e-300);
    }

    #[test]
    fn bleu_rejects_nonpositive_rho() {
        let p = profile_08();
        assert!(p.bleu(0.0).is_err());
        assert!(p.bleu(-0.5).is_err());
    }

    #[test]
    fn rho_bound_is_one_when_floor_equals_precision() {
        // ln Q = sum w ln p  =>  bound = 1.
        let p = SemanticProfile::<f64>::uniform(2, 0.9, 0.9).unwrap();
        assert!((p.rho_lower_bound().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rho_bound_matches_hand_computation() {
        // Q = 0.5, sum w ln p = ln 0.9 => 1/(1 - ln 0.5 + ln 0.9) ~= 0.6298.
        let p = SemanticProfile::<f64>::uniform(4, 0.9, 0.5).unwrap();
        let bound = p.rho_lower_bound().unwrap();
        assert!((bound - 0.629_807_531_518_502_9).abs() < 1e-9, "bound {bound}");
        let bleu = p.bleu(bound).unwrap();
        assert!((bleu - 0.5).abs() < 1e-9, "bleu at bound {bleu}");
    }

    #[test]
    fn rho_bound_shrinks_with_tiny_floor() {
        let p = SemanticProfile::<f64>::uniform(4, 0.9, 1e-9).unwrap();
        assert!(p.rho_lower_bound().unwrap() < 0.05);
    }

    #[test]
    fn infeasible_profile_is_rejected_with_message() {
        let err = SemanticProfile::<f64>::uniform(4, 0.3, 0.9).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("infeasible profile"), "message was: {msg}");
    }

    #[test]
    fn semantic_rate_examples() {
        assert!((semantic_rate(1.0f64, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((semantic_rate(0.5f64, 3.0).unwrap() - 4.0).abs() < 1e-12);
        let r = semantic_rate(0.629_807_531_518_502_9f64, 15.0).unwrap();
        assert!((r - 6.351_146_659_608_477).abs() < 1e-9, "rate {r}");
    }

    #[test]
    fn computation_power_examples() {
        assert_eq!(computation_power(10.0, &[1.0, 1.0]).unwrap(), 0.0);
        let one = computation_power(10.0, &[0.5]).unwrap();
        assert!((one - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let two = computation_power(10.0, &[0.5, 0.5]).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
        assert!(computation_power(10.0, &[0.0]).is_err());
    }

    #[test]
    fn power_check_examples() {
        let budget = 3.162_277_660_168_379_5; // 5 dBm
        assert!(power_check(&PowerLedger::new(0.0, 0.0, budget)));
        assert!(!power_check(&PowerLedger::new(6.93, 0.0, budget)));
        assert!(power_check(&PowerLedger::new(1.0, 2.0, budget)));
    }

    proptest! {
        /// BLEU is strictly increasing in rho on (0, 1].
        #[test]
        fn bleu_monotone_in_rho(
            precision in 0.05f64..1.0,
            floor_frac in 0.01f64..1.0,
            rho_a in 0.01f64..1.0,
            rho_b in 0.01f64..1.0,
        ) {
            let floor = (precision.powf(1.0)).min(1.0) * floor_frac;
            let p = SemanticProfile::uniform(4, precision, floor.max(1e-6)).unwrap();
            let (lo, hi) = if rho_a < rho_b { (rho_a, rho_b) } else { (rho_b, rho_a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(p.bleu(lo).unwrap() < p.bleu(hi).unwrap());
            prop_assert!(p.bleu(hi).unwrap() <= 1.0 + 1e-12);
        }

        /// bleu(rho_lower_bound) recovers the quality floor exactly.
        #[test]
        fn bound_round_trips_to_floor(
            precision in 0.05f64..1.0,
            floor_frac in 0.01f64..0.999,
        ) {
            let wlp = precision.ln(); // uniform weights keep sum w ln p = ln p
            let floor = (wlp.exp() * floor_frac).max(1e-12);
            let p = SemanticProfile::uniform(3, precision, floor).unwrap();
            let bound = p.rho_lower_bound().unwrap();
            prop_assert!(bound > 0.0 && bound <= 1.0 + 1e-12);
            let bleu = p.bleu(bound).unwrap();
            prop_assert!((bleu - floor).abs() < 1e-9 * floor.max(1e-3));
        }

        /// Rate scales linearly in 1/rho; computation power is additive.
        #[test]
        fn rate_and_power_identities(rho in 0.05f64..1.0, sinr in 0.0f64..1e4) {
            let r = semantic_rate(rho, sinr).unwrap();
            let base = semantic_rate(1.0, sinr).unwrap();
            prop_assert!((r - base / rho).abs() < 1e-9 * base.max(1.0));
            let p1 = computation_power(10.0, &[rho]).unwrap();
            let p2 = computation_power(10.0, &[rho, rho]).unwrap();
            prop_assert!((p2 - 2.0 * p1).abs() < 1e-9);
        }
    }
}
