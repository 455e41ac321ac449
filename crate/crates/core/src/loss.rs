//! Asymmetric multi-label loss with probability shifting on negatives.
//!
//! Per label with `p = σ(z)`:
//!
//! * positive: `ℓ = −(1 − p)^γ₊ · ln p`
//! * negative: `p_m = max(p − m, 0)`, `ℓ = −p_m^γ₋ · ln(1 − p_m)`
//!
//! and the total is the sum over labels.

use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AslConfig {
    pub gamma_pos: f64,
    pub gamma_neg: f64,
    /// Probability margin subtracted from negatives.
    pub margin: f64,
}

impl Default for AslConfig {
    fn default() -> Self {
        Self { gamma_pos: 0.0, gamma_neg: 1.0, margin: 0.0 }
    }
}

impl AslConfig {
    /// Plain binary cross-entropy.
    pub const BCE: AslConfig = AslConfig { gamma_pos: 0.0, gamma_neg: 0.0, margin: 0.0 };

    /// Non-negative parameters with `gamma_neg >= gamma_pos`.
    pub fn is_valid(&self) -> bool {
        self.gamma_pos >= 0.0 && self.gamma_neg >= self.gamma_pos && self.margin >= 0.0
    }
}

/// Logistic function, stable for any finite `z`.
pub fn sigmoid(z: f64) -> f64 {
    math::sigmoid(z)
}

/// `x^γ` with `0^0 = 1`.
fn pow(x: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        math::powf(x, gamma)
    }
}

/// Loss and `dℓ/dz` for one label.
pub fn asl_term(z: f64, positive: bool, cfg: &AslConfig) -> (f64, f64) {
    let p = sigmoid(z);
    let q = sigmoid(-z);
    if positive {
        // ln σ(z) = −softplus(−z)
        let log_p = -math::softplus(-z);
        let focus = pow(q, cfg.gamma_pos);
        let loss = -focus * log_p;
        // d/dz of −q^γ ln p with dp/dz = pq: q^γ (γ p ln p − q).
        let grad = focus * (cfg.gamma_pos * p * log_p - q);
        (loss, grad)
    } else {
        let pm = p - cfg.margin;
        if pm <= 0.0 {
            return (0.0, 0.0);
        }
        // ratio = q / (1 − p_m), exactly 1 without a margin even when q
        // underflows.
        let (ratio, log_one_minus) = if cfg.margin == 0.0 {
            (1.0, -math::softplus(z))
        } else {
            let v = q + cfg.margin;
            (q / v, math::ln(v))
        };
        let focus = pow(pm, cfg.gamma_neg);
        let loss = -focus * log_one_minus;
        // dℓ/dp_m = p_m^γ (1/(1−p_m) − γ ln(1−p_m)/p_m), dp_m/dz = pq.
        let mut grad = ratio;
        if cfg.gamma_neg != 0.0 {
            grad -= cfg.gamma_neg * log_one_minus * q / pm;
        }
        (loss, focus * p * grad)
    }
}

/// Summed loss over labels and its gradient with respect to the logits.
pub fn asl(logits: &[f64], labels: &[bool], cfg: &AslConfig) -> (f64, Vec<f64>) {
    debug_assert_eq!(logits.len(), labels.len());
    let mut total = 0.0;
    let grads = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let (l, g) = asl_term(z, y, cfg);
            total += l;
            g
        })
        .collect();
    (total, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.7310585786).abs() < 1e-9);
        let big = sigmoid(800.0);
        assert!(big.is_finite() && big <= 1.0);
        let small = sigmoid(-800.0);
        assert!(small.is_finite() && small >= 0.0);
    }

    #[test]
    fn hand_evaluated_losses() {
        let (l, _) = asl(&[0.0], &[true], &AslConfig::BCE);
        assert!((l - core::f64::consts::LN_2).abs() < 1e-12);
        let cfg = AslConfig { gamma_pos: 0.0, gamma_neg: 1.0, margin: 0.0 };
        let (l, _) = asl(&[0.0], &[false], &cfg);
        assert!((l - core::f64::consts::LN_2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn margin_clamp_zeroes_negative_term() {
        let cfg = AslConfig { gamma_pos: 0.0, gamma_neg: 1.0, margin: 0.08 };
        let (l, g) = asl(&[-10.0], &[false], &cfg);
        assert_eq!(l, 0.0);
        assert_eq!(g, alloc::vec![0.0]);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        for cfg in [AslConfig::BCE, AslConfig::default(), AslConfig { gamma_pos: 1.0, gamma_neg: 4.0, margin: 0.05 }] {
            for z in [-900.0, -500.0, -40.0, 40.0, 500.0, 900.0] {
                for y in [true, false] {
                    let (l, g) = asl_term(z, y, &cfg);
                    assert!(l.is_finite() && l >= 0.0, "z={z} y={y}");
                    assert!(g.is_finite(), "z={z} y={y}");
                }
            }
        }
    }

    #[test]
    fn config_validity() {
        assert!(AslConfig::default().is_valid());
        assert!(!AslConfig { gamma_pos: 2.0, gamma_neg: 1.0, margin: 0.0 }.is_valid());
    }
}
