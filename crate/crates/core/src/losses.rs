//! Binary surrogates `ℓ(z)` and the task surrogates built on top of them.
//!
//! Task surrogates take the margin vector `α` (`α_i = θ_i - f(x)`, length
//! `K - 1`) and a 1-based label. Gradients are with respect to `α`; the chain
//! rule to model parameters lives in [`crate::risk`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ordinal::{LabelSpace, TaskLoss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinarySurrogate {
    Logistic,
    Squared,
    Hinge,
    Exponential,
    DoubleHinge,
}

/// Points where the linear-odd condition is probed.
const LINEAR_ODD_PROBES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

impl BinarySurrogate {
    pub const ALL: [BinarySurrogate; 5] = [
        BinarySurrogate::Logistic,
        BinarySurrogate::Squared,
        BinarySurrogate::Hinge,
        BinarySurrogate::Exponential,
        BinarySurrogate::DoubleHinge,
    ];

    pub fn value(self, z: f64) -> f64 {
        match self {
            // log(1 + e^{-z}) without overflow for large |z|
            BinarySurrogate::Logistic => (-z).max(0.0) + (-z.abs()).exp().ln_1p(),
            BinarySurrogate::Squared => (1.0 - z) * (1.0 - z),
            BinarySurrogate::Hinge => (1.0 - z).max(0.0),
            BinarySurrogate::Exponential => (-z).exp(),
            BinarySurrogate::DoubleHinge => (-z).max((0.5 - 0.5 * z).max(0.0)),
        }
    }

    /// Derivative in `z`. Kinks use a fixed subgradient: hinge at 1 gives 0,
    /// double hinge gives -1 at -1 and 0 at 1.
    pub fn grad(self, z: f64) -> f64 {
        match self {
            BinarySurrogate::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
            BinarySurrogate::Squared => -2.0 * (1.0 - z),
            BinarySurrogate::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            BinarySurrogate::Exponential => -(-z).exp(),
            BinarySurrogate::DoubleHinge => {
                if z <= -1.0 {
                    -1.0
                } else if z < 1.0 {
                    -0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// Non-differentiable points of `ℓ`.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            BinarySurrogate::Hinge => &[1.0],
            BinarySurrogate::DoubleHinge => &[-1.0, 1.0],
            _ => &[],
        }
    }

    /// `C_ℓ > 0` such that `ℓ(z) - ℓ(-z) = -C_ℓ z`, if the loss is linear-odd.
    ///
    /// Checked numerically on `z ∈ {±0.1, ±0.5, ±1, ±2, ±5}` to 1e-9.
    pub fn linear_odd_constant(self) -> Option<f64> {
        let c = self.value(-1.0) - self.value(1.0);
        if c <= 0.0 {
            return None;
        }
        let holds = LINEAR_ODD_PROBES.iter().all(|&p| {
            [p, -p]
                .iter()
                .all(|&z| ((self.value(z) - self.value(-z)) + c * z).abs() <= 1e-9)
        });
        holds.then_some(c)
    }

    pub fn name(self) -> &'static str {
        match self {
            BinarySurrogate::Logistic => "logistic",
            BinarySurrogate::Squared => "squared",
            BinarySurrogate::Hinge => "hinge",
            BinarySurrogate::Exponential => "exponential",
            BinarySurrogate::DoubleHinge => "double-hinge",
        }
    }
}

impl fmt::Display for BinarySurrogate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BinarySurrogate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "logistic" => Ok(Self::Logistic),
            "squared" => Ok(Self::Squared),
            "hinge" => Ok(Self::Hinge),
            "exponential" => Ok(Self::Exponential),
            "double-hinge" => Ok(Self::DoubleHinge),
            other => Err(invalid("binary-loss", format!("unknown binary loss `{other}`"))),
        }
    }
}

/// Task surrogate `ψ(α, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskSurrogate {
    /// All threshold: `Σ_{i<y} ℓ(-α_i) + Σ_{i≥y} ℓ(α_i)`.
    AllThreshold(BinarySurrogate),
    /// Immediate threshold: `ℓ(-α_{y-1}) + ℓ(α_y)`, boundary terms dropped.
    ImmediateThreshold(BinarySurrogate),
    /// `(y + α_1 - 3/2)²`.
    LeastSquares,
    /// `|y + α_1 - 3/2|`.
    LeastAbsoluteDeviation,
}

impl TaskSurrogate {
    /// Builds a surrogate from its short name (`at`, `it`, `ls`, `lad`).
    /// `binary` is ignored for LS and LAD.
    pub fn from_names(kind: &str, binary: BinarySurrogate) -> Result<Self> {
        match kind.to_ascii_lowercase().as_str() {
            "at" => Ok(Self::AllThreshold(binary)),
            "it" => Ok(Self::ImmediateThreshold(binary)),
            "ls" => Ok(Self::LeastSquares),
            "lad" => Ok(Self::LeastAbsoluteDeviation),
            other => Err(invalid("surrogate", format!("unknown task surrogate `{other}`"))),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::AllThreshold(_) => "AT",
            Self::ImmediateThreshold(_) => "IT",
            Self::LeastSquares => "LS",
            Self::LeastAbsoluteDeviation => "LAD",
        }
    }

    pub fn binary(self) -> Option<BinarySurrogate> {
        match self {
            Self::AllThreshold(b) | Self::ImmediateThreshold(b) => Some(b),
            _ => None,
        }
    }

    /// Evaluation metric each surrogate stands in for.
    pub fn paired_metric(self) -> TaskLoss {
        match self {
            Self::AllThreshold(_) | Self::LeastAbsoluteDeviation => TaskLoss::Absolute,
            Self::ImmediateThreshold(_) => TaskLoss::ZeroOne,
            Self::LeastSquares => TaskLoss::Squared,
        }
    }

    pub fn value(self, alpha: &[f64], y: usize) -> Result<f64> {
        check_label(alpha, y)?;
        Ok(self.value_unchecked(alpha, y))
    }

    /// `∂ψ/∂α_i`; entries that do not appear in the formula are 0.
    pub fn grad_alpha(self, alpha: &[f64], y: usize) -> Result<Vec<f64>> {
        check_label(alpha, y)?;
        let mut out = vec![0.0; alpha.len()];
        self.accumulate_grad(alpha, y, 1.0, &mut out);
        Ok(out)
    }

    /// Caller guarantees `1 ≤ y ≤ alpha.len() + 1`.
    pub(crate) fn value_unchecked(self, alpha: &[f64], y: usize) -> f64 {
        match self {
            Self::AllThreshold(l) => all_threshold_with(alpha, y, |z| l.value(z)),
            Self::ImmediateThreshold(l) => {
                let mut v = 0.0;
                if y > 1 {
                    v += l.value(-alpha[y - 2]);
                }
                if y <= alpha.len() {
                    v += l.value(alpha[y - 1]);
                }
                v
            }
            Self::LeastSquares => {
                let r = y as f64 + alpha[0] - 1.5;
                r * r
            }
            Self::LeastAbsoluteDeviation => (y as f64 + alpha[0] - 1.5).abs(),
        }
    }

    /// Adds `scale · ∂ψ/∂α` into `out`.
    pub(crate) fn accumulate_grad(self, alpha: &[f64], y: usize, scale: f64, out: &mut [f64]) {
        match self {
            Self::AllThreshold(l) => {
                for (i, (&a, o)) in alpha.iter().zip(out.iter_mut()).enumerate() {
                    // 0-based i < y - 1 is the "label above threshold" block
                    if i + 1 < y {
                        *o -= scale * l.grad(-a);
                    } else {
                        *o += scale * l.grad(a);
                    }
                }
            }
            Self::ImmediateThreshold(l) => {
                if y > 1 {
                    out[y - 2] -= scale * l.grad(-alpha[y - 2]);
                }
                if y <= alpha.len() {
                    out[y - 1] += scale * l.grad(alpha[y - 1]);
                }
            }
            Self::LeastSquares => out[0] += scale * 2.0 * (y as f64 + alpha[0] - 1.5),
            Self::LeastAbsoluteDeviation => {
                let r = y as f64 + alpha[0] - 1.5;
                if r != 0.0 {
                    out[0] += scale * r.signum();
                }
            }
        }
    }
}

impl fmt::Display for TaskSurrogate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.binary() {
            Some(b) => write!(f, "{}({b})", self.short_name()),
            None => f.write_str(self.short_name()),
        }
    }
}

fn check_label(alpha: &[f64], y: usize) -> Result<()> {
    LabelSpace::new(alpha.len() + 1)?.check(y)
}

/// All-threshold sum with an arbitrary per-threshold loss. With
/// `ell = |z| 1[z < 0]` this is exactly the decomposed absolute loss.
pub fn all_threshold_with(alpha: &[f64], y: usize, ell: impl Fn(f64) -> f64) -> f64 {
    let below: f64 = alpha[..y - 1].iter().map(|&a| ell(-a)).sum();
    let above: f64 = alpha[y - 1..].iter().map(|&a| ell(a)).sum();
    below + above
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordinal::absolute_loss_decomposed;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn central_diff(f: impl Fn(f64) -> f64, z: f64) -> f64 {
        let h = 1e-6;
        (f(z + h) - f(z - h)) / (2.0 * h)
    }

    fn near_any(z: f64, kinks: &[f64], eps: f64) -> bool {
        kinks.iter().any(|k| (z - k).abs() < eps)
    }

    #[test]
    fn binary_values() {
        assert_relative_eq!(BinarySurrogate::Logistic.value(0.0), LN2, epsilon = 1e-15);
        assert_eq!(BinarySurrogate::Squared.value(1.0), 0.0);
        assert_eq!(BinarySurrogate::DoubleHinge.value(-2.0), 2.0);
        assert_eq!(BinarySurrogate::Hinge.value(3.0), 0.0);
        assert_eq!(BinarySurrogate::Exponential.value(0.0), 1.0);
    }

    #[test]
    fn logistic_is_overflow_safe() {
        let l = BinarySurrogate::Logistic;
        assert_eq!(l.value(1000.0), 0.0);
        assert_relative_eq!(l.value(-1000.0), 1000.0);
        assert!(l.grad(-1000.0).is_finite() && l.grad(1000.0).is_finite());
        assert_relative_eq!(l.grad(-1000.0), -1.0);
    }

    #[test]
    fn binary_gradients() {
        assert_relative_eq!(BinarySurrogate::Logistic.grad(0.0), -0.5);
        assert_eq!(BinarySurrogate::Squared.grad(0.0), -2.0);
        assert_eq!(BinarySurrogate::Hinge.grad(1.0), 0.0);
        assert_eq!(BinarySurrogate::DoubleHinge.grad(1.0), 0.0);
        assert_eq!(BinarySurrogate::DoubleHinge.grad(-1.0), -1.0);
    }

    #[test]
    fn binary_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for l in BinarySurrogate::ALL {
            let mut checked = 0;
            while checked < 100 {
                let z: f64 = rng.random_range(-6.0..6.0);
                if near_any(z, l.kinks(), 1e-3) {
                    continue;
                }
                let fd = central_diff(|t| l.value(t), z);
                let g = l.grad(z);
                assert!(
                    (fd - g).abs() <= 1e-5 * g.abs().max(1.0),
                    "{l} at {z}: analytic {g}, numeric {fd}"
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn linear_odd_table() {
        assert_relative_eq!(BinarySurrogate::Logistic.linear_odd_constant().unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(BinarySurrogate::Squared.linear_odd_constant().unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(BinarySurrogate::DoubleHinge.linear_odd_constant().unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(BinarySurrogate::Hinge.linear_odd_constant(), None);
        assert_eq!(BinarySurrogate::Exponential.linear_odd_constant(), None);
    }

    #[test]
    fn task_surrogate_examples() {
        let at = TaskSurrogate::AllThreshold(BinarySurrogate::Logistic);
        assert_relative_eq!(at.value(&[0.0, 0.0], 2).unwrap(), 2.0 * LN2, epsilon = 1e-15);
        assert_eq!(TaskSurrogate::LeastSquares.value(&[-0.5, 7.0], 2).unwrap(), 0.0);
        assert_eq!(TaskSurrogate::LeastAbsoluteDeviation.value(&[0.5, 7.0], 1).unwrap(), 0.0);
        assert!(at.value(&[0.0, 0.0], 4).is_err());
        assert!(at.value(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn immediate_threshold_boundaries() {
        let it = TaskSurrogate::ImmediateThreshold(BinarySurrogate::Squared);
        // K = 3: y = 1 only sees α_1, y = 3 only sees α_2
        assert_eq!(it.value(&[0.0, 5.0], 1).unwrap(), 1.0);
        assert_eq!(it.value(&[5.0, 0.0], 3).unwrap(), 1.0);
        assert_eq!(it.value(&[0.0, 0.0], 2).unwrap(), 2.0);
        // K = 2 degenerates to a single term
        assert_eq!(it.value(&[1.0], 1).unwrap(), 0.0);
        assert_eq!(it.value(&[-1.0], 2).unwrap(), 0.0);
    }

    #[test]
    fn task_gradient_examples() {
        let at = TaskSurrogate::AllThreshold(BinarySurrogate::Squared);
        assert_eq!(at.grad_alpha(&[0.0, 0.0], 1).unwrap(), vec![-2.0, -2.0]);
        assert_eq!(TaskSurrogate::LeastSquares.grad_alpha(&[0.0, 3.0], 2).unwrap(), vec![1.0, 0.0]);
        let lad = TaskSurrogate::LeastAbsoluteDeviation;
        assert_eq!(lad.grad_alpha(&[-0.5, 0.0], 2).unwrap(), vec![0.0, 0.0]);
    }

    fn all_surrogates() -> Vec<TaskSurrogate> {
        let mut v = vec![TaskSurrogate::LeastSquares, TaskSurrogate::LeastAbsoluteDeviation];
        for b in BinarySurrogate::ALL {
            v.push(TaskSurrogate::AllThreshold(b));
            v.push(TaskSurrogate::ImmediateThreshold(b));
        }
        v
    }

    fn near_task_kink(psi: TaskSurrogate, alpha: &[f64], y: usize, eps: f64) -> bool {
        match psi {
            TaskSurrogate::LeastAbsoluteDeviation => (y as f64 + alpha[0] - 1.5).abs() < eps,
            TaskSurrogate::LeastSquares => false,
            _ => {
                let kinks = psi.binary().unwrap().kinks();
                alpha.iter().any(|&a| near_any(a, kinks, eps) || near_any(-a, kinks, eps))
            }
        }
    }

    #[test]
    fn task_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for psi in all_surrogates() {
            let mut checked = 0;
            while checked < 200 {
                let k = rng.random_range(2..=6);
                let y = rng.random_range(1..=k);
                let alpha: Vec<f64> = (0..k - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
                if near_task_kink(psi, &alpha, y, 1e-3) {
                    continue;
                }
                let g = psi.grad_alpha(&alpha, y).unwrap();
                for i in 0..alpha.len() {
                    let mut p = alpha.clone();
                    let mut m = alpha.clone();
                    p[i] += h;
                    m[i] -= h;
                    let fd = (psi.value(&p, y).unwrap() - psi.value(&m, y).unwrap()) / (2.0 * h);
                    assert!(
                        (fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0),
                        "{psi} y={y} alpha={alpha:?} i={i}: {} vs {fd}",
                        g[i]
                    );
                }
                checked += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn zero_one_substitution_gives_absolute_loss(
            (alpha, y) in (2usize..=6).prop_flat_map(|k| (prop::collection::vec(-3.0f64..3.0, k - 1), 1..=k))
        ) {
            let via_at = all_threshold_with(&alpha, y, |z| f64::from(u8::from(z < 0.0)));
            prop_assert_eq!(via_at, absolute_loss_decomposed(&alpha, y).unwrap());
        }

        #[test]
        fn surrogates_are_nonnegative(
            (alpha, y) in (2usize..=6).prop_flat_map(|k| (prop::collection::vec(-20.0f64..20.0, k - 1), 1..=k))
        ) {
            for psi in all_surrogates() {
                prop_assert!(psi.value(&alpha, y).unwrap() >= 0.0);
            }
        }

        #[test]
        fn threshold_surrogates_are_midpoint_convex(
            (a, b, y) in (2usize..=6).prop_flat_map(|k| (
                prop::collection::vec(-4.0f64..4.0, k - 1),
                prop::collection::vec(-4.0f64..4.0, k - 1),
                1..=k,
            ))
        ) {
            let mid: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            for psi in all_surrogates() {
                let lhs = psi.value(&mid, y).unwrap();
                let rhs = 0.5 * (psi.value(&a, y).unwrap() + psi.value(&b, y).unwrap());
                prop_assert!(lhs <= rhs + 1e-9, "{} not convex", psi);
            }
        }
    }
}
