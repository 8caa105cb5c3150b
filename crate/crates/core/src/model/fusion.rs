//! Late fusion of two class-posterior vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::tensor::softmax;

/// Lower clamp for log-probabilities in the product rule; `exp(-745)` is the
/// smallest positive subnormal.
pub const LOG_FLOOR: f64 = -745.0;

const DISTRIBUTION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinationRule {
    Product,
    Sum,
    Maximum,
}

impl CombinationRule {
    pub const ALL: [CombinationRule; 3] = [CombinationRule::Product, CombinationRule::Sum, CombinationRule::Maximum];

    pub fn name(self) -> &'static str {
        match self {
            CombinationRule::Product => "product",
            CombinationRule::Sum => "sum",
            CombinationRule::Maximum => "maximum",
        }
    }
}

impl fmt::Display for CombinationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombinationRule {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Self::Product),
            "sum" => Ok(Self::Sum),
            "maximum" | "max" => Ok(Self::Maximum),
            other => Err(ModelError::Config(format!("unknown combination rule {other:?}"))),
        }
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

fn check_distribution(p: &[f64], which: &str) -> Result<()> {
    let s: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (s - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(ModelError::NotDistribution(format!("{which} sums to {s}")));
    }
    Ok(())
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Fuses two posteriors into one distribution.
///
/// * product: `normalize(pA ⊙ pB)`, evaluated as a softmax of summed clamped logs
/// * sum: `(pA + pB) / 2`
/// * maximum: `normalize(max(pA, pB))`
pub fn combine(pa: &[f64], pb: &[f64], rule: CombinationRule) -> Result<Vec<f64>> {
    if pa.len() != pb.len() || pa.is_empty() {
        return Err(ModelError::DimMismatch {
            what: "posterior",
            expected: pa.len(),
            actual: pb.len(),
        });
    }
    check_distribution(pa, "first posterior")?;
    check_distribution(pb, "second posterior")?;
    let out = match rule {
        CombinationRule::Product => {
            let logs: Vec<f64> = pa
                .iter()
                .zip(pb)
                .map(|(a, b)| a.ln().max(LOG_FLOOR) + b.ln().max(LOG_FLOOR))
                .collect();
            softmax(&logs)
        }
        CombinationRule::Sum => pa.iter().zip(pb).map(|(a, b)| (a + b) / 2.0).collect(),
        CombinationRule::Maximum => normalize(pa.iter().zip(pb).map(|(a, b)| a.max(*b)).collect()),
    };
    Ok(out)
}

/// Cross-entropy of the fused posterior and its gradients with respect to each path's logits.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedLoss {
    pub loss: f64,
    pub combined: Vec<f64>,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
}

/// Backpropagates `dL/dp` through a softmax: `p ⊙ (dp − ⟨dp, p⟩)`.
fn through_softmax(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, di)| pi * (di - inner)).collect()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `−log c[label]` where `c = combine(softmax(za), softmax(zb), rule)`.
pub fn fused_loss(za: &[f64], zb: &[f64], label: usize, rule: CombinationRule) -> Result<FusedLoss> {
    let k = za.len();
    if zb.len() != k || k < 2 {
        return Err(ModelError::DimMismatch {
            what: "logits",
            expected: k,
            actual: zb.len(),
        });
    }
    if label >= k {
        return Err(ModelError::LabelOutOfRange { label, classes: k });
    }
    let (pa, pb) = (softmax(za), softmax(zb));
    match rule {
        CombinationRule::Product => {
            // normalize(pA ⊙ pB) = softmax(zA + zB), so both paths share one gradient.
            let z: Vec<f64> = za.iter().zip(zb).map(|(a, b)| a + b).collect();
            let combined = softmax(&z);
            let loss = log_sum_exp(&z) - z[label];
            let mut grad = combined.clone();
            grad[label] -= 1.0;
            Ok(FusedLoss {
                loss,
                combined,
                grad_a: grad.clone(),
                grad_b: grad,
            })
        }
        CombinationRule::Sum => {
            let combined: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| (a + b) / 2.0).collect();
            let cy = combined[label].max(f64::MIN_POSITIVE);
            let mut dp = vec![0.0; k];
            dp[label] = -0.5 / cy;
            Ok(FusedLoss {
                loss: -cy.ln(),
                grad_a: through_softmax(&pa, &dp),
                grad_b: through_softmax(&pb, &dp),
                combined,
            })
        }
        CombinationRule::Maximum => {
            let m: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| a.max(*b)).collect();
            let total: f64 = m.iter().sum();
            let combined: Vec<f64> = m.iter().map(|v| v / total).collect();
            let my = m[label].max(f64::MIN_POSITIVE);
            // L = ln Σm − ln m_y
            let dm: Vec<f64> = (0..k)
                .map(|j| 1.0 / total - if j == label { 1.0 / my } else { 0.0 })
                .collect();
            // Ties route the gradient to the first path.
            let (mut dpa, mut dpb) = (vec![0.0; k], vec![0.0; k]);
            for j in 0..k {
                if pa[j] >= pb[j] {
                    dpa[j] = dm[j];
                } else {
                    dpb[j] = dm[j];
                }
            }
            Ok(FusedLoss {
                loss: total.ln() - my.ln(),
                grad_a: through_softmax(&pa, &dpa),
                grad_b: through_softmax(&pb, &dpb),
                combined,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_ties_to_first_class() {
        let c = combine(&[0.6, 0.4], &[0.4, 0.6], CombinationRule::Product).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 0.5).abs() < 1e-15);
        assert_eq!(argmax(&c), 0);
    }

    #[test]
    fn uniform_is_product_identity() {
        let pa = [0.7, 0.2, 0.1];
        let u = [1.0 / 3.0; 3];
        let c = combine(&pa, &u, CombinationRule::Product).unwrap();
        for (x, y) in c.iter().zip(pa) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            combine(&[0.5, 0.5], &[1.0], CombinationRule::Sum),
            Err(ModelError::DimMismatch { .. })
        ));
        assert!(matches!(
            combine(&[0.5, 0.6], &[0.5, 0.5], CombinationRule::Sum),
            Err(ModelError::NotDistribution(_))
        ));
    }

    #[test]
    fn zero_entries_survive_product() {
        let c = combine(&[1.0, 0.0], &[0.0, 1.0], CombinationRule::Product).unwrap();
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn fused_loss_matches_combine() {
        let za = [0.3, -1.2, 0.8, 0.1];
        let zb = [-0.4, 0.5, 0.2, 1.1];
        for rule in CombinationRule::ALL {
            let f = fused_loss(&za, &zb, 2, rule).unwrap();
            let c = combine(&softmax(&za), &softmax(&zb), rule).unwrap();
            for (x, y) in f.combined.iter().zip(&c) {
                assert!((x - y).abs() < 1e-14, "{rule}");
            }
            assert!((f.loss + c[2].ln()).abs() < 1e-12, "{rule}");
        }
    }

    #[test]
    fn parse_rules() {
        assert_eq!("max".parse::<CombinationRule>().unwrap(), CombinationRule::Maximum);
        assert!("mean".parse::<CombinationRule>().is_err());
    }
}
