//! Error measures between an estimated and an oracle gradient.

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Magnitude error `| ‖ĝ‖ − ‖g‖ | / ‖g‖`; 0 means equal norms.
pub fn rel_abs_error(g_hat: &[f64], g: &[f64]) -> Result<f64> {
    let ng = norm(g);
    if ng == 0.0 {
        return Err(Error::InvalidParameter(
            "rel_abs_error needs a nonzero oracle gradient".into(),
        ));
    }
    Ok((norm(g_hat) - ng).abs() / ng)
}

/// Direction error `1 − ĝᵀg/(‖ĝ‖‖g‖)`; 0 means collinear, 2 anti-parallel.
pub fn cosine_distance(g_hat: &[f64], g: &[f64]) -> Result<f64> {
    let (nh, ng) = (norm(g_hat), norm(g));
    if nh == 0.0 || ng == 0.0 {
        return Err(Error::InvalidParameter(
            "cosine_distance needs nonzero gradients".into(),
        ));
    }
    let dot: f64 = g_hat.iter().zip(g).map(|(a, b)| a * b).sum();
    Ok(1.0 - dot / (nh * ng))
}

/// Mean and 95% confidence half-width (normal approximation,
/// `1.96·SE`) of a sample. The half-width is 0 for a single value.
pub fn mean_and_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// One gradient-error measurement cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub n_traj: usize,
    pub n_actions: usize,
    pub alpha: f64,
    pub freq: f64,
    pub rel_abs_error: f64,
    pub cosine_distance: f64,
}

impl GradReport {
    pub const CSV_HEADER: &'static str =
        "seed,estimator,n_traj,n_actions,alpha,freq,rel_abs_error,cosine_distance";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.estimator,
            self.n_traj,
            self.n_actions,
            self.alpha,
            self.freq,
            self.rel_abs_error,
            self.cosine_distance
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rel_abs_error_examples() {
        let g = vec![0.0, 5.0];
        assert_eq!(rel_abs_error(&g, &g).unwrap(), 0.0);
        let double: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
        assert!((rel_abs_error(&double, &g).unwrap() - 1.0).abs() < 1e-12);
        // equal norms, different directions
        assert_eq!(rel_abs_error(&[3.0, 4.0], &g).unwrap(), 0.0);
        assert!(rel_abs_error(&g, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn cosine_distance_examples() {
        let g = vec![1.0, 2.0];
        let scaled: Vec<f64> = g.iter().map(|x| 5.0 * x).collect();
        assert!(cosine_distance(&scaled, &g).unwrap().abs() < 1e-12);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        assert!((cosine_distance(&neg, &g).unwrap() - 2.0).abs() < 1e-12);
        assert!(cosine_distance(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn ci95_formula() {
        let (mean, hw) = mean_and_ci95(&[1.0, 2.0, 3.0, 4.0]);
        assert!((mean - 2.5).abs() < 1e-12);
        let se = (5.0f64 / 3.0 / 4.0).sqrt();
        assert!((hw - 1.96 * se).abs() < 1e-12);
        assert_eq!(mean_and_ci95(&[7.0]), (7.0, 0.0));
    }

    proptest! {
        #[test]
        fn cosine_distance_ignores_positive_scale(
            x in -10.0f64..10.0, y in -10.0f64..10.0, c in 0.01f64..100.0
        ) {
            prop_assume!(x.abs() + y.abs() > 0.01);
            let g = vec![x, y];
            let scaled = vec![c * x, c * y];
            prop_assert!(cosine_distance(&scaled, &g).unwrap().abs() < 1e-9);
        }

        /// Norm-preserving changes to ĝ (permutation and sign flips)
        /// leave the magnitude error untouched.
        #[test]
        fn rel_abs_error_depends_only_on_norm(
            x in -10.0f64..10.0, y in -10.0f64..10.0,
            sx in prop::bool::ANY, sy in prop::bool::ANY
        ) {
            let g = vec![1.5, -2.0];
            let a = vec![x, y];
            let b = vec![
                if sy { y } else { -y },
                if sx { -x } else { x },
            ];
            prop_assert!(
                (rel_abs_error(&a, &g).unwrap() - rel_abs_error(&b, &g).unwrap()).abs() < 1e-12
            );
        }
    }
}
