//! Fitted constants and small regressions.

use sparselab_core::signal::GridFunction;
use sparselab_core::sparse::fitted_constant;

/// `max lhs/rhs` over cells with `0/0 = 0` and `x/0 = ∞`.
pub fn fit_pointwise(lhs: &GridFunction, rhs: &GridFunction) -> f64 {
    fitted_constant(lhs.values(), rhs.values())
}

/// Ratio of two scalars under the same convention.
pub fn ratio(lhs: f64, rhs: f64) -> f64 {
    fitted_constant(&[lhs], &[rhs])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub intercept: f64,
    pub slope: f64,
    /// Sum of squared residuals.
    pub residual: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`; `None` below two distinct abscissae.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<Line> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Some(Line { intercept, slope, residual })
}

/// `max/min` of positive values; `1` when all vanish, `∞` when some but not all do.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max == 0.0 {
        1.0
    } else if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use sparselab_core::dyadic::Domain;

    #[test]
    fn pointwise_conventions() {
        let d = Domain::unit(2);
        let g = |v: Vec<f64>| GridFunction::new(d, v).unwrap();
        let rhs = g(vec![1.0, 2.0, 0.5, 4.0]);
        assert_eq!(fit_pointwise(&rhs, &rhs), 1.0);
        assert_eq!(fit_pointwise(&g(vec![0.0; 4]), &rhs), 0.0);
        assert_eq!(fit_pointwise(&g(vec![0.0; 4]), &g(vec![0.0; 4])), 0.0);
        assert_eq!(fit_pointwise(&g(vec![0.0, 0.0, 1e-300, 0.0]), &g(vec![1.0, 1.0, 0.0, 1.0])), f64::INFINITY);
    }

    #[test]
    fn line_through_points() {
        let l = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-14 && (l.intercept - 1.0).abs() < 1e-14 && l.residual < 1e-24);
        assert!(least_squares(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn spread_conventions() {
        assert_eq!(spread(&[0.0, 0.0]), 1.0);
        assert_eq!(spread(&[0.0, 1.0]), f64::INFINITY);
        assert_eq!(spread(&[2.0, 1.0, 4.0]), 4.0);
    }

    proptest! {
        #[test]
        fn doubled_rhs_fits_two(v in proptest::collection::vec(0.01f64..100.0, 8)) {
            let d = Domain::unit(3);
            let rhs = GridFunction::new(d, v.clone()).unwrap();
            let lhs = rhs.scale(2.0);
            prop_assert_eq!(fit_pointwise(&lhs, &rhs), 2.0);
        }
    }
}
