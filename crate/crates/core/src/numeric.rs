//! Small summation helpers shared by estimators and diagnostics.

#[allow(unused_imports)]
use num_traits::Float;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub(crate) fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    sum(xs.iter().copied()) / xs.len() as f64
}

/// Population variance (divides by n).
pub(crate) fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64
}

/// Population covariance (divides by n).
pub(crate) fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / xs.len() as f64
}

/// Pearson correlation; `None` when either coordinate is constant.
pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy = sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = sum(ys.iter().map(|y| (y - my) * (y - my)));
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::default();
        acc.add(1e16);
        acc.add(1.0);
        acc.add(-1e16);
        assert_eq!(acc.value(), 1.0);
    }

    #[test]
    fn pearson_of_line_is_one() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [2.0, 4.0, 6.0];
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson(&xs, &[1.0, 1.0, 1.0]).is_none());
    }
}
