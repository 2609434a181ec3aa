//! Order-insensitive running statistics.

/// Neumaier-compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Mean and sample standard deviation (n - 1 denominator) using a
/// two-pass compensated scheme.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut total = CompensatedSum::default();
    xs.iter().for_each(|&x| total.add(x));
    let mean = total.value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut sq = CompensatedSum::default();
    xs.iter().for_each(|&x| sq.add((x - mean) * (x - mean)));
    (mean, (sq.value() / (n - 1) as f64).sqrt())
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    let (_, sd) = mean_std(xs);
    if xs.len() < 2 {
        0.0
    } else {
        sd / (xs.len() as f64).sqrt()
    }
}
