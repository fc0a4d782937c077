//! Order-fixed reductions for Monte Carlo estimates.

/// Uniform draw in `[0, 1)` from the top 53 bits of a `u64`.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pairwise (cascade) summation. The split points depend only on the
/// length, so the result is independent of how the samples were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn pairwise_map_sum(xs: &[f64], f: &impl Fn(f64) -> f64) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        let mut s = 0.0;
        for &x in xs {
            s += f(x);
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_map_sum(&xs[..mid], f) + pairwise_map_sum(&xs[mid..], f)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    /// Mean is accumulated as `x[0] + mean(x - x[0])`, so a constant sample
    /// reproduces its value exactly with zero standard error.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let shift = xs[0];
        let dmean = pairwise_map_sum(xs, &|x| x - shift) / n as f64;
        let mean = shift + dmean;
        if n == 1 {
            return Self { mean, std_error: 0.0, n };
        }
        let ss = pairwise_map_sum(xs, &|x| {
            let d = x - shift - dmean;
            d * d
        });
        let var = ss / (n - 1) as f64;
        Self { mean, std_error: libm::sqrt(var / n as f64), n }
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        libm::hypot(self.std_error, other.std_error)
    }
}
