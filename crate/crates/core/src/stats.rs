//! Running sums and batch-means error bars for dependent sequences.

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub const DEFAULT_BATCHES: usize = 100;

/// Non-overlapping batch means over a sequence whose length is known upfront.
///
/// Value `i` of `n` lands in batch `i·b/n`, so batch sizes differ by at most one.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    expected: usize,
    seen: usize,
    total: CompensatedSum,
    batches: Vec<(CompensatedSum, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl BatchMeans {
    pub fn new(expected: usize, batches: usize) -> Self {
        let batches = batches.clamp(1, expected.max(1));
        Self {
            expected,
            seen: 0,
            total: CompensatedSum::new(),
            batches: vec![(CompensatedSum::new(), 0); batches],
        }
    }

    pub fn push(&mut self, x: f64) {
        let nb = self.batches.len();
        let idx = if self.expected == 0 {
            0
        } else {
            (self.seen.min(self.expected - 1) * nb / self.expected).min(nb - 1)
        };
        let slot = &mut self.batches[idx];
        slot.0.add(x);
        slot.1 += 1;
        self.total.add(x);
        self.seen += 1;
    }

    pub fn finish(&self) -> MeanEstimate {
        if self.seen == 0 {
            return MeanEstimate { mean: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let mean = self.total.value() / self.seen as f64;
        let means: Vec<f64> = self
            .batches
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|(s, n)| s.value() / *n as f64)
            .collect();
        let stderr = if means.len() < 2 {
            0.0
        } else {
            let k = means.len() as f64;
            let bar = means.iter().sum::<f64>() / k;
            let var = means.iter().map(|m| (m - bar).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        };
        MeanEstimate { mean, stderr, count: self.seen }
    }
}

/// Sample mean and unbiased variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}
