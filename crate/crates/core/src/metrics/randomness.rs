use rand::seq::SliceRandom;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::rng::{self, Purpose};

/// Label carried in reports: the collision statistic is this crate's own
/// choice of randomness measure.
pub const METRIC_NAME: &str = "same_block_pair_rate";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RandomnessOptions {
    /// Consecutive rows grouped into one batch for the decile test.
    pub batch_rows: usize,
    /// Uniform permutations simulated to estimate the null spread.
    pub null_trials: usize,
    pub seed: u64,
}

impl Default for RandomnessOptions {
    fn default() -> Self {
        RandomnessOptions {
            batch_rows: 256,
            null_trials: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomnessReport {
    pub window_rows: usize,
    pub same_block_pair_rate: f64,
    pub expected_rate: f64,
    pub z_score: f64,
    pub rank_correlation: f64,
    pub chi_square_stat: f64,
    pub metric: &'static str,
    pub n: usize,
    pub block_rows: u64,
    pub null_std: f64,
    pub chi_square_df: u64,
    pub chi_square_p: f64,
}

impl RandomnessReport {
    pub const CSV_HEADER: [&'static str; 12] = [
        "window_rows",
        "same_block_pair_rate",
        "expected_rate",
        "z_score",
        "rank_correlation",
        "chi_square_stat",
        "metric",
        "n",
        "block_rows",
        "null_std",
        "chi_square_df",
        "chi_square_p",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.window_rows.to_string(),
            format!("{:.8}", self.same_block_pair_rate),
            format!("{:.8}", self.expected_rate),
            format!("{:.4}", self.z_score),
            format!("{:.6}", self.rank_correlation),
            format!("{:.4}", self.chi_square_stat),
            self.metric.to_string(),
            self.n.to_string(),
            self.block_rows.to_string(),
            format!("{:.8}", self.null_std),
            self.chi_square_df.to_string(),
            format!("{:.6}", self.chi_square_p),
        ]
    }

    /// Two-sided p-value of the z-score under a normal null.
    pub fn z_p_value(&self) -> f64 {
        if !self.z_score.is_finite() {
            return if self.z_score.is_nan() { 1.0 } else { 0.0 };
        }
        let n = Normal::standard();
        2.0 * (1.0 - n.cdf(self.z_score.abs()))
    }

    /// Rejects uniformity when either test fires at level `alpha / 2`.
    pub fn rejects_uniformity(&self, alpha: f64) -> bool {
        self.z_p_value() < alpha / 2.0 || self.chi_square_p < alpha / 2.0
    }
}

/// Fraction of same-block pairs inside consecutive non-overlapping windows
/// of `window` rows; a trailing partial window is ignored. Row `i` belongs to
/// block `i / block_rows`. Runs in O(n).
pub fn same_block_pair_rate(stream: &[u64], block_rows: u64, window: usize) -> f64 {
    assert!(block_rows > 0 && window >= 2);
    let windows = stream.len() / window;
    if windows == 0 {
        return 0.0;
    }
    let n_blocks = stream.iter().max().map_or(0, |&m| m / block_rows + 1) as usize;
    let mut counts = vec![0u64; n_blocks];
    let mut same = 0u64;
    for w in stream.chunks_exact(window) {
        for &row in w {
            let c = &mut counts[(row / block_rows) as usize];
            same += *c;
            *c += 1;
        }
        for &row in w {
            counts[(row / block_rows) as usize] = 0;
        }
    }
    let pairs = windows as u64 * (window as u64 * (window as u64 - 1) / 2);
    same as f64 / pairs as f64
}

/// Probability that two distinct positions of a uniform permutation of the
/// stream's rows hold rows of the same block.
pub fn expected_pair_rate(stream: &[u64], block_rows: u64) -> f64 {
    let n = stream.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mut sizes: std::collections::HashMap<u64, u64> = std::collections::HashMap::new();
    for &row in stream {
        *sizes.entry(row / block_rows).or_insert(0) += 1;
    }
    let same: f64 = sizes.values().map(|&s| (s * s.saturating_sub(1)) as f64).sum();
    same / (n * (n - 1.0))
}

fn ranks(values: &[u64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by_key(|&i| values[i]);
    let mut r = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman correlation between emission position and source index.
pub fn rank_correlation(stream: &[u64]) -> f64 {
    let n = stream.len();
    if n < 2 {
        return 0.0;
    }
    let y = ranks(stream);
    let mean = (n as f64 - 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        let dx = i as f64 - mean;
        let dy = yi - mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Chi-square of the batch × source-decile contingency table over full
/// batches. Deciles are taken over source ranks. Returns (stat, df, p).
pub fn decile_chi_square(stream: &[u64], batch_rows: usize) -> (f64, u64, f64) {
    let batches = stream.len() / batch_rows.max(1);
    if batches < 2 {
        return (0.0, 0, 1.0);
    }
    let used = &stream[..batches * batch_rows];
    let r = ranks(used);
    let n = used.len() as f64;
    let mut table = vec![[0f64; 10]; batches];
    let mut col = [0f64; 10];
    for (i, &rank) in r.iter().enumerate() {
        let d = ((rank * 10.0 / n) as usize).min(9);
        table[i / batch_rows][d] += 1.0;
        col[d] += 1.0;
    }
    let cols: Vec<usize> = (0..10).filter(|&d| col[d] > 0.0).collect();
    if cols.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let row_total = batch_rows as f64;
    let mut stat = 0.0;
    for row in &table {
        for &d in &cols {
            let e = row_total * col[d] / n;
            stat += (row[d] - e).powi(2) / e;
        }
    }
    let df = ((batches - 1) * (cols.len() - 1)) as u64;
    let p = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat);
    (stat, df, p)
}

/// Randomness statistics of an emitted index stream whose source rows were
/// laid out in blocks of `block_rows`.
///
/// The z-score compares the observed pair rate with its mean and spread over
/// `null_trials` uniform permutations of the same rows.
pub fn randomness_report(
    stream: &[u64],
    block_rows: u64,
    window_rows: usize,
    options: &RandomnessOptions,
) -> Result<RandomnessReport, String> {
    if block_rows == 0 {
        return Err("block_rows must be >= 1".into());
    }
    if window_rows < 2 || stream.len() < window_rows {
        return Err(format!(
            "need stream length ({}) >= window_rows ({window_rows}) >= 2",
            stream.len()
        ));
    }
    let rate = same_block_pair_rate(stream, block_rows, window_rows);
    let expected = expected_pair_rate(stream, block_rows);

    let mut sim = stream.to_vec();
    let mut r = rng::stream(options.seed, Purpose::NullModel, 0);
    let mut sum_sq = 0.0;
    for _ in 0..options.null_trials {
        sim.shuffle(&mut r);
        let x = same_block_pair_rate(&sim, block_rows, window_rows) - expected;
        sum_sq += x * x;
    }
    let null_std = if options.null_trials > 0 {
        (sum_sq / options.null_trials as f64).sqrt()
    } else {
        f64::NAN
    };
    let z = if rate == expected {
        0.0
    } else if null_std > 0.0 {
        (rate - expected) / null_std
    } else {
        f64::INFINITY.copysign(rate - expected)
    };
    let (chi, df, p) = decile_chi_square(stream, options.batch_rows);
    Ok(RandomnessReport {
        window_rows,
        same_block_pair_rate: rate,
        expected_rate: expected,
        z_score: z,
        rank_correlation: rank_correlation(stream),
        chi_square_stat: chi,
        metric: METRIC_NAME,
        n: stream.len(),
        block_rows,
        null_std,
        chi_square_df: df,
        chi_square_p: p,
    })
}
