//! Random assignment distribution (RAD).
//!
//! If a classifier assigns each of `n` test items by a fair coin and is
//! evaluated `k` times, the best of the `k` scores follows the distribution
//! of the maximum of `k` independent Binomial(n, 1/2) draws:
//!
//! ```text
//! U(m)       = P(all k draws < m) = (1 - tail(m))^k
//! p_max(m)   = U(m + 1) - U(m)
//! ```
//!
//! The difference is evaluated as `L(m)^k · (1 - (1 - p(m)/L(m))^k)` with
//! `L(m) = P(X <= m)`, via `log1p`/`expm1`, so deep-tail probabilities keep
//! full relative precision instead of cancelling against 1.

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, NeumaierSum};
use crate::par::Exec;
use crate::seed::SeedKey;

/// Reference tail probability for the finite-sampling threshold.
pub const DEFAULT_P_REF: f64 = 4.676581e-6;
/// Additive allowance for bootstrap resampling, in accuracy units.
pub const DEFAULT_BOOTSTRAP_OFFSET: f64 = 0.10;

/// Fair-coin binomial pmf and both cumulative tails for one `n`.
#[derive(Debug, Clone)]
pub struct BinomialTable {
    pub n: usize,
    pub pmf: Vec<f64>,
    /// `lower[m] = P(X <= m)`.
    pub lower: Vec<f64>,
    /// `upper[m] = P(X >= m)`, length `n + 2` so `upper[n + 1] = 0`.
    pub upper: Vec<f64>,
}

impl BinomialTable {
    pub fn new(n: usize) -> Self {
        // log-weights relative to the mode via the ratio recurrence
        // p(j+1)/p(j) = (n-j)/(j+1); accumulated outward from the mode so
        // the high-mass terms carry the least rounding.
        let mode = n / 2;
        let mut lw = vec![0.0f64; n + 1];
        for j in mode..n {
            lw[j + 1] = lw[j] + ((n - j) as f64 / (j + 1) as f64).ln();
        }
        for j in (0..mode).rev() {
            lw[j] = lw[j + 1] - ((n - j) as f64 / (j + 1) as f64).ln();
        }
        let log_z = log_sum_exp(&lw);
        let pmf: Vec<f64> = lw.iter().map(|l| (l - log_z).exp()).collect();

        let mut lower = vec![0.0; n + 1];
        let mut acc = NeumaierSum::default();
        for m in 0..=n {
            acc.add(pmf[m]);
            lower[m] = acc.value().min(1.0);
        }
        let mut upper = vec![0.0; n + 2];
        let mut acc = NeumaierSum::default();
        for m in (0..=n).rev() {
            acc.add(pmf[m]);
            upper[m] = acc.value().min(1.0);
        }
        upper[0] = 1.0;
        lower[n] = 1.0;
        BinomialTable { n, pmf, lower, upper }
    }
}

/// `P(Bin(n, 1/2) >= m)` for `0 <= m <= n + 1`.
pub fn binom_tail(n: usize, m: usize) -> Result<f64> {
    if m > n + 1 {
        return Err(Error::OutOfRange(format!("tail index {m} > n + 1 = {}", n + 1)));
    }
    Ok(BinomialTable::new(n).upper[m])
}

/// Distribution of the maximum of `k_epochs` fair-coin Binomial(`n_test`)
/// experiments, with its first two moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadModel {
    pub n_test: usize,
    pub k_epochs: usize,
    pub pmf_max: Vec<f64>,
    pub mean_max: f64,
    pub std_max: f64,
}

impl RadModel {
    /// `P(max <= m)` for each `m`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = NeumaierSum::default();
        self.pmf_max
            .iter()
            .map(|p| {
                acc.add(*p);
                acc.value().min(1.0)
            })
            .collect()
    }

    /// Most probable maximum.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (m, p) in self.pmf_max.iter().enumerate() {
            if *p > self.pmf_max[best] {
                best = m;
            }
        }
        best
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.mean_max / self.n_test as f64
    }

    /// CSV with columns `m,pmf,cumulative`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "m,pmf,cumulative")?;
        for (m, (p, c)) in self.pmf_max.iter().zip(self.cumulative()).enumerate() {
            writeln!(out, "{m},{p:e},{c:e}")?;
        }
        Ok(())
    }
}

pub fn max_pmf(n: usize, k: usize) -> Result<RadModel> {
    if n == 0 || k == 0 {
        return Err(Error::OutOfRange(format!(
            "max_pmf needs n >= 1 and k >= 1, got n={n}, k={k}"
        )));
    }
    let table = BinomialTable::new(n);
    let kf = k as f64;
    let pmf_max: Vec<f64> = (0..=n)
        .map(|m| {
            let below = table.lower[m];
            if m == 0 {
                return table.pmf[0].powi(k as i32);
            }
            if below <= 0.0 {
                return 0.0;
            }
            // U(m+1) - U(m) = L(m)^k * (1 - (1 - p(m)/L(m))^k)
            let ratio = (table.pmf[m] / below).min(1.0);
            let head = (kf * below.ln()).exp();
            head * -(kf * (-ratio).ln_1p()).exp_m1()
        })
        .collect();

    let mut mean = NeumaierSum::default();
    for (m, p) in pmf_max.iter().enumerate() {
        mean.add(m as f64 * p);
    }
    let mean_max = mean.value();
    let mut var = NeumaierSum::default();
    for (m, p) in pmf_max.iter().enumerate() {
        let d = m as f64 - mean_max;
        var.add(d * d * p);
    }
    Ok(RadModel {
        n_test: n,
        k_epochs: k,
        pmf_max,
        mean_max,
        std_max: var.value().max(0.0).sqrt(),
    })
}

/// Finite-sampling right-edge threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub n_test: usize,
    pub k_epochs: usize,
    pub p_ref: f64,
    pub m_star: usize,
    pub accuracy_star: f64,
    pub bootstrap_offset: f64,
    pub threshold_accuracy: f64,
}

/// The count above the mode whose probability is closest to `p_ref`; ties go
/// to the larger (less probable) count.
pub fn empirical_threshold(n: usize, k: usize, p_ref: f64, offset: f64) -> Result<ThresholdSpec> {
    let model = max_pmf(n, k)?;
    threshold_from_model(&model, p_ref, offset)
}

pub fn threshold_from_model(model: &RadModel, p_ref: f64, offset: f64) -> Result<ThresholdSpec> {
    if !(p_ref > 0.0 && p_ref < 1.0) {
        return Err(Error::OutOfRange(format!("p_ref {p_ref} not in (0, 1)")));
    }
    if !(0.0..1.0).contains(&offset) {
        return Err(Error::OutOfRange(format!("bootstrap offset {offset} not in [0, 1)")));
    }
    let mut m_star = model.mode();
    let mut best = f64::INFINITY;
    for m in model.mode()..=model.n_test {
        let d = (model.pmf_max[m] - p_ref).abs();
        if d <= best {
            best = d;
            m_star = m;
        }
    }
    let accuracy_star = m_star as f64 / model.n_test as f64;
    Ok(ThresholdSpec {
        n_test: model.n_test,
        k_epochs: model.k_epochs,
        p_ref,
        m_star,
        accuracy_star,
        bootstrap_offset: offset,
        threshold_accuracy: (accuracy_star + offset).min(1.0),
    })
}

/// `(observed_mean_accuracy · n - mean_max) / std_max`.
pub fn rad_zscore(observed_mean_accuracy: f64, model: &RadModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&observed_mean_accuracy) {
        return Err(Error::OutOfRange(format!(
            "mean accuracy {observed_mean_accuracy} not in [0, 1]"
        )));
    }
    if !(model.std_max > 0.0) {
        return Err(Error::OutOfRange("RAD standard deviation is zero".into()));
    }
    Ok((observed_mean_accuracy * model.n_test as f64 - model.mean_max) / model.std_max)
}

/// Simulated maxima of `k` fair-coin experiments of `n` flips.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloMax {
    pub n: usize,
    pub k: usize,
    pub iterations: usize,
    /// `histogram[m]` = number of iterations whose maximum was `m`.
    pub histogram: Vec<u64>,
    pub overall_max: usize,
}

impl MonteCarloMax {
    pub fn empirical_pmf(&self) -> Vec<f64> {
        self.histogram
            .iter()
            .map(|c| *c as f64 / self.iterations as f64)
            .collect()
    }

    /// Total-variation distance to an analytical pmf of the same support.
    pub fn tv_distance(&self, pmf: &[f64]) -> f64 {
        0.5 * self
            .empirical_pmf()
            .iter()
            .zip(pmf)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

const MC_CHUNK: usize = 4096;

fn fair_binomial<R: RngCore>(rng: &mut R, n: usize) -> usize {
    let mut heads = 0;
    let mut left = n;
    while left >= 64 {
        heads += rng.next_u64().count_ones() as usize;
        left -= 64;
    }
    if left > 0 {
        heads += (rng.next_u64() & ((1u64 << left) - 1)).count_ones() as usize;
    }
    heads
}

pub fn monte_carlo_max(n: usize, k: usize, iterations: usize, seed: u64) -> Result<MonteCarloMax> {
    monte_carlo_max_with(n, k, iterations, seed, Exec::default())
}

/// Iterations are split into fixed chunks with their own derived seeds, so
/// the result does not depend on the execution strategy.
pub fn monte_carlo_max_with(n: usize, k: usize, iterations: usize, seed: u64, exec: Exec) -> Result<MonteCarloMax> {
    if iterations == 0 || k == 0 {
        return Err(Error::OutOfRange(
            "monte_carlo_max needs iterations >= 1 and k >= 1".into(),
        ));
    }
    let chunks = iterations.div_ceil(MC_CHUNK);
    let key = SeedKey::new(seed).str("rad-monte-carlo");
    let partial = exec.map_range(chunks, |c| {
        let mut rng = key.int(c as u64).rng();
        let mut hist = vec![0u64; n + 1];
        let todo = MC_CHUNK.min(iterations - c * MC_CHUNK);
        for _ in 0..todo {
            let best = (0..k).map(|_| fair_binomial(&mut rng, n)).max().unwrap_or(0);
            hist[best] += 1;
        }
        hist
    });
    let mut histogram = vec![0u64; n + 1];
    for h in partial {
        for (a, b) in histogram.iter_mut().zip(h) {
            *a += b;
        }
    }
    let overall_max = histogram.iter().rposition(|c| *c > 0).unwrap_or(0);
    Ok(MonteCarloMax {
        n,
        k,
        iterations,
        histogram,
        overall_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn choose(n: usize, k: usize) -> BigUint {
        let mut c = BigUint::from(1u32);
        for i in 0..k {
            c = c * BigUint::from(n - i) / BigUint::from(i + 1);
        }
        c
    }

    /// num / 2^den_log2 as f64 without overflow.
    fn ratio(num: &BigUint, den_log2: u64) -> f64 {
        if num.bits() == 0 {
            return 0.0;
        }
        let shift = num.bits().saturating_sub(80);
        let mant = (num >> shift).to_string().parse::<f64>().unwrap();
        (mant.log2() + shift as f64 - den_log2 as f64).exp2()
    }

    fn exact_tail(n: usize, m: usize) -> f64 {
        let s: BigUint = (m..=n).map(|j| choose(n, j)).sum();
        ratio(&s, n as u64)
    }

    fn exact_pmf_max(n: usize, k: usize, m: usize) -> f64 {
        let total = BigUint::from(1u32) << n;
        let below = |t: usize| -> BigUint {
            let s: BigUint = (t..=n).map(|j| choose(n, j)).sum();
            (&total - s).pow(k as u32)
        };
        ratio(&(below(m + 1) - below(m)), (n * k) as u64)
    }

    #[test]
    fn small_tails() {
        assert_eq!(binom_tail(2, 1).unwrap(), 0.75);
        assert!((binom_tail(4, 2).unwrap() - 11.0 / 16.0).abs() < 1e-15);
        assert_eq!(binom_tail(7, 0).unwrap(), 1.0);
        assert_eq!(binom_tail(7, 8).unwrap(), 0.0);
        assert!(binom_tail(7, 9).is_err());
    }

    #[test]
    fn tail_matches_big_integer_sum() {
        for (n, m) in [(108, 80), (108, 54), (500, 300), (37, 30)] {
            let exact = exact_tail(n, m);
            let got = binom_tail(n, m).unwrap();
            assert!(((got - exact) / exact).abs() < 1e-10, "n={n} m={m}: {got} vs {exact}");
        }
    }

    #[test]
    fn max_pmf_small_cases() {
        let m = max_pmf(2, 1).unwrap();
        for (a, b) in m.pmf_max.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        let m = max_pmf(1, 2).unwrap();
        assert!((m.pmf_max[0] - 0.25).abs() < 1e-15);
        assert!((m.pmf_max[1] - 0.75).abs() < 1e-15);
        assert!(max_pmf(0, 3).is_err());
        assert!(max_pmf(3, 0).is_err());
    }

    #[test]
    fn max_pmf_matches_exact_rationals() {
        for (n, k, m) in [(108, 25, 80), (108, 25, 64), (108, 25, 100), (20, 5, 14), (54, 25, 45)] {
            let exact = exact_pmf_max(n, k, m);
            let got = max_pmf(n, k).unwrap().pmf_max[m];
            assert!(
                ((got - exact) / exact).abs() < 1e-10,
                "n={n} k={k} m={m}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn reference_probability_at_80_of_108() {
        let p = max_pmf(108, 25).unwrap().pmf_max[80];
        assert!(((p - DEFAULT_P_REF) / DEFAULT_P_REF).abs() < 0.02);
        // the published constant is a truncation of the exact value
        assert!((p - 4.676_580_613e-6).abs() < 1e-14);
    }

    #[test]
    fn threshold_reproduces_80_of_108() {
        let t = empirical_threshold(108, 25, DEFAULT_P_REF, 0.0).unwrap();
        assert_eq!(t.m_star, 80);
        assert!((t.accuracy_star - 0.740_740_740_7).abs() < 1e-9);
        let t = empirical_threshold(108, 25, DEFAULT_P_REF, DEFAULT_BOOTSTRAP_OFFSET).unwrap();
        assert!((t.threshold_accuracy - (80.0 / 108.0 + 0.10)).abs() < 1e-12);
        assert!((t.threshold_accuracy - 0.84074).abs() < 1e-5);
    }

    #[test]
    fn threshold_for_half_size_test_set() {
        // probability matching by brute force over the exact pmf
        let model = max_pmf(54, 25).unwrap();
        let oracle = (model.mode()..=54)
            .map(|m| (m, (exact_pmf_max(54, 25, m) - DEFAULT_P_REF).abs()))
            .fold((0, f64::INFINITY), |b, (m, d)| if d <= b.1 { (m, d) } else { b })
            .0;
        let t = threshold_from_model(&model, DEFAULT_P_REF, 0.1).unwrap();
        assert_eq!(t.m_star, oracle);
        assert_eq!(t.m_star, 45);
    }

    #[test]
    fn threshold_caps_at_one() {
        let t = empirical_threshold(10, 25, DEFAULT_P_REF, 0.5).unwrap();
        assert_eq!(t.threshold_accuracy, 1.0);
        assert!(empirical_threshold(10, 25, 0.0, 0.1).is_err());
        assert!(empirical_threshold(10, 25, 0.1, 1.0).is_err());
    }

    #[test]
    fn zscore_identities() {
        let model = max_pmf(108, 25).unwrap();
        let n = 108.0;
        assert!(rad_zscore(model.mean_max / n, &model).unwrap().abs() < 1e-12);
        let z = rad_zscore((model.mean_max + 2.0 * model.std_max) / n, &model).unwrap();
        assert!((z - 2.0).abs() < 1e-12);
        let direct = (0.52 * n - model.mean_max) / model.std_max;
        assert_eq!(rad_zscore(0.52, &model).unwrap(), direct);
        // moments from the exact pmf
        let mean: f64 = (0..=108).map(|m| m as f64 * exact_pmf_max(108, 25, m)).sum();
        assert!((model.mean_max - mean).abs() < 1e-9);
        assert!(rad_zscore(1.2, &model).is_err());
    }

    #[test]
    fn monte_carlo_small_support_and_determinism() {
        let mc = monte_carlo_max(1, 1, 5000, 3).unwrap();
        assert_eq!(mc.histogram.len(), 2);
        assert_eq!(mc.histogram.iter().sum::<u64>(), 5000);
        let a = monte_carlo_max_with(20, 5, 20_000, 9, Exec::Sequential).unwrap();
        let b = monte_carlo_max_with(20, 5, 20_000, 9, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let mut buf = Vec::new();
        max_pmf(4, 2).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m,pmf,cumulative");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].ends_with(",1e0"));
    }

    proptest! {
        #[test]
        fn pmf_is_normalized(n in 1usize..2000, k in 1usize..100) {
            let m = max_pmf(n, k).unwrap();
            let mut s = NeumaierSum::default();
            m.pmf_max.iter().for_each(|p| s.add(*p));
            prop_assert!((s.value() - 1.0).abs() < 1e-12);
            prop_assert!(m.pmf_max.iter().all(|p| *p >= 0.0));
            prop_assert!(m.mean_max >= n as f64 / 2.0 - 1e-9 && m.mean_max <= n as f64);
        }

        #[test]
        fn tail_is_non_increasing(n in 1usize..600) {
            let t = BinomialTable::new(n);
            prop_assert!(t.upper.windows(2).all(|w| w[1] <= w[0]));
        }

        #[test]
        fn more_epochs_dominate(n in 1usize..300, k in 1usize..60) {
            let a = max_pmf(n, k).unwrap();
            let b = max_pmf(n, k + 1).unwrap();
            let (ca, cb) = (a.cumulative(), b.cumulative());
            for m in 0..=n {
                // P(max >= m) = 1 - P(max <= m - 1)
                let sa = if m == 0 { 1.0 } else { 1.0 - ca[m - 1] };
                let sb = if m == 0 { 1.0 } else { 1.0 - cb[m - 1] };
                prop_assert!(sb >= sa - 1e-12);
            }
            prop_assert!(b.mean_max >= a.mean_max - 1e-12);
        }
    }
}
