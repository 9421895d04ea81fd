//! Multi-threaded driver for the randomised Tukey HSD test.

use qrelcmp_core::measures::ScoreMatrix;
use qrelcmp_core::sigtest::{
    self, significance_from_null, validate_inputs, NullSampler, SigTestConfig, SignificanceSet, TestMode,
};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Same result as [`sigtest::tukey_hsd_pvalues`], with the null iterations
/// spread over the current rayon pool.
pub fn tukey_hsd_pvalues(sm: &ScoreMatrix, cfg: &SigTestConfig) -> Result<SignificanceSet> {
    validate_inputs(sm, cfg)?;
    match cfg.mode {
        TestMode::Exhaustive => Ok(sigtest::tukey_hsd_pvalues(sm, cfg)?),
        TestMode::Sampled => {
            let null: Vec<f64> = (0..cfg.permutations)
                .into_par_iter()
                .map_init(|| NullSampler::new(sm, cfg.master_seed), |s, b| s.statistic(b))
                .collect();
            Ok(significance_from_null(sm, cfg, &null)?)
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn parallel_equals_serial_for_any_worker_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..15).map(|_| rng.gen::<f64>()).collect()).collect();
        let sm = ScoreMatrix::from_rows(
            (0..6).map(|i| format!("s{i}")).collect(),
            (0..15).map(|t| format!("t{t}")).collect(),
            &rows,
        )
        .unwrap();
        let cfg = SigTestConfig {
            permutations: 3000,
            master_seed: 17,
            ..SigTestConfig::default()
        };
        let serial = sigtest::tukey_hsd_pvalues(&sm, &cfg).unwrap();
        for threads in [1, 2, 7] {
            let par = with_threads(Some(threads), || tukey_hsd_pvalues(&sm, &cfg))
                .unwrap()
                .unwrap();
            assert_eq!(par, serial);
        }
    }
}
