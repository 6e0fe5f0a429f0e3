//! Caps on exhaustive subset enumeration.

use crate::error::{Error, Result};

/// Default number of subsets an exhaustive search may visit.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "EXPANDER_CS_BUDGET";

/// Reads the budget from `EXPANDER_CS_BUDGET`, falling back to the default
/// when unset. A malformed value is an error rather than silently ignored.
pub fn from_env() -> Result<u64> {
    match std::env::var(BUDGET_ENV) {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            Error::invalid(format!("{BUDGET_ENV} must be a non-negative integer, got {raw:?}"))
        }),
        Err(_) => Ok(DEFAULT_BUDGET),
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of nonempty subsets of an `n`-set with at most `s` elements.
pub fn subsets_up_to(n: usize, s: usize) -> u128 {
    (1..=s.min(n)).fold(0u128, |acc, i| acc.saturating_add(binomial(n, i)))
}

/// Fails with [`Error::BudgetExceeded`] unless enumerating all subsets of
/// size `1..=s` fits in `budget`. Returns the required count.
pub fn ensure_within(n: usize, s: usize, budget: u64) -> Result<u128> {
    let required = subsets_up_to(n, s);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(required)
}
