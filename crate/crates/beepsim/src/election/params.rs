//! Derived election parameters.
//!
//! Every quantity here is computed with exact integer arithmetic: the working
//! precision `q̂`, the state-optimal round count `δ`, the fixed-error solo-test
//! length `m`, and the knockout round bound `R(n)`. No floating-point
//! logarithms are involved, so parameter choices are reproducible across
//! platforms and the ceiling semantics are unambiguous.

use num_bigint::BigUint;
use thiserror::Error;

/// Exponent in the state-optimal termination bound: the per-call acceptance
/// probability is pushed below `ε^SO_EXPONENT`.
pub const SO_EXPONENT: u32 = 5;

/// Number of silent attack rounds the constant-state detector accumulates
/// before it runs its final vote.
pub const CS_COUNT_BOUND: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubKind {
    StateOptimal,
    FixedError,
    ConstantState,
    DoubleSafe,
}

impl SubKind {
    pub const ALL: [SubKind; 4] = [
        SubKind::StateOptimal,
        SubKind::FixedError,
        SubKind::ConstantState,
        SubKind::DoubleSafe,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SubKind::StateOptimal => "state-optimal",
            SubKind::FixedError => "fixed-error",
            SubKind::ConstantState => "constant-state",
            SubKind::DoubleSafe => "double-safe",
        }
    }

    pub fn parse(s: &str) -> Option<SubKind> {
        SubKind::ALL.iter().copied().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for SubKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("precision must be at least 2, got {0}")]
    PrecisionTooSmall(u64),
    #[error("error bound must satisfy 0 < epsilon < 1, got {0}/{1}")]
    EpsilonRange(u64, u64),
    #[error("population lower bound must be at least 1")]
    NTildeZero,
    #[error("state-optimal exponent must be at least 1")]
    ExponentZero,
    #[error("count bound must be at least 1")]
    CountBoundZero,
}

/// A fully derived parameter set for one election configuration.
///
/// `epsilon` is kept as an exact reduced fraction `(num, den)`; all derived
/// quantities are the least integers satisfying their defining inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElectionParams {
    pub sub: SubKind,
    /// Machine precision `q`: nontrivial probabilities must lie in
    /// `[1/q, 1 - 1/q]`.
    pub q: u64,
    /// Target error bound as a reduced fraction.
    pub epsilon: (u64, u64),
    /// Lower bound on the network size (used only by the state-optimal
    /// detector).
    pub n_tilde: u64,
    /// Working precision `q̂ = min(q, ⌈1/ε⌉)`. Knockout laziness is `1/q̂`.
    pub q_hat: u64,
    /// State-optimal call length: least `δ` with `q̂^(δ·Ñ) ≥ (1/ε)^c`.
    pub delta: u64,
    /// Fixed-error solo-test length: least `m` with `2^m ≥ 2/ε`.
    pub m: u32,
    /// State-optimal safety exponent `c`.
    pub c: u32,
    /// Constant-state silent-round quota.
    pub count_bound: u8,
}

fn reduce(num: u64, den: u64) -> (u64, u64) {
    let g = num_integer::gcd(num, den);
    (num / g, den / g)
}

/// Least `x` with `base^x · lhs ≥ rhs`, for `base ≥ 2` and `lhs < rhs`.
fn least_power(base: &BigUint, mut lhs: BigUint, rhs: &BigUint) -> u64 {
    let mut x = 0u64;
    while lhs < *rhs {
        lhs *= base;
        x += 1;
    }
    x
}

impl ElectionParams {
    pub fn new(
        sub: SubKind,
        q: u64,
        epsilon: (u64, u64),
        n_tilde: u64,
    ) -> Result<Self, ParamError> {
        Self::with_options(sub, q, epsilon, n_tilde, SO_EXPONENT, CS_COUNT_BOUND)
    }

    /// Like [`ElectionParams::new`] but with the state-optimal exponent and
    /// the constant-state count bound as explicit knobs.
    pub fn with_options(
        sub: SubKind,
        q: u64,
        epsilon: (u64, u64),
        n_tilde: u64,
        c: u32,
        count_bound: u8,
    ) -> Result<Self, ParamError> {
        if q < 2 {
            return Err(ParamError::PrecisionTooSmall(q));
        }
        let (a, b) = epsilon;
        if a == 0 || b == 0 || a >= b {
            return Err(ParamError::EpsilonRange(a, b));
        }
        if n_tilde == 0 {
            return Err(ParamError::NTildeZero);
        }
        if c == 0 {
            return Err(ParamError::ExponentZero);
        }
        if count_bound == 0 {
            return Err(ParamError::CountBoundZero);
        }
        let (a, b) = reduce(a, b);
        // ⌈1/ε⌉ = ⌈b/a⌉, computed in u128 to dodge the b + a - 1 overflow.
        let ceil_recip = ((b as u128 + a as u128 - 1) / a as u128).min(q as u128) as u64;
        let q_hat = ceil_recip.max(2);

        let big = |v: u64| BigUint::from(v);
        // δ: least d with a^c · (q̂^Ñ)^d ≥ b^c.
        let delta = least_power(
            &big(q_hat).pow(n_tilde.try_into().unwrap_or(u32::MAX)),
            big(a).pow(c),
            &big(b).pow(c),
        );
        // m: least m ≥ 1 with a · 2^m ≥ 2b.
        let m = least_power(&big(2u64), big(a), &(big(b) * 2u32)).max(1) as u32;

        Ok(ElectionParams {
            sub,
            q,
            epsilon: (a, b),
            n_tilde,
            q_hat,
            delta: delta.max(1),
            m,
            c,
            count_bound,
        })
    }

    /// Analysis-only knockout round bound `R = ⌈4·log_q̂(max(n, 1/ε))⌉`,
    /// computed as the least `r` with `q̂^r ≥ max(n, ⌈1/ε⌉)^4`.
    pub fn r_bound(&self, n: u64) -> u64 {
        let (a, b) = self.epsilon;
        let ceil_recip = ((b as u128 + a as u128 - 1) / a as u128) as u64;
        let m = n.max(ceil_recip).max(1);
        least_power(
            &BigUint::from(self.q_hat),
            BigUint::from(1u32),
            &BigUint::from(m).pow(4),
        )
    }

    /// Probability of staying quiet in a knockout round, as `(num, den)` for
    /// the weighted draw: lazy with probability `1/q̂`.
    pub fn lazy_ratio(&self) -> (u64, u64) {
        (1, self.q_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(sub: SubKind, q: u64, eps: (u64, u64), nt: u64) -> ElectionParams {
        ElectionParams::new(sub, q, eps, nt).unwrap()
    }

    #[test]
    fn q_hat_is_min_of_q_and_ceil_recip() {
        assert_eq!(p(SubKind::FixedError, 8, (1, 4), 1).q_hat, 4);
        assert_eq!(p(SubKind::FixedError, 2, (1, 16), 1).q_hat, 2);
        assert_eq!(p(SubKind::FixedError, 100, (1, 3), 1).q_hat, 3);
        // ⌈3/2⌉ = 2 even though 3/2 is not an integer reciprocal.
        assert_eq!(p(SubKind::FixedError, 100, (2, 3), 1).q_hat, 2);
    }

    #[test]
    fn delta_examples() {
        // q̂ = 2, ε = 1/16: need 2^(δ·Ñ) ≥ 16^5 = 2^20.
        assert_eq!(p(SubKind::StateOptimal, 2, (1, 16), 1).delta, 20);
        assert_eq!(p(SubKind::StateOptimal, 2, (1, 16), 4).delta, 5);
        assert_eq!(p(SubKind::StateOptimal, 2, (1, 16), 3).delta, 7);
        // q̂ = 16 gives base-16 logs: 16^δ ≥ 16^5.
        assert_eq!(p(SubKind::StateOptimal, 16, (1, 16), 1).delta, 5);
        // Criterion cell: q̂ = 2, ε = 1/10, Ñ = 2: 2^(2δ) ≥ 10^5 → δ = 9.
        assert_eq!(p(SubKind::StateOptimal, 2, (1, 10), 2).delta, 9);
    }

    #[test]
    fn m_examples() {
        assert_eq!(p(SubKind::FixedError, 2, (1, 10), 1).m, 5); // 2^5 = 32 ≥ 20
        assert_eq!(p(SubKind::FixedError, 2, (1, 2), 1).m, 2); // 2^2 = 4 ≥ 4
        assert_eq!(p(SubKind::FixedError, 2, (3, 4), 1).m, 2); // 3·4 = 12 ≥ 8
    }

    #[test]
    fn epsilon_is_reduced() {
        assert_eq!(p(SubKind::FixedError, 2, (2, 20), 1).epsilon, (1, 10));
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            ElectionParams::new(SubKind::FixedError, 1, (1, 2), 1),
            Err(ParamError::PrecisionTooSmall(1))
        );
        assert_eq!(
            ElectionParams::new(SubKind::FixedError, 2, (1, 1), 1),
            Err(ParamError::EpsilonRange(1, 1))
        );
        assert_eq!(
            ElectionParams::new(SubKind::FixedError, 2, (0, 5), 1),
            Err(ParamError::EpsilonRange(0, 5))
        );
        assert_eq!(
            ElectionParams::new(SubKind::StateOptimal, 2, (1, 2), 0),
            Err(ParamError::NTildeZero)
        );
    }

    #[test]
    fn r_bound_examples() {
        // q̂ = 2, max(n, 1/ε) = 16: least r with 2^r ≥ 16^4 = 2^16.
        assert_eq!(p(SubKind::FixedError, 2, (1, 2), 1).r_bound(16), 16);
        // n = 1, ε = 1/2 → max is 2: 2^r ≥ 2^4.
        assert_eq!(p(SubKind::FixedError, 2, (1, 2), 1).r_bound(1), 4);
    }

    #[test]
    fn exponent_knob_scales_delta() {
        // c = 5 (default): 2^δ ≥ 16^5 → δ = 20; c = 1: 2^δ ≥ 16 → δ = 4.
        let custom =
            ElectionParams::with_options(SubKind::StateOptimal, 2, (1, 16), 1, 1, 8).unwrap();
        assert_eq!(custom.delta, 4);
        assert_eq!(custom.count_bound, 8);
        assert_eq!(
            ElectionParams::with_options(SubKind::StateOptimal, 2, (1, 2), 1, 0, 8),
            Err(ParamError::ExponentZero)
        );
        assert_eq!(
            ElectionParams::with_options(SubKind::ConstantState, 2, (1, 2), 1, 5, 0),
            Err(ParamError::CountBoundZero)
        );
    }

    #[test]
    fn subkind_round_trips() {
        for k in SubKind::ALL {
            assert_eq!(SubKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(SubKind::parse("nonsense"), None);
    }
}
