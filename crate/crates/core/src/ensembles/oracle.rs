use statrs::distribution::{ContinuousCDF, Gamma};

use super::{PreparedDensity, RandomStream};
use crate::error::{Error, Result};
use crate::hilbert::StateVector;

/// Smallest admissible truncation cap for the rejection oracle.
pub const MIN_ORACLE_CAP: f64 = 50.0;

/// One accepted draw of the rejection oracle.
#[derive(Clone, Debug)]
pub struct OracleDraw {
    /// Unnormalized, approximately GA(ρ)-distributed.
    pub state: StateVector,
    /// Number of G(ρ) proposals consumed, including the accepted one.
    pub attempts: u64,
}

/// Independent check on the exact GA sampler: propose `Ψ ~ G(ρ)` and accept
/// with probability `min(‖Ψ‖², cap)/cap`.
///
/// The only error is the truncation of the weight at `cap`, which affects
/// proposals with `‖Ψ‖² > cap`; see [`truncation_tail_bound`].
pub fn rejection_oracle_ga(
    stream: &mut RandomStream,
    prep: &PreparedDensity,
    cap: f64,
) -> Result<OracleDraw> {
    if !(cap >= MIN_ORACLE_CAP) {
        return Err(Error::param(
            "cap",
            format!("must be at least {MIN_ORACLE_CAP}, got {cap}"),
        ));
    }
    // expected attempts per acceptance is ~cap; e^{-100} chance of a false alarm
    let max_attempts = (100.0 * cap).ceil() as u64;
    for attempt in 1..=max_attempts {
        let psi = prep.sample_g(stream);
        let w = psi.norm_squared().min(cap);
        if stream.uniform() * cap < w {
            return Ok(OracleDraw {
                state: psi,
                attempts: attempt,
            });
        }
    }
    Err(Error::AcceptanceStarvation {
        attempts: max_attempts,
        cap,
    })
}

/// Upper bound on `P(‖Ψ‖² > cap)` for `Ψ ~ G(ρ)`.
///
/// `‖Ψ‖² = Σ_j p_j E_j` with `E_j` i.i.d. Exp(1), which is dominated by
/// `p_max · Gamma(k, 1)` where `k` counts the nonzero eigenvalues.
pub fn truncation_tail_bound(prep: &PreparedDensity, cap: f64) -> f64 {
    let k = prep.weights().iter().filter(|&&p| p > 0.0).count().max(1);
    let gamma = Gamma::new(k as f64, 1.0).expect("positive shape and rate");
    gamma.sf(cap / prep.max_weight())
}
