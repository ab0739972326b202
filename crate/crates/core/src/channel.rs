//! Channel model: forward AWGN link with unit noise variance, feedback AWGN
//! link with variance `alpha`, a strict peak energy ledger, and deterministic
//! per-trial noise streams.
//!
//! Every trial owns a [`NoiseStream`] seeded from (run seed, trial index) via
//! the ChaCha stream mechanism, so a batch produces identical results for any
//! worker count or execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Static description of one transmission problem instance.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSpec {
    /// Average power constraint P; the total energy budget is `n * P`.
    pub power: f64,
    /// Block length.
    pub n: u64,
    /// Feedback noise variance (0 means noiseless feedback).
    pub alpha: f64,
}

impl ChannelSpec {
    pub fn new(power: f64, n: u64, alpha: f64) -> Result<Self> {
        if !(power > 0.0) {
            return Err(Error::invalid("power", format!("{power} must be > 0")));
        }
        if n == 0 {
            return Err(Error::invalid("n", "block length must be >= 1"));
        }
        if !(alpha >= 0.0) {
            return Err(Error::invalid("alpha", format!("{alpha} must be >= 0")));
        }
        Ok(ChannelSpec { power, n, alpha })
    }

    /// Total energy budget n * P.
    pub fn budget(&self) -> f64 {
        self.n as f64 * self.power
    }
}

/// Tracks cumulative transmitted energy against the peak constraint.
///
/// The tolerance absorbs rounding when a scheme spends its budget exactly;
/// anything beyond it is an encoder bug and is reported as an error rather
/// than clipped.
#[derive(Debug, Clone, Copy)]
pub struct EnergyLedger {
    budget: f64,
    spent: f64,
}

const BUDGET_TOL: f64 = 1e-9;

impl EnergyLedger {
    pub fn new(budget: f64) -> Self {
        EnergyLedger { budget, spent: 0.0 }
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        (self.budget - self.spent).max(0.0)
    }

    /// Whether a further expenditure of `energy` would stay within budget.
    pub fn can_afford(&self, energy: f64) -> bool {
        self.spent + energy <= self.budget + BUDGET_TOL
    }

    /// Records an expenditure, failing if it would exceed the budget.
    pub fn charge(&mut self, energy: f64) -> Result<()> {
        debug_assert!(energy >= 0.0);
        if !self.can_afford(energy) {
            return Err(Error::BudgetExceeded {
                spent: self.spent,
                increment: energy,
                budget: self.budget,
            });
        }
        self.spent += energy;
        Ok(())
    }
}

/// Deterministic randomness source for a single trial.
///
/// Built on ChaCha8 with the trial index as the stream id, which gives
/// independent streams for every trial of a run without coordination.
/// The generator and the normal sampling method are fixed deliberately:
/// output bytes are part of the reproducibility contract.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    alpha: f64,
}

impl NoiseStream {
    pub fn new(seed: u64, trial: u64, alpha: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        NoiseStream { rng, alpha }
    }

    /// Feedback noise variance this stream was built with.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Draws a uniform message index in `0..m`.
    pub fn uniform_message(&mut self, m: usize) -> usize {
        self.rng.random_range(0..m)
    }

    /// Standard normal draw for the forward link.
    pub fn forward_noise(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Feedback-link noise with standard deviation sqrt(alpha). Returns
    /// exactly 0.0 without consuming randomness when alpha is 0, so noiseless
    /// feedback reproduces the forward observation bit for bit.
    pub fn feedback_noise(&mut self) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        self.alpha.sqrt() * z
    }
}

/// Sends one symbol over the forward link: charges its energy, then adds
/// unit-variance noise.
pub fn forward(x: f64, ledger: &mut EnergyLedger, stream: &mut NoiseStream) -> Result<f64> {
    ledger.charge(x * x)?;
    Ok(x + stream.forward_noise())
}

/// Returns what the transmitter sees of a channel output through the noisy
/// feedback link. Feedback transmissions are free of the energy constraint.
pub fn feedback(y: f64, stream: &mut NoiseStream) -> f64 {
    y + stream.feedback_noise()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation_and_budget() {
        assert!(ChannelSpec::new(0.0, 10, 0.1).is_err());
        assert!(ChannelSpec::new(1.0, 0, 0.1).is_err());
        assert!(ChannelSpec::new(1.0, 10, -0.1).is_err());
        let spec = ChannelSpec::new(2.0, 5, 0.0).unwrap();
        assert_eq!(spec.budget(), 10.0);
    }

    #[test]
    fn ledger_enforces_budget() {
        let mut ledger = EnergyLedger::new(4.0);
        ledger.charge(3.0).unwrap();
        assert_eq!(ledger.spent(), 3.0);
        assert!((ledger.remaining() - 1.0).abs() < 1e-15);
        assert!(ledger.can_afford(1.0));
        assert!(!ledger.can_afford(1.1));
        assert!(matches!(
            ledger.charge(1.5),
            Err(Error::BudgetExceeded { .. })
        ));
        // failed charge must not mutate
        assert_eq!(ledger.spent(), 3.0);
        // exact spend within tolerance succeeds
        ledger.charge(1.0 + 1e-12).unwrap();
    }

    #[test]
    fn forward_charges_energy() {
        let mut ledger = EnergyLedger::new(4.0);
        let mut stream = NoiseStream::new(1, 0, 0.0);
        forward(2.0, &mut ledger, &mut stream).unwrap();
        assert_eq!(ledger.spent(), 4.0);
        assert!(forward(0.5, &mut ledger, &mut stream).is_err());
    }

    #[test]
    fn noiseless_feedback_is_exact() {
        let mut stream = NoiseStream::new(7, 3, 0.0);
        for &y in &[0.0, -1.5, 3.25, 1e-300] {
            assert_eq!(feedback(y, &mut stream).to_bits(), y.to_bits());
        }
    }

    #[test]
    fn reproducible_across_instances() {
        let mut a = NoiseStream::new(42, 9, 0.3);
        let mut b = NoiseStream::new(42, 9, 0.3);
        for _ in 0..100 {
            assert_eq!(a.forward_noise().to_bits(), b.forward_noise().to_bits());
            assert_eq!(a.feedback_noise().to_bits(), b.feedback_noise().to_bits());
            assert_eq!(a.uniform_message(17), b.uniform_message(17));
        }
    }

    #[test]
    fn distinct_trials_distinct_streams() {
        let mut a = NoiseStream::new(42, 0, 0.0);
        let mut b = NoiseStream::new(42, 1, 0.0);
        let xa: Vec<f64> = (0..8).map(|_| a.forward_noise()).collect();
        let xb: Vec<f64> = (0..8).map(|_| b.forward_noise()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn forward_noise_moments() {
        let mut stream = NoiseStream::new(123, 0, 0.0);
        let n = 200_000;
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = stream.forward_noise();
            s1 += z;
            s2 += z * z;
            s4 += z * z * z * z;
        }
        let nf = n as f64;
        assert!((s1 / nf).abs() < 0.01, "mean {}", s1 / nf);
        assert!((s2 / nf - 1.0).abs() < 0.02, "var {}", s2 / nf);
        assert!((s4 / nf - 3.0).abs() < 0.1, "4th moment {}", s4 / nf);
    }

    #[test]
    fn feedback_noise_variance_scales_with_alpha() {
        let alpha = 0.25;
        let mut stream = NoiseStream::new(9, 0, alpha);
        let n = 200_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            let z = stream.feedback_noise();
            s2 += z * z;
        }
        assert!((s2 / n as f64 - alpha).abs() < 0.01);
    }

    #[test]
    fn forward_and_feedback_noise_uncorrelated() {
        let mut stream = NoiseStream::new(5, 0, 1.0);
        let n = 200_000;
        let mut cross = 0.0;
        for _ in 0..n {
            let z = stream.forward_noise();
            let zt = stream.feedback_noise();
            cross += z * zt;
        }
        assert!((cross / n as f64).abs() < 0.01);
    }

    #[test]
    fn uniform_message_covers_range() {
        let mut stream = NoiseStream::new(0, 0, 0.0);
        let m = 5;
        let mut counts = vec![0u32; m];
        for _ in 0..50_000 {
            counts[stream.uniform_message(m)] += 1;
        }
        for &c in &counts {
            let p = c as f64 / 50_000.0;
            assert!((p - 0.2).abs() < 0.01, "count {c}");
        }
    }
}
