//! Nonfeedback baseline: transmit a regular-simplex codeword over the first
//! M - 1 channel uses, decode by nearest codeword.

use crate::channel::{forward, ChannelSpec, EnergyLedger, NoiseStream};
use crate::geometry::{make_simplex, Constellation};
use crate::montecarlo::{ErrorEvent, Scheme, TrialOutcome};
use crate::{Error, Result};

/// Simplex codebook spending the whole budget n * P.
#[derive(Debug, Clone)]
pub struct BaselineScheme {
    constellation: Constellation,
}

impl BaselineScheme {
    pub fn new(m: usize, spec: &ChannelSpec) -> Result<Self> {
        if spec.n < (m - 1) as u64 {
            return Err(Error::invalid(
                "n",
                format!(
                    "block length {} shorter than simplex dimension {}",
                    spec.n,
                    m - 1
                ),
            ));
        }
        Ok(BaselineScheme {
            constellation: make_simplex(m, spec.budget())?,
        })
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// Codeword for message `w`.
    pub fn encode(&self, w: usize) -> &[f64] {
        self.constellation.point(w)
    }

    /// Nearest-codeword decoding; ties resolve to the smaller index.
    pub fn decode(&self, y: &[f64]) -> Result<usize> {
        self.constellation.check_dim(y)?;
        let mut best = 0usize;
        let mut best_d = self.constellation.squared_distance_to(y, 0);
        for w in 1..self.constellation.m() {
            let d = self.constellation.squared_distance_to(y, w);
            if d < best_d {
                best = w;
                best_d = d;
            }
        }
        Ok(best)
    }
}

impl Scheme for BaselineScheme {
    fn message_count(&self) -> usize {
        self.constellation.m()
    }

    fn label(&self) -> &'static str {
        "baseline"
    }

    fn simulate(
        &self,
        w: usize,
        spec: &ChannelSpec,
        stream: &mut NoiseStream,
    ) -> Result<TrialOutcome> {
        let mut ledger = EnergyLedger::new(spec.budget());
        let x = self.encode(w);
        let mut y = vec![0.0; x.len()];
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = forward(xi, &mut ledger, stream)?;
        }
        // remaining uses transmit nothing
        let decoded = self.decode(&y)?;
        Ok(TrialOutcome {
            decoded,
            event: (decoded != w).then_some(ErrorEvent::Decode),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::run_batch;
    use crate::numerics::q_function;

    #[test]
    fn codewords_use_full_budget() {
        let spec = ChannelSpec::new(1.5, 8, 0.0).unwrap();
        let scheme = BaselineScheme::new(4, &spec).unwrap();
        for w in 0..4 {
            let e: f64 = scheme.encode(w).iter().map(|x| x * x).sum();
            assert!((e - spec.budget()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_short_blocks() {
        let spec = ChannelSpec::new(1.0, 2, 0.0).unwrap();
        assert!(BaselineScheme::new(4, &spec).is_err());
        assert!(BaselineScheme::new(3, &spec).is_ok());
    }

    #[test]
    fn noiseless_decoding_is_exact() {
        let spec = ChannelSpec::new(1.0, 10, 0.0).unwrap();
        let scheme = BaselineScheme::new(6, &spec).unwrap();
        for w in 0..6 {
            let y = scheme.encode(w).to_vec();
            assert_eq!(scheme.decode(&y).unwrap(), w);
        }
    }

    #[test]
    fn decode_tie_prefers_smaller_index() {
        let spec = ChannelSpec::new(1.0, 4, 0.0).unwrap();
        let scheme = BaselineScheme::new(2, &spec).unwrap();
        // origin is equidistant from both antipodal codewords
        assert_eq!(scheme.decode(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn binary_error_rate_matches_q() {
        // M=2, nP=4: simplex is +/-2 on one axis, p_e = Q(2).
        let spec = ChannelSpec::new(1.0, 4, 0.0).unwrap();
        let scheme = BaselineScheme::new(2, &spec).unwrap();
        let est = run_batch(&scheme, &spec, 400_000, 21).unwrap();
        let truth = q_function(2.0).value();
        assert!(
            est.ci_low <= truth && truth <= est.ci_high,
            "Q(2)={truth} outside [{}, {}]",
            est.ci_low,
            est.ci_high
        );
    }

    #[test]
    fn error_rate_symmetric_across_messages() {
        let spec = ChannelSpec::new(1.0, 6, 0.0).unwrap();
        let scheme = BaselineScheme::new(3, &spec).unwrap();
        let mut per_msg = [(0u64, 0u64); 3]; // (trials, errors)
        for trial in 0..120_000u64 {
            let mut stream = NoiseStream::new(77, trial, 0.0);
            let w = stream.uniform_message(3);
            let out = scheme.simulate(w, &spec, &mut stream).unwrap();
            per_msg[w].0 += 1;
            if out.event.is_some() {
                per_msg[w].1 += 1;
            }
        }
        let rates: Vec<f64> = per_msg.iter().map(|&(t, e)| e as f64 / t as f64).collect();
        let avg = rates.iter().sum::<f64>() / 3.0;
        for r in &rates {
            assert!((r - avg).abs() < 0.15 * avg, "rates {rates:?}");
        }
    }
}
