//! Linear feedback scheme: PAM initial transmission followed by iterative
//! refinement of the receiver's running estimate, with a stopping time that
//! keeps the transmitted energy within budget.
//!
//! The scheme uses only the first `nbar = sqrt(n)` channel uses. Each
//! refinement resends the current estimation error, amplified by `1 + delta`;
//! the receiver folds all observations into a single alternating sum and
//! picks the nearest PAM point.

use crate::channel::{feedback, forward, ChannelSpec, EnergyLedger, NoiseStream};
use crate::montecarlo::{ErrorEvent, Scheme, TrialOutcome};
use crate::numerics::{chi_square_tail_bound, Probability};
use crate::{Error, Result};

/// Parameters of the linear scheme.
#[derive(Debug, Clone, Copy)]
pub struct LinearParams {
    pub m: usize,
    /// L = floor(M / 2); the PAM spacing is `amplitude / L`.
    pub l: usize,
    /// Scale of the initial PAM transmission.
    pub amplitude: f64,
    /// Refinement amplification above unity.
    pub delta: f64,
    /// Number of channel uses consumed, sqrt(n).
    pub nbar: u64,
}

fn nbar_for(n: u64) -> Result<u64> {
    let nbar = (n as f64).sqrt().round() as u64;
    if nbar * nbar != n || nbar < 2 {
        return Err(Error::invalid(
            "n",
            format!("{n} must be a perfect square >= 4 for the linear scheme"),
        ));
    }
    Ok(nbar)
}

impl LinearParams {
    /// Schedule for noiseless feedback: unit-power initial symbol and the
    /// vanishing amplification delta = ln(4 n L^2) / (2 sqrt(n)).
    pub fn noise_free_schedule(m: usize, n: u64, power: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("M", format!("{m} < 2")));
        }
        let nbar = nbar_for(n)?;
        let l = m / 2;
        let delta = (4.0 * n as f64 * (l * l) as f64).ln() / (2.0 * nbar as f64);
        if !(delta > 0.0) {
            return Err(Error::invalid("n", "block too short for a positive delta"));
        }
        Ok(LinearParams {
            m,
            l,
            amplitude: power.sqrt(),
            delta,
            nbar,
        })
    }

    /// Schedule for noisy feedback: the initial symbol carries a constant
    /// fraction lambda of the whole budget and delta stays bounded away
    /// from zero, both chosen by the optimizing closed forms.
    pub fn noisy_schedule(m: usize, n: u64, power: f64, alpha: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("M", format!("{m} < 2")));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid(
                "alpha",
                "must be positive; use noise_free_schedule for alpha = 0",
            ));
        }
        let nbar = nbar_for(n)?;
        let (delta, lambda) = crate::exponents::optimal_linear_params(m, alpha)?;
        Ok(LinearParams {
            m,
            l: m / 2,
            amplitude: (lambda * n as f64 * power).sqrt(),
            delta,
            nbar,
        })
    }

    /// PAM constellation point for message `w` (0-based), largest first.
    pub fn pam_point(&self, w: usize) -> f64 {
        assert!(w < self.m);
        let l = self.l as f64;
        let offset = if self.m % 2 == 1 {
            l - w as f64
        } else {
            l - 0.5 - w as f64
        };
        offset / l * self.amplitude
    }

    /// Half the PAM spacing: estimate errors below this never flip a decode.
    pub fn decision_halfwidth(&self) -> f64 {
        self.amplitude / (2.0 * self.l as f64)
    }
}

/// Full record of one linear-scheme trial.
#[derive(Debug, Clone)]
pub struct LinearTranscript {
    pub w: usize,
    /// Transmitted symbols over the first nbar uses (zeros after eta).
    pub x: Vec<f64>,
    /// Channel outputs over the first nbar uses.
    pub y: Vec<f64>,
    /// Feedback observations over the first nbar uses.
    pub y_fb: Vec<f64>,
    /// Stopping time: number of uses that actually carried energy.
    pub eta: u64,
    pub xhat1: f64,
    pub decoded: usize,
    pub event: Option<ErrorEvent>,
}

pub const LINEAR_CSV_HEADER: &str = "trial,w,eta,xhat1,what,event";

impl LinearTranscript {
    pub fn csv_row(&self, trial: u64) -> String {
        format!(
            "{},{},{},{},{},{}",
            trial,
            self.w,
            self.eta,
            crate::fmt_g17(self.xhat1),
            self.decoded,
            if self.event.is_some() { "e1" } else { "" },
        )
    }
}

/// Instantiated linear scheme.
#[derive(Debug, Clone, Copy)]
pub struct LinearScheme {
    params: LinearParams,
}

impl LinearScheme {
    pub fn new(params: LinearParams, spec: &ChannelSpec) -> Result<Self> {
        let nbar = nbar_for(spec.n)?;
        if nbar != params.nbar {
            return Err(Error::invalid(
                "n",
                format!(
                    "schedule built for nbar {} but spec has {nbar}",
                    params.nbar
                ),
            ));
        }
        if params.amplitude * params.amplitude > spec.budget() + 1e-9 {
            return Err(Error::invalid(
                "amplitude",
                "initial symbol alone exceeds the energy budget",
            ));
        }
        Ok(LinearScheme { params })
    }

    pub fn params(&self) -> LinearParams {
        self.params
    }

    /// Alternating-sum estimate of the initial symbol from all nbar outputs.
    pub fn estimate(&self, y: &[f64]) -> f64 {
        let g = 1.0 + self.params.delta;
        let mut sum = 0.0;
        let mut sign = 1.0;
        let mut gain = 1.0;
        for &yi in y {
            sum += sign * yi / gain;
            sign = -sign;
            gain *= g;
        }
        sum
    }

    /// Nearest PAM point to the estimate; ties resolve to the smaller index.
    pub fn decode(&self, xhat1: f64) -> usize {
        let mut best = 0usize;
        let mut best_d = (self.params.pam_point(0) - xhat1).abs();
        for w in 1..self.params.m {
            let d = (self.params.pam_point(w) - xhat1).abs();
            if d < best_d {
                best = w;
                best_d = d;
            }
        }
        best
    }

    /// Runs one trial and keeps the full transcript.
    pub fn simulate_transcript(
        &self,
        w: usize,
        spec: &ChannelSpec,
        stream: &mut NoiseStream,
    ) -> Result<LinearTranscript> {
        let p = self.params;
        let g = 1.0 + p.delta;
        let mut ledger = EnergyLedger::new(spec.budget());
        let nbar = p.nbar as usize;
        let mut x = vec![0.0; nbar];
        let mut y = vec![0.0; nbar];
        let mut y_fb = vec![0.0; nbar];
        let mut eta = 0u64;
        let mut stopped = false;
        for i in 0..nbar {
            let intended = if i == 0 {
                p.pam_point(w)
            } else {
                g * (y_fb[i - 1] - x[i - 1])
            };
            // Once the budget would be violated the transmitter goes silent
            // for good; the energy constraint is never clipped.
            if !stopped && ledger.can_afford(intended * intended) {
                x[i] = intended;
                eta = (i + 1) as u64;
            } else {
                stopped = true;
                x[i] = 0.0;
            }
            y[i] = forward(x[i], &mut ledger, stream)?;
            y_fb[i] = feedback(y[i], stream);
        }
        let xhat1 = self.estimate(&y);
        let decoded = self.decode(xhat1);
        Ok(LinearTranscript {
            w,
            x,
            y,
            y_fb,
            eta,
            xhat1,
            decoded,
            event: (decoded != w).then_some(ErrorEvent::Decode),
        })
    }
}

impl Scheme for LinearScheme {
    fn message_count(&self) -> usize {
        self.params.m
    }

    fn label(&self) -> &'static str {
        "linear"
    }

    fn simulate(
        &self,
        w: usize,
        spec: &ChannelSpec,
        stream: &mut NoiseStream,
    ) -> Result<TrialOutcome> {
        let t = self.simulate_transcript(w, spec, stream)?;
        Ok(TrialOutcome {
            decoded: t.decoded,
            event: t.event,
        })
    }
}

/// Estimate of the initial symbol from the unconstrained virtual
/// transmission, reconstructed from a recorded transcript. It differs from
/// the actual estimate only when the stopping time truncated a refinement.
pub fn virtual_estimate(t: &LinearTranscript, params: &LinearParams) -> f64 {
    let g = 1.0 + params.delta;
    let nbar = params.nbar as usize;
    // forward noise and feedback noise recovered from the transcript
    let z: Vec<f64> = (0..nbar).map(|i| t.y[i] - t.x[i]).collect();
    let z_fb: Vec<f64> = (0..nbar).map(|i| t.y_fb[i] - t.y[i]).collect();
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut gain = 1.0;
    for i in 0..nbar {
        let xi = if i == 0 {
            params.pam_point(t.w)
        } else {
            g * (z[i - 1] + z_fb[i - 1])
        };
        let yi = xi + z[i];
        sum += sign * yi / gain;
        sign = -sign;
        gain *= g;
    }
    sum
}

/// Variance of the virtual estimation error xhat1' - X_1: the refinement
/// residual plus the accumulated feedback noise.
pub fn estimation_noise_variance(params: &LinearParams, alpha: f64) -> f64 {
    let g2 = (1.0 + params.delta) * (1.0 + params.delta);
    let nbar = params.nbar;
    let mut n_var = g2.powi(-(nbar as i32 - 1));
    let mut gain = 1.0;
    for _ in 0..(nbar - 1) {
        n_var += alpha / gain;
        gain *= g2;
    }
    n_var
}

/// Tail argument of the budget-exhaustion bound: the stopping time truncates
/// only if chi^2 with `k` degrees of freedom exceeds `x`.
pub fn budget_bound_tail_argument(params: &LinearParams, spec: &ChannelSpec) -> (u32, f64) {
    let k = (params.nbar - 1) as u32;
    let g2 = (1.0 + params.delta) * (1.0 + params.delta);
    let x = (spec.budget() - params.amplitude * params.amplitude) / (g2 * (1.0 + spec.alpha));
    (k, x)
}

/// Chi-square bound on the probability that the stopping time truncates
/// a refinement.
pub fn budget_bound(params: &LinearParams, spec: &ChannelSpec) -> Result<Probability> {
    let (k, x) = budget_bound_tail_argument(params, spec);
    chi_square_tail_bound(k, x)
}
