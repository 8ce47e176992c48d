use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::DiagnosticsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// Zero for closed-form predictions.
    pub acceptance_rate: f64,
}

/// Closed-form moments of `exp(-beta (x - mu)^2) * exp(-lambda x)` on the
/// whole real line: mean `mu - lambda / (2 beta)`, variance `1 / (2 beta)`.
pub fn tilt_prediction(lambda: f64, beta: f64, mu: f64) -> Moments {
    Moments {
        mean: mu - lambda / (2.0 * beta),
        variance: 1.0 / (2.0 * beta),
        acceptance_rate: 0.0,
    }
}

fn independence_chain(
    lambda: f64,
    beta: f64,
    mu: f64,
    steps: u64,
    seed: u64,
    corrected: bool,
) -> Result<Moments, DiagnosticsError> {
    if !(lambda > 0.0 && lambda.is_finite() && beta > 0.0 && beta.is_finite() && mu.is_finite()) {
        return Err(DiagnosticsError::Invalid(format!(
            "need finite lambda > 0, beta > 0 and mu, got {lambda}, {beta}, {mu}"
        )));
    }
    if steps == 0 {
        return Err(DiagnosticsError::Empty);
    }
    let proposal = Exp::new(lambda).expect("lambda checked");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_target = |x: f64| -beta * (x - mu) * (x - mu);
    let mut x = proposal.sample(&mut rng);
    let (mut mean, mut m2, mut accepted) = (0.0, 0.0, 0u64);
    for k in 1..=steps {
        let y = proposal.sample(&mut rng);
        let mut log_ratio = log_target(y) - log_target(x);
        if corrected {
            log_ratio += lambda * (y - x);
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        if u.ln() <= log_ratio.min(0.0) {
            x = y;
            accepted += 1;
        }
        let delta = x - mean;
        mean += delta / k as f64;
        m2 += delta * (x - mean);
    }
    Ok(Moments {
        mean,
        variance: m2 / steps as f64,
        acceptance_rate: accepted as f64 / steps as f64,
    })
}

/// Independence sampler with `Exp(lambda)` proposals accepted by the energy
/// ratio alone, omitting the proposal density. Moments over every step.
pub fn toy_tilt(lambda: f64, beta: f64, mu: f64, steps: u64, seed: u64) -> Result<Moments, DiagnosticsError> {
    independence_chain(lambda, beta, mu, steps, seed, false)
}

/// The same sampler with the full Metropolis-Hastings correction; targets
/// `exp(-beta (x - mu)^2)` on `x >= 0`.
pub fn toy_tilt_corrected(
    lambda: f64,
    beta: f64,
    mu: f64,
    steps: u64,
    seed: u64,
) -> Result<Moments, DiagnosticsError> {
    independence_chain(lambda, beta, mu, steps, seed, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation.
    pub r: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit, DiagnosticsError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(DiagnosticsError::Invalid("need at least 2 paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::Invalid("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        r: if syy == 0.0 { 0.0 } else { sxy / (sxx * syy).sqrt() },
    })
}
