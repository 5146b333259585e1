//! First-order optimizers with fixed iteration budgets.

use serde::{Deserialize, Serialize};

use crate::error::{DdmError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Plain gradient descent.
    Gd,
    /// Heavy-ball momentum with coefficient `beta1`.
    Momentum,
    /// Adaptive moments with bias correction.
    Adam,
}

/// Learning-rate schedule over the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine decay from `learning_rate` to `learning_rate * final_factor`.
    Cosine { final_factor: f64 },
    /// `learning_rate * gamma^t`.
    Exponential { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
/// Missing keys take the [`Default`] values.
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub algorithm: Algorithm,
    pub learning_rate: f64,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the gradient when its global norm exceeds this value.
    pub grad_clip: Option<f64>,
    /// Record every n-th iteration; 0 records only the last one.
    pub log_every: usize,
    pub schedule: LrSchedule,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            algorithm: Algorithm::Adam,
            learning_rate: 0.01,
            iterations: 100,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            grad_clip: None,
            log_every: 1,
            schedule: LrSchedule::Constant,
        }
    }
}

impl OptimConfig {
    pub fn adam(learning_rate: f64, iterations: usize) -> Self {
        OptimConfig {
            learning_rate,
            iterations,
            ..Default::default()
        }
    }

    pub fn gd(learning_rate: f64, iterations: usize) -> Self {
        OptimConfig {
            algorithm: Algorithm::Gd,
            learning_rate,
            iterations,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DdmError::invalid(format!("optimizer: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad("grad_clip must be positive");
            }
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, t: usize) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.learning_rate,
            LrSchedule::Cosine { final_factor } => {
                let progress = t as f64 / self.iterations.max(1) as f64;
                let c = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                self.learning_rate * (final_factor + (1.0 - final_factor) * c)
            }
            LrSchedule::Exponential { gamma } => self.learning_rate * gamma.powi(t as i32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimTrace {
    /// Objective at the iterate *before* each logged step.
    pub records: Vec<TraceRecord>,
    pub params: Vec<f64>,
    /// Objective at the returned parameters.
    pub final_value: f64,
    pub iterations: usize,
}

impl OptimTrace {
    /// Appends a run that started from this one's result, shifting its
    /// iteration numbers.
    pub fn then(mut self, next: OptimTrace) -> OptimTrace {
        let offset = self.iterations;
        self.records.extend(next.records.into_iter().map(|mut r| {
            r.iteration += offset;
            r
        }));
        OptimTrace {
            records: self.records,
            params: next.params,
            final_value: next.final_value,
            iterations: offset + next.iterations,
        }
    }
}

/// Something that maps a parameter vector to `(value, gradient)`.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self(x)
    }
}

/// Objective result for parameters whose geometry overflowed; the optimizer
/// turns it into a numerical abort.
pub(crate) fn diverged(n: usize) -> (f64, Vec<f64>) {
    (f64::NAN, vec![f64::NAN; n])
}

/// Runs exactly `cfg.iterations` update steps from `x0`.
pub fn optimize<O: Objective + ?Sized>(objective: &mut O, x0: Vec<f64>, cfg: &OptimConfig) -> Result<OptimTrace> {
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0;
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut records = Vec::new();

    let abort = |iteration: usize, reason: String, records: &[TraceRecord], x: &[f64]| DdmError::NumericalAbort {
        iteration,
        reason,
        trace: Box::new(OptimTrace {
            records: records.to_vec(),
            params: x.to_vec(),
            final_value: f64::NAN,
            iterations: iteration,
        }),
    };

    for t in 0..cfg.iterations {
        let (value, mut grad) = objective.evaluate(&x)?;
        if grad.len() != n {
            return Err(DdmError::invalid(format!(
                "objective returned a gradient of length {} for {n} parameters",
                grad.len()
            )));
        }
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let record = TraceRecord {
            iteration: t,
            value,
            grad_norm,
        };
        if !value.is_finite() || !grad_norm.is_finite() {
            records.push(record);
            let what = if value.is_finite() { "gradient" } else { "objective" };
            return Err(abort(t, format!("non-finite {what}"), &records, &x));
        }
        if (cfg.log_every > 0 && t % cfg.log_every == 0) || t + 1 == cfg.iterations {
            records.push(record);
        }
        if let Some(clip) = cfg.grad_clip {
            if grad_norm > clip {
                let s = clip / grad_norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }

        let lr = cfg.learning_rate_at(t);
        match cfg.algorithm {
            Algorithm::Gd => {
                for (xi, gi) in x.iter_mut().zip(&grad) {
                    *xi -= lr * gi;
                }
            }
            Algorithm::Momentum => {
                for ((xi, gi), mi) in x.iter_mut().zip(&grad).zip(m.iter_mut()) {
                    *mi = cfg.beta1 * *mi + gi;
                    *xi -= lr * *mi;
                }
            }
            Algorithm::Adam => {
                let step = (t + 1) as i32;
                let c1 = 1.0 - cfg.beta1.powi(step);
                let c2 = 1.0 - cfg.beta2.powi(step);
                for i in 0..n {
                    let g = grad[i];
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    x[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
                }
            }
        }
        if !x.iter().all(|xi| xi.is_finite()) {
            return Err(abort(t + 1, "non-finite parameters".into(), &records, &x));
        }
    }

    let (final_value, _) = objective.evaluate(&x)?;
    if !final_value.is_finite() {
        return Err(abort(cfg.iterations, "non-finite objective".into(), &records, &x));
    }
    Ok(OptimTrace {
        records,
        params: x,
        final_value,
        iterations: cfg.iterations,
    })
}
