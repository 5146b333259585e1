use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddf::{DdfConfig, DdfField, DdfSample, ReferencePointSet};
use crate::error::{DdmError, Result};
use crate::geom::{Surface, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Average over reference points.
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// Confidence sharpness: each term is weighted by `exp(-beta * d)`.
    pub beta: f64,
    pub ddf: DdfConfig,
    pub reduction: Reduction,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            beta: 20.0,
            ddf: DdfConfig::default(),
            reduction: Reduction::Mean,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(DdmError::invalid("beta must be finite and non-negative"));
        }
        if self.ddf.k == 0 {
            return Err(DdmError::invalid("K must be positive"));
        }
        Ok(())
    }

    fn normalizer(&self, m: usize) -> f64 {
        match self.reduction {
            Reduction::Mean => 1.0 / m as f64,
            Reduction::Sum => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    /// `(d, s)` per reference point, in reference-point order.
    pub per_point: Option<Vec<(f64, f64)>>,
}

/// Dense gradient over the moving surface's points (or vertices).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGradient {
    pub grad: Vec<Vec3>,
}

/// L1 distance between two field values: over `[f ‖ h]`, or `|f1 − f2|`
/// alone in distance-only mode.
pub fn ddf_discrepancy(a: &DdfSample, b: &DdfSample, distance_only: bool) -> f64 {
    let df = (a.f - b.f).abs();
    if distance_only {
        df
    } else {
        df + (a.h.x - b.h.x).abs() + (a.h.y - b.h.y).abs() + (a.h.z - b.h.z).abs()
    }
}

fn check_queries(q: &ReferencePointSet) -> Result<()> {
    if q.is_empty() {
        return Err(DdmError::invalid("reference point set is empty"));
    }
    Ok(())
}

/// Sequential sum over per-point terms, so the value does not depend on
/// how the per-point work was scheduled.
fn reduce(terms: &[(f64, f64)], cfg: &MetricConfig) -> f64 {
    terms.iter().map(|(d, s)| s * d).sum::<f64>() * cfg.normalizer(terms.len())
}

/// Discrepancy between `s1` and `s2` at the shared reference points.
/// Symmetric in its surface arguments.
pub fn ddm(s1: &Surface, s2: &Surface, q: &ReferencePointSet, cfg: &MetricConfig) -> Result<MetricValue> {
    cfg.validate()?;
    check_queries(q)?;
    let f1 = DdfField::new(s1, cfg.ddf)?;
    let f2 = DdfField::new(s2, cfg.ddf)?;
    let terms: Vec<(f64, f64)> = q
        .points
        .par_iter()
        .map(|p| {
            let d = ddf_discrepancy(&f1.sample(p)?, &f2.sample(p)?, cfg.ddf.distance_only);
            Ok((d, (-cfg.beta * d).exp()))
        })
        .collect::<Result<_>>()?;
    Ok(MetricValue {
        value: reduce(&terms, cfg),
        per_point: Some(terms),
    })
}

/// Field values of a surface that stays fixed for a whole optimization.
pub fn evaluate_fixed_field(fixed: &Surface, q: &ReferencePointSet, ddf: DdfConfig) -> Result<Vec<DdfSample>> {
    DdfField::new(fixed, ddf)?.sample_all(&q.points)
}

/// Value and gradient with respect to `moving`'s coordinates, against a
/// precomputed fixed field.
pub fn ddm_grad_against(
    fixed_field: &[DdfSample],
    moving: &Surface,
    q: &ReferencePointSet,
    cfg: &MetricConfig,
) -> Result<(MetricValue, MetricGradient)> {
    cfg.validate()?;
    check_queries(q)?;
    if fixed_field.len() != q.len() {
        return Err(DdmError::invalid("fixed field does not match the reference points"));
    }
    let field = DdfField::new(moving, cfg.ddf)?;
    let scale = cfg.normalizer(q.len());
    let per_point: Vec<_> = q
        .points
        .par_iter()
        .zip(fixed_field.par_iter())
        .map(|(p, fixed)| {
            let mut term = (0.0, 1.0);
            let (_, contributions) = field.sample_with_pullback(p, |sample| {
                let d = ddf_discrepancy(sample, fixed, cfg.ddf.distance_only);
                let s = (-cfg.beta * d).exp();
                term = (d, s);
                // d/dd [d e^{-βd}] = e^{-βd} (1 − βd)
                let coef = s * (1.0 - cfg.beta * d) * scale;
                let a_h = if cfg.ddf.distance_only {
                    Vec3::zeros()
                } else {
                    (sample.h - fixed.h).map(sign) * coef
                };
                (sign(sample.f - fixed.f) * coef, a_h)
            })?;
            let (d, s) = term;
            Ok(((d, s), contributions))
        })
        .collect::<Result<_>>()?;

    let mut dense = vec![Vec3::zeros(); moving.positions().len()];
    let mut terms = Vec::with_capacity(per_point.len());
    for (term, contributions) in per_point {
        terms.push(term);
        for (i, g) in contributions {
            dense[i] += g;
        }
    }
    Ok((
        MetricValue {
            value: reduce(&terms, cfg),
            per_point: Some(terms),
        },
        MetricGradient { grad: dense },
    ))
}

/// Value and gradient with respect to `moving`.
pub fn ddm_grad(
    fixed: &Surface,
    moving: &Surface,
    q: &ReferencePointSet,
    cfg: &MetricConfig,
) -> Result<(MetricValue, MetricGradient)> {
    cfg.validate()?;
    let fixed_field = evaluate_fixed_field(fixed, q, cfg.ddf)?;
    ddm_grad_against(&fixed_field, moving, q, cfg)
}

// L1 subgradient with sign(0) = 0.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
#[path = "tests.rs"]
mod tests;
