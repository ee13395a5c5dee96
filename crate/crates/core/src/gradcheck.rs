//! Central-difference verification of the analytic gradients.

use std::collections::BTreeSet;

use crate::dataset::EncodedExample;
use crate::emotion::Target;
use crate::error::{Error, Result};
use crate::layers;
use crate::model::{self, ModelBundle, ModelParams};
use crate::rng::{derive_seed, SplitMix64};
use crate::text::TokenSequence;

/// Models larger than this are checked on a sample of coordinates.
pub const FULL_CHECK_LIMIT: usize = 10_000;
pub const SAMPLED_COORDINATES: usize = 1_000;

/// Deliberate corruption of the analytic gradient, for testing the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    SignFlip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinates whose error entered the maximum.
    pub coordinates_checked: usize,
    /// Coordinates where `θ±step` changed a ReLU sign or a pool winner.
    /// The loss is not differentiable between those points, so the central
    /// difference says nothing about the gradient there.
    pub kink_crossings: usize,
    /// Flat coordinate with the largest error.
    pub worst_coordinate: usize,
}

/// Max over checked coordinates of `|ga−gn| / max(1e-12, |ga|+|gn|)`.
///
/// The loss is evaluated in training mode with dropout masks fixed by
/// `seed`, so the masks are exercised but identical across perturbations.
/// Coordinates whose perturbation crosses a kink are counted in
/// [`GradCheckReport::kink_crossings`] and left out of the maximum.
pub fn gradient_check(bundle: &ModelBundle, batch: &[EncodedExample], step: f64, seed: u64) -> Result<f64> {
    Ok(gradient_check_with(bundle, batch, step, seed, Fault::None)?.max_rel_error)
}

pub fn gradient_check_with(
    bundle: &ModelBundle,
    batch: &[EncodedExample],
    step: f64,
    seed: u64,
    fault: Fault,
) -> Result<GradCheckReport> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if batch.is_empty() {
        return Err(Error::invalid("gradient check needs a non-empty batch"));
    }
    let config = &bundle.config;
    let (seqs, targets): (Vec<TokenSequence>, Vec<Target>) = batch.iter().map(|e| (e.ids.clone(), e.target)).unzip();
    let dropout_seed = derive_seed(seed, &[0]);

    let y = model::targets_tensor(&targets)?;
    let base = model::forward(&bundle.params, config, &seqs, true, dropout_seed)?;
    let analytic = model::backward(base.clone(), &bundle.params, config, &targets)?;
    let perturbed_loss = |params: &ModelParams| -> Result<(f64, bool)> {
        let trace = model::forward(params, config, &seqs, true, dropout_seed)?;
        let loss = layers::bce_loss(trace.probs(), &y)?;
        Ok((loss, trace.same_branch(&base)))
    };

    let total = config.param_count();
    let coords: Vec<usize> = if total <= FULL_CHECK_LIMIT {
        (0..total).collect()
    } else {
        let mut rng = SplitMix64::new(derive_seed(seed, &[1]));
        let mut picked = BTreeSet::new();
        while picked.len() < SAMPLED_COORDINATES {
            picked.insert(rng.below(total as u64) as usize);
        }
        picked.into_iter().collect()
    };

    let mut params = bundle.params.clone();
    let mut worst = (0.0f64, coords[0]);
    let mut kink_crossings = 0;
    for &coord in &coords {
        let original = params.coordinate(coord).expect("coordinate in range");
        *params.coordinate_mut(coord).unwrap() = original + step;
        let (plus, plus_smooth) = perturbed_loss(&params)?;
        *params.coordinate_mut(coord).unwrap() = original - step;
        let (minus, minus_smooth) = perturbed_loss(&params)?;
        *params.coordinate_mut(coord).unwrap() = original;
        if !(plus_smooth && minus_smooth) {
            kink_crossings += 1;
            continue;
        }

        let numeric = (plus - minus) / (2.0 * step);
        let mut ga = analytic.coordinate(coord).expect("coordinate in range");
        if fault == Fault::SignFlip {
            ga = -ga;
        }
        let rel = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-12);
        if rel > worst.0 {
            worst = (rel, coord);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        coordinates_checked: coords.len() - kink_crossings,
        kink_crossings,
        worst_coordinate: worst.1,
    })
}
