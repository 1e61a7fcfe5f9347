//! Deactivation policies and masks.
//!
//! A [`DeactivationMask`] is the set of (layer, neuron) coordinates whose
//! activation values are forced to zero during a forward pass. Masks are
//! built from a [`NeuronAtlas`](crate::atlas::NeuronAtlas) and a
//! [`DeactivationPolicy`]: only the exclusive sets enter a mask, so overlap
//! neurons are never deactivated. Deactivation applies across all layers
//! where exclusive neurons were found.

use std::collections::BTreeSet;

use crate::atlas::NeuronAtlas;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Which exclusive sets to deactivate, relative to a transfer direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeactivateSide {
    None,
    Source,
    Target,
    Both,
}

impl DeactivateSide {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(DeactivateSide::None),
            "source" => Ok(DeactivateSide::Source),
            "target" => Ok(DeactivateSide::Target),
            "both" => Ok(DeactivateSide::Both),
            other => Err(Error::Config(format!(
                "unknown deactivation side '{other}' (expected none|source|target|both)"
            ))),
        }
    }
}

/// Deactivation choice for one transfer direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeactivationPolicy {
    pub deactivate_source: bool,
    pub deactivate_target: bool,
    /// Style label of the source side.
    pub source: String,
    /// Style label of the target side.
    pub target: String,
}

impl DeactivationPolicy {
    pub fn new(side: DeactivateSide, source: impl Into<String>, target: impl Into<String>) -> Self {
        let (deactivate_source, deactivate_target) = match side {
            DeactivateSide::None => (false, false),
            DeactivateSide::Source => (true, false),
            DeactivateSide::Target => (false, true),
            DeactivateSide::Both => (true, true),
        };
        DeactivationPolicy {
            deactivate_source,
            deactivate_target,
            source: source.into(),
            target: target.into(),
        }
    }
}

/// Set of (layer, neuron) coordinates forced to zero during forward passes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DeactivationMask {
    coords: BTreeSet<(usize, usize)>,
    /// Neuron indices grouped per layer, for cheap application in the FFN.
    by_layer: Vec<Vec<usize>>,
}

impl DeactivationMask {
    pub fn from_coords(coords: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let coords: BTreeSet<(usize, usize)> = coords.into_iter().collect();
        let max_layer = coords.iter().map(|&(l, _)| l + 1).max().unwrap_or(0);
        let mut by_layer = vec![Vec::new(); max_layer];
        for &(l, n) in &coords {
            by_layer[l].push(n);
        }
        DeactivationMask { coords, by_layer }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn contains(&self, layer: usize, neuron: usize) -> bool {
        self.coords.contains(&(layer, neuron))
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.coords.iter().copied()
    }

    pub(crate) fn neurons_in_layer(&self, layer: usize) -> &[usize] {
        self.by_layer.get(layer).map_or(&[], Vec::as_slice)
    }

    /// Checks that every coordinate is within the model's bounds.
    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        for &(l, n) in &self.coords {
            if l >= config.n_layers || n >= config.d_ffn {
                return Err(Error::InvalidInput(format!(
                    "mask coordinate (layer {l}, neuron {n}) out of bounds for \
                     {} layers x {} neurons",
                    config.n_layers, config.d_ffn
                )));
            }
        }
        Ok(())
    }
}

/// Builds the deactivation mask for a policy from the atlas's exclusive sets.
///
/// The mask is the union of `N_source` and/or `N_target` per the policy
/// flags; overlap neurons never appear in it.
pub fn build_mask(atlas: &NeuronAtlas, policy: &DeactivationPolicy) -> Result<DeactivationMask> {
    let labels = [atlas.style_a.as_str(), atlas.style_b.as_str()];
    for label in [policy.source.as_str(), policy.target.as_str()] {
        if !labels.contains(&label) {
            return Err(Error::InvalidInput(format!(
                "style label '{label}' not in atlas (has '{}', '{}')",
                atlas.style_a, atlas.style_b
            )));
        }
    }
    if policy.source == policy.target {
        return Err(Error::InvalidInput(
            "source and target style labels must differ".into(),
        ));
    }
    let mut coords: BTreeSet<(usize, usize)> = BTreeSet::new();
    if policy.deactivate_source {
        coords.extend(atlas.exclusive_coords(&policy.source));
    }
    if policy.deactivate_target {
        coords.extend(atlas.exclusive_coords(&policy.target));
    }
    Ok(DeactivationMask::from_coords(coords))
}
