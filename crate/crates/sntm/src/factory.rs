//! Toy model synthesis: seeded-random models and planted-neuron models.
//!
//! A planted model wires a known set of FFN neurons to behave as exact
//! style detectors, giving downstream identification and steering claims a
//! ground truth to be checked against.
//!
//! Construction geometry
//! ---------------------
//! Three token groups (style A, style B, shared) get embeddings on three
//! distinct orthogonal coordinate axes (0, 1, 2 of `d_model`), so a planted
//! neuron's gate row — the plant gain times its group's mean embedding
//! direction — sees a strictly positive pre-activation whenever the current
//! position carries its own style's signal and exactly zero when only the
//! other style is present. Each plant's up row reads the same axis and its
//! down column writes the same axis back, so an active plant amplifies its
//! own style's direction, which the vocabulary head turns into higher
//! logits for that style's tokens.
//!
//! Two background ingredients make the models generate interestingly rather
//! than saturate on one style:
//!
//! - position embeddings put a jittered baseline on the shared axis, which
//!   the head rows of both styles read (style B strongly, style A weakly),
//!   so a weakly-amplified state can tip toward the other style;
//! - query/key projections are zero, so attention averages the (projected)
//!   prefix uniformly, ferrying style mass strongly and baseline mass
//!   weakly from earlier positions into later ones.
//!
//! All of this collapses to exact zeros when a spec has no plants, so a
//! plant-free spec with zero noise synthesizes an exactly uniform model.
//! Background noise, when requested, is added after the deterministic
//! construction from the same seeded stream.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelWeights};

// Axes of the planted geometry.
const AXIS_A: usize = 0;
const AXIS_B: usize = 1;
const AXIS_SHARED: usize = 2;

// Construction constants, chosen so that greedy decoding on planted models
// sits in an interior regime: style runs continue but baseline spikes can
// tip a step toward the other style, and deactivating a style's plants
// moves the balance measurably.
const EMB_GAIN: f32 = 1.0;
const EMB_JITTER: f32 = 0.5;
const BASELINE: f32 = 4.0;
const BASELINE_JITTER: f32 = 0.9;
const FERRY: f32 = 0.25;
const FERRY_SHARED: f32 = 0.15;
const UP_GAIN: f32 = 1.0;
const DOWN_GAIN: f32 = 0.05;
const HEAD_OWN: f32 = 1.0;
const HEAD_OWN_JITTER: f32 = 0.3;
const HEAD_BASE: f32 = 0.9;
const HEAD_BASE_WEAK: f32 = 0.3;
const HEAD_SHARED: f32 = 0.55;

/// Which style a plant detects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StyleSide {
    A,
    B,
}

impl StyleSide {
    fn axis(self) -> usize {
        match self {
            StyleSide::A => AXIS_A,
            StyleSide::B => AXIS_B,
        }
    }
}

/// One planted neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSite {
    pub layer: usize,
    pub neuron: usize,
    pub style: StyleSide,
    pub gain: f32,
}

/// Full specification of a planted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub config: ModelConfig,
    pub style_a_tokens: BTreeSet<u32>,
    pub style_b_tokens: BTreeSet<u32>,
    pub shared_tokens: BTreeSet<u32>,
    pub plants: Vec<PlantSite>,
    pub noise_scale: f32,
    pub seed: u64,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.config.d_model < 3 {
            return Err(Error::Construction(
                "d_model must be at least 3 to give the three token groups \
                 orthogonal embedding directions"
                    .into(),
            ));
        }
        let groups = [
            ("style_a_tokens", &self.style_a_tokens),
            ("style_b_tokens", &self.style_b_tokens),
            ("shared_tokens", &self.shared_tokens),
        ];
        for (name, set) in &groups {
            if let Some(&t) = set.iter().find(|&&t| t as usize >= self.config.vocab_size) {
                return Err(Error::Construction(format!(
                    "{name} contains token id {t} outside vocab_size {}",
                    self.config.vocab_size
                )));
            }
        }
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if let Some(t) = groups[i].1.intersection(groups[j].1).next() {
                    return Err(Error::Construction(format!(
                        "token id {t} appears in both {} and {}",
                        groups[i].0, groups[j].0
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for p in &self.plants {
            if p.layer >= self.config.n_layers {
                return Err(Error::Construction(format!(
                    "plant layer {} out of range (n_layers {})",
                    p.layer, self.config.n_layers
                )));
            }
            if p.neuron >= self.config.d_ffn {
                return Err(Error::Construction(format!(
                    "plant neuron {} out of range (d_ffn {})",
                    p.neuron, self.config.d_ffn
                )));
            }
            if !p.gain.is_finite() || p.gain <= 0.0 {
                return Err(Error::Construction(format!(
                    "plant gain must be a positive finite number, got {}",
                    p.gain
                )));
            }
            if !seen.insert((p.layer, p.neuron)) {
                return Err(Error::Construction(format!(
                    "duplicate plant coordinate (layer {}, neuron {})",
                    p.layer, p.neuron
                )));
            }
            let group = match p.style {
                StyleSide::A => &self.style_a_tokens,
                StyleSide::B => &self.style_b_tokens,
            };
            if group.is_empty() {
                return Err(Error::Construction(format!(
                    "a style {:?} plant needs a non-empty token group for that style",
                    p.style
                )));
            }
        }
        if !self.noise_scale.is_finite() || self.noise_scale < 0.0 {
            return Err(Error::Construction("noise_scale must be >= 0".into()));
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: PlantSpec = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("plant spec is not valid: {e}")))?;
        Ok(spec)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("plant spec serialization failed: {e}")))?;
        crate::container::write_atomic(path, text.as_bytes())
    }
}

/// Ground-truth mapping from style to planted coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantRegistry {
    pub style_a: BTreeSet<(usize, usize)>,
    pub style_b: BTreeSet<(usize, usize)>,
}

impl PlantRegistry {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("plant registry is not valid: {e}")))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("plant registry serialization failed: {e}")))?;
        crate::container::write_atomic(path, text.as_bytes())
    }
}

fn jitter(rng: &mut ChaCha8Rng) -> f32 {
    rng.random::<f32>() * 2.0 - 1.0
}

/// Seeded random model; every entry i.i.d. uniform, scaled by
/// `scale / sqrt(d_model)`.
pub fn synth_random(config: &ModelConfig, seed: u64, scale: f32) -> Result<ModelWeights> {
    config.validate()?;
    if !scale.is_finite() || scale < 0.0 {
        return Err(Error::Construction(
            "scale must be a non-negative number".into(),
        ));
    }
    let mut weights = ModelWeights::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = scale / (config.d_model as f32).sqrt();
    for (_, tensor) in weights.named_tensors_mut() {
        for v in tensor {
            *v = jitter(&mut rng) * amp;
        }
    }
    Ok(weights)
}

/// Builds a planted model and the registry of its ground-truth neurons.
pub fn synth_planted(spec: &PlantSpec) -> Result<(ModelWeights, PlantRegistry)> {
    spec.validate()?;
    let config = spec.config.clone();
    let mut weights = ModelWeights::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut registry = PlantRegistry::default();
    for p in &spec.plants {
        match p.style {
            StyleSide::A => registry.style_a.insert((p.layer, p.neuron)),
            StyleSide::B => registry.style_b.insert((p.layer, p.neuron)),
        };
    }

    // A plant-free spec degenerates to the zero background: with zero noise
    // the forward pass is exactly uniform.
    if !spec.plants.is_empty() {
        for gain in &mut weights.final_norm {
            *gain = 1.0;
        }
        for layer in &mut weights.layers {
            for gain in &mut layer.attn_norm {
                *gain = 1.0;
            }
            for gain in &mut layer.ffn_norm {
                *gain = 1.0;
            }
            // Uniform causal attention over the group axes: zero
            // queries/keys, a scaled axis projector for values, and an
            // identity write-back. Style mass is ferried forward strongly,
            // baseline mass weakly, so earlier positions influence later
            // ones without drowning the positional baseline.
            for axis in [AXIS_A, AXIS_B] {
                layer.attn_v.set(axis, axis, FERRY);
                layer.attn_o.set(axis, axis, 1.0);
            }
            layer.attn_v.set(AXIS_SHARED, AXIS_SHARED, FERRY_SHARED);
            layer.attn_o.set(AXIS_SHARED, AXIS_SHARED, 1.0);
        }

        // Token embeddings: one orthogonal axis per group, with per-token
        // magnitude jitter so prompts of the same style still differ.
        let groups = [
            (&spec.style_a_tokens, AXIS_A),
            (&spec.style_b_tokens, AXIS_B),
            (&spec.shared_tokens, AXIS_SHARED),
        ];
        for (tokens, axis) in groups {
            for &t in tokens.iter() {
                let magnitude = EMB_GAIN * (1.0 + EMB_JITTER * jitter(&mut rng));
                weights.token_embedding.set(t as usize, axis, magnitude);
            }
        }

        // Jittered baseline on the shared axis at every position.
        for t in 0..config.max_seq_len {
            let level = BASELINE * (1.0 + BASELINE_JITTER * jitter(&mut rng));
            weights.position_embedding.set(t, AXIS_SHARED, level);
        }

        // Vocabulary head: own-axis readout per group, plus a baseline-axis
        // readout that is strong for style B and weak for style A, so a
        // weakly-amplified run can flip either way.
        for &t in &spec.style_a_tokens {
            let own = HEAD_OWN * (1.0 + HEAD_OWN_JITTER * jitter(&mut rng));
            weights.vocab_head.set(t as usize, AXIS_A, own);
            weights
                .vocab_head
                .set(t as usize, AXIS_SHARED, HEAD_BASE_WEAK);
        }
        for &t in &spec.style_b_tokens {
            let own = HEAD_OWN * (1.0 + HEAD_OWN_JITTER * jitter(&mut rng));
            weights.vocab_head.set(t as usize, AXIS_B, own);
            weights.vocab_head.set(t as usize, AXIS_SHARED, HEAD_BASE);
        }
        for &t in &spec.shared_tokens {
            weights.vocab_head.set(t as usize, AXIS_SHARED, HEAD_SHARED);
        }

        for p in &spec.plants {
            let axis = p.style.axis();
            let layer = &mut weights.layers[p.layer];
            layer.ffn_gate.set(p.neuron, axis, p.gain);
            layer.ffn_up.set(p.neuron, axis, UP_GAIN);
            layer.ffn_down.set(axis, p.neuron, DOWN_GAIN);
        }
    }

    // Noise is drawn after the plants so the deterministic part above is
    // unaffected by the noise stream.
    if spec.noise_scale > 0.0 {
        let amp = spec.noise_scale / (config.d_model as f32).sqrt();
        for (_, tensor) in weights.named_tensors_mut() {
            for v in tensor {
                *v += jitter(&mut rng) * amp;
            }
        }
    }

    weights.validate()?;
    Ok((weights, registry))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::container::to_bytes;
    use crate::model::{forward, rmsnorm, Activation};

    fn base_config() -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            d_model: 8,
            n_heads: 2,
            d_ffn: 6,
            vocab_size: 12,
            max_seq_len: 16,
            activation_kind: Activation::SiluGlu,
        }
    }

    fn single_plant_spec() -> PlantSpec {
        PlantSpec {
            config: base_config(),
            style_a_tokens: BTreeSet::from([2, 3]),
            style_b_tokens: BTreeSet::from([4, 5]),
            shared_tokens: BTreeSet::from([6, 7]),
            plants: vec![PlantSite {
                layer: 0,
                neuron: 1,
                style: StyleSide::A,
                gain: 2.0,
            }],
            noise_scale: 0.0,
            seed: 9,
        }
    }

    #[test]
    fn random_synthesis_is_deterministic() {
        let c = base_config();
        let a = synth_random(&c, 42, 0.7).unwrap();
        let b = synth_random(&c, 42, 0.7).unwrap();
        assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
    }

    #[test]
    fn zero_scale_gives_uniform_model() {
        let c = base_config();
        let w = synth_random(&c, 1, 0.0).unwrap();
        let (dists, _) = forward(&w, &[0, 5], None).unwrap();
        for &p in dists.final_row() {
            assert_eq!(p, 1.0 / 12.0);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let c = base_config();
        let a = synth_random(&c, 1, 0.7).unwrap();
        let b = synth_random(&c, 2, 0.7).unwrap();
        assert_ne!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
    }

    #[test]
    fn plant_free_spec_is_uniform() {
        let spec = PlantSpec {
            plants: vec![],
            ..single_plant_spec()
        };
        let (w, registry) = synth_planted(&spec).unwrap();
        assert!(registry.style_a.is_empty() && registry.style_b.is_empty());
        let (dists, _) = forward(&w, &[2, 4], None).unwrap();
        for j in 0..dists.n_rows() {
            for &p in dists.row(j) {
                assert_eq!(p, 1.0 / 12.0);
            }
        }
    }

    #[test]
    fn plant_sign_matches_gate_dot_product_oracle() {
        let spec = single_plant_spec();
        let (w, _) = synth_planted(&spec).unwrap();
        // Style-A input: trace value positive and equal to the activation of
        // the explicit gate-row dot product with the normalized FFN input.
        let (_, trace) = forward(&w, &[2], None).unwrap();
        let a_val = trace.get(0, 0, 1);
        assert!(
            a_val > 0.0,
            "A input should activate the plant, got {a_val}"
        );

        // Oracle: recompute the hidden state entering the first FFN.
        let mut h: Vec<f32> = w.token_embedding.row(2).to_vec();
        for (i, p) in w.position_embedding.row(0).iter().enumerate() {
            h[i] += p;
        }
        let xn = rmsnorm(&h, &w.layers[0].attn_norm);
        let vproj = w.layers[0].attn_v.matvec(&xn);
        let attn = w.layers[0].attn_o.matvec(&vproj);
        for i in 0..h.len() {
            h[i] += attn[i];
        }
        let fx = rmsnorm(&h, &w.layers[0].ffn_norm);
        let z = crate::model::dot(w.layers[0].ffn_gate.row(1), &fx);
        let expected = Activation::SiluGlu.apply(z);
        assert!((a_val - expected).abs() < 1e-6);

        // Style-B input: exactly zero pre-activation, so activation <= 0.
        let (_, trace_b) = forward(&w, &[4], None).unwrap();
        assert!(trace_b.get(0, 0, 1) <= 0.0);
        // Shared input: also no style-A signal.
        let (_, trace_s) = forward(&w, &[6], None).unwrap();
        assert!(trace_s.get(0, 0, 1) <= 0.0);
    }

    #[test]
    fn sign_property_exhaustive_over_styled_tokens() {
        let spec = PlantSpec {
            plants: vec![
                PlantSite {
                    layer: 0,
                    neuron: 0,
                    style: StyleSide::A,
                    gain: 1.5,
                },
                PlantSite {
                    layer: 1,
                    neuron: 3,
                    style: StyleSide::A,
                    gain: 2.0,
                },
                PlantSite {
                    layer: 0,
                    neuron: 4,
                    style: StyleSide::B,
                    gain: 1.0,
                },
                PlantSite {
                    layer: 1,
                    neuron: 5,
                    style: StyleSide::B,
                    gain: 2.5,
                },
            ],
            ..single_plant_spec()
        };
        let (w, registry) = synth_planted(&spec).unwrap();
        for &(layer, neuron) in &registry.style_a {
            for &t in &spec.style_a_tokens {
                let (_, trace) = forward(&w, &[t], None).unwrap();
                assert!(trace.get(layer, 0, neuron) > 0.0);
            }
            for &t in &spec.style_b_tokens {
                let (_, trace) = forward(&w, &[t], None).unwrap();
                assert!(trace.get(layer, 0, neuron) <= 0.0);
            }
        }
        for &(layer, neuron) in &registry.style_b {
            for &t in &spec.style_b_tokens {
                let (_, trace) = forward(&w, &[t], None).unwrap();
                assert!(trace.get(layer, 0, neuron) > 0.0);
            }
            for &t in &spec.style_a_tokens {
                let (_, trace) = forward(&w, &[t], None).unwrap();
                assert!(trace.get(layer, 0, neuron) <= 0.0);
            }
        }
    }

    #[test]
    fn sign_property_holds_on_the_full_demo_fixture() {
        let world = crate::synthetic::demo_world(2024);
        let (w, registry) = synth_planted(&world.spec).unwrap();
        let checks = [
            (
                &registry.style_a,
                &world.spec.style_a_tokens,
                &world.spec.style_b_tokens,
            ),
            (
                &registry.style_b,
                &world.spec.style_b_tokens,
                &world.spec.style_a_tokens,
            ),
        ];
        for (plants, own, other) in checks {
            for &(layer, neuron) in plants.iter() {
                for &t in own.iter() {
                    let (_, trace) = forward(&w, &[t], None).unwrap();
                    assert!(trace.get(layer, 0, neuron) > 0.0);
                }
                for &t in other.iter() {
                    let (_, trace) = forward(&w, &[t], None).unwrap();
                    assert!(trace.get(layer, 0, neuron) <= 0.0);
                }
            }
        }
    }

    #[test]
    fn masking_the_plant_lowers_own_style_logit_mass() {
        let spec = single_plant_spec();
        let (w, _) = synth_planted(&spec).unwrap();
        let tokens = [2u32, 3, 2];
        let (free, _) = forward(&w, &tokens, None).unwrap();
        let mask = crate::steering::DeactivationMask::from_coords([(0usize, 1usize)]);
        let (masked, _) = forward(&w, &tokens, Some(&mask)).unwrap();
        let mean_a = |dist: &[f32]| -> f64 {
            spec.style_a_tokens
                .iter()
                .map(|&t| f64::from(dist[t as usize]))
                .sum::<f64>()
                / spec.style_a_tokens.len() as f64
        };
        assert!(
            mean_a(free.final_row()) > mean_a(masked.final_row()),
            "masking the style-A plant must lower style-A probability mass"
        );
    }

    #[test]
    fn too_small_d_model_is_a_construction_error() {
        let mut spec = single_plant_spec();
        spec.config.d_model = 2;
        spec.config.n_heads = 1;
        let err = synth_planted(&spec).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
        assert!(err.to_string().contains("d_model"));
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let mut spec = single_plant_spec();
        spec.shared_tokens.insert(2);
        assert!(synth_planted(&spec).is_err());
    }

    #[test]
    fn duplicate_plants_are_rejected() {
        let mut spec = single_plant_spec();
        spec.plants.push(spec.plants[0].clone());
        assert!(synth_planted(&spec).is_err());
    }

    #[test]
    fn planted_synthesis_is_deterministic() {
        let spec = single_plant_spec();
        let (a, _) = synth_planted(&spec).unwrap();
        let (b, _) = synth_planted(&spec).unwrap();
        assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
        // With noise too.
        let noisy = PlantSpec {
            noise_scale: 0.05,
            ..spec
        };
        let (a, _) = synth_planted(&noisy).unwrap();
        let (b, _) = synth_planted(&noisy).unwrap();
        assert_eq!(to_bytes(&a).unwrap(), to_bytes(&b).unwrap());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = single_plant_spec();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        spec.save(&path).unwrap();
        assert_eq!(PlantSpec::load(&path).unwrap(), spec);
    }
}
