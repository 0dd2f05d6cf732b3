//! Architecture encoding and the analytic cost model.
//!
//! A genome is a string of small integers: position 0 indexes the input
//! resolution, position 1 the width multiplier, and the remaining positions
//! hold one code per layer slot (`stages * max_layers_per_stage` of them).
//! Code 0 means the slot is skipped; codes `1..=E*K` select an
//! (expand ratio, kernel size) pair. For every slot the pairs are ordered by
//! ascending multiply-adds of that layer, so a larger code never makes the
//! network cheaper. Ties are broken by `(E, K)` lexicographic order.

use serde::{Deserialize, Serialize};

use crate::error::{NatError, Result};

/// Number of leading genome positions that are not layer slots.
pub const HEADER_LEN: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpaceConfig {
    pub resolutions: Vec<u32>,
    pub width_multipliers: Vec<f64>,
    pub expand_ratios: Vec<u32>,
    pub kernel_sizes: Vec<u32>,
    pub stages: usize,
    pub max_layers_per_stage: usize,
    pub min_layers_per_stage: usize,
}

impl Default for SearchSpaceConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![192, 208, 224, 240, 256],
            width_multipliers: vec![1.0, 1.2],
            expand_ratios: vec![3, 4, 6],
            kernel_sizes: vec![3, 5, 7],
            stages: 5,
            max_layers_per_stage: 4,
            min_layers_per_stage: 2,
        }
    }
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl SearchSpaceConfig {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("search_space.{k}");
        if self.resolutions.is_empty() || !strictly_increasing(&self.resolutions) {
            return Err(NatError::config(
                key("resolutions"),
                "must be non-empty and strictly increasing",
            ));
        }
        if self.resolutions[0] == 0 {
            return Err(NatError::config(key("resolutions"), "must be positive"));
        }
        if self.width_multipliers.is_empty()
            || !strictly_increasing(&self.width_multipliers)
            || self.width_multipliers.iter().any(|w| !(*w > 0.0) || !w.is_finite())
        {
            return Err(NatError::config(
                key("width_multipliers"),
                "must be non-empty, positive and strictly increasing",
            ));
        }
        if self.expand_ratios.is_empty() || self.expand_ratios.contains(&0) {
            return Err(NatError::config(key("expand_ratios"), "must be non-empty and positive"));
        }
        if self.kernel_sizes.is_empty() || self.kernel_sizes.contains(&0) {
            return Err(NatError::config(key("kernel_sizes"), "must be non-empty and positive"));
        }
        if self.stages == 0 {
            return Err(NatError::config(key("stages"), "must be at least 1"));
        }
        if self.min_layers_per_stage == 0 || self.min_layers_per_stage > self.max_layers_per_stage {
            return Err(NatError::config(
                key("min_layers_per_stage"),
                "must be in 1..=max_layers_per_stage",
            ));
        }
        if self.layer_options() > 250 || self.resolutions.len() > 255 || self.width_multipliers.len() > 255 {
            return Err(NatError::config(key("expand_ratios"), "too many options for a byte code"));
        }
        Ok(())
    }

    pub fn genome_len(&self) -> usize {
        HEADER_LEN + self.stages * self.max_layers_per_stage
    }

    /// Number of (expand ratio, kernel size) combinations, i.e. the largest layer code.
    pub fn layer_options(&self) -> usize {
        self.expand_ratios.len() * self.kernel_sizes.len()
    }

    /// `(stage, layer)` of a genome position, or `None` for header positions.
    pub fn slot(&self, position: usize) -> Option<(usize, usize)> {
        if position < HEADER_LEN || position >= self.genome_len() {
            return None;
        }
        let p = position - HEADER_LEN;
        Some((p / self.max_layers_per_stage, p % self.max_layers_per_stage))
    }

    pub fn is_skippable(&self, position: usize) -> bool {
        matches!(self.slot(position), Some((_, layer)) if layer >= self.min_layers_per_stage)
    }

    /// Inclusive `(lower, upper)` bounds of the value at `position`.
    pub fn bounds(&self, position: usize) -> (u8, u8) {
        match position {
            0 => (0, (self.resolutions.len() - 1) as u8),
            1 => (0, (self.width_multipliers.len() - 1) as u8),
            p if self.is_skippable(p) => (0, self.layer_options() as u8),
            _ => (1, self.layer_options() as u8),
        }
    }

    pub fn all_bounds(&self) -> Vec<(u8, u8)> {
        (0..self.genome_len()).map(|p| self.bounds(p)).collect()
    }

    fn combos(&self) -> Vec<(u32, u32)> {
        self.expand_ratios
            .iter()
            .flat_map(|&e| self.kernel_sizes.iter().map(move |&k| (e, k)))
            .collect()
    }

    /// Number of distinct layer configurations of one stage
    /// (`sum over depth d of options^d`).
    pub fn stage_configurations(&self) -> u128 {
        let opts = self.layer_options() as u128;
        (self.min_layers_per_stage..=self.max_layers_per_stage)
            .map(|d| opts.pow(d as u32))
            .sum()
    }
}

/// Channel and stride layout used by the cost model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub input_channels: u64,
    pub stem_channels: u64,
    pub stage_output_channels: Vec<u64>,
    pub stage_strides: Vec<u32>,
    pub tail_channels: u64,
    pub channel_round_to: u64,
    pub num_classes: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            input_channels: 3,
            stem_channels: 16,
            stage_output_channels: vec![24, 40, 80, 112, 160],
            stage_strides: vec![2, 2, 2, 1, 2],
            tail_channels: 1280,
            channel_round_to: 8,
            num_classes: 1000,
        }
    }
}

impl CostModel {
    pub fn validate(&self, space: &SearchSpaceConfig) -> Result<()> {
        if self.stage_output_channels.len() != space.stages {
            return Err(NatError::config(
                "cost_model.stage_output_channels",
                format!("expected {} entries", space.stages),
            ));
        }
        if self.stage_strides.len() != space.stages {
            return Err(NatError::config(
                "cost_model.stage_strides",
                format!("expected {} entries", space.stages),
            ));
        }
        if self.stage_strides.iter().any(|s| *s != 1 && *s != 2) {
            return Err(NatError::config("cost_model.stage_strides", "strides must be 1 or 2"));
        }
        if self.channel_round_to == 0 {
            return Err(NatError::config("cost_model.channel_round_to", "must be positive"));
        }
        Ok(())
    }

    /// Scales `channels` by `width` and rounds to the nearest multiple of
    /// `channel_round_to`, never below one multiple.
    pub fn scale_channels(&self, channels: u64, width: f64) -> u64 {
        let r = self.channel_round_to as f64;
        let rounded = ((channels as f64 * width) / r + 0.5).floor() as u64 * self.channel_round_to;
        rounded.max(self.channel_round_to)
    }
}

/// Output size of a "same"-padded convolution.
fn spatial_out(h: u64, stride: u32) -> u64 {
    h.div_ceil(u64::from(stride))
}

/// Fixed per-network geometry: channel counts and the input size of every stage.
struct Geometry {
    stem_channels: u64,
    stem_out: u64,
    stage_channels: Vec<u64>,
    stage_input_size: Vec<u64>,
    tail_channels: u64,
}

impl Geometry {
    fn new(resolution: u32, width: f64, cost: &CostModel) -> Self {
        let stem_channels = cost.scale_channels(cost.stem_channels, width);
        let stem_out = spatial_out(u64::from(resolution), 2);
        let stage_channels: Vec<u64> = cost
            .stage_output_channels
            .iter()
            .map(|&c| cost.scale_channels(c, width))
            .collect();
        let mut stage_input_size = Vec::with_capacity(stage_channels.len());
        let mut h = stem_out;
        for &s in &cost.stage_strides {
            stage_input_size.push(h);
            h = spatial_out(h, s);
        }
        Self {
            stem_channels,
            stem_out,
            stage_channels,
            stage_input_size,
            tail_channels: cost.scale_channels(cost.tail_channels, width),
        }
    }

    /// `(input size, input channels, output channels, stride)` of a layer slot.
    fn layer(&self, cost: &CostModel, stage: usize, layer: usize) -> (u64, u64, u64, u32) {
        let c_out = self.stage_channels[stage];
        if layer == 0 {
            let c_in = if stage == 0 {
                self.stem_channels
            } else {
                self.stage_channels[stage - 1]
            };
            (self.stage_input_size[stage], c_in, c_out, cost.stage_strides[stage])
        } else {
            let h = spatial_out(self.stage_input_size[stage], cost.stage_strides[stage]);
            (h, c_out, c_out, 1)
        }
    }
}

/// Multiply-adds of one inverted residual block: 1x1 expand, KxK depthwise, 1x1 project.
fn block_madds(h_in: u64, c_in: u64, c_out: u64, stride: u32, e: u32, k: u32) -> u64 {
    let h_out = spatial_out(h_in, stride);
    let hidden = u64::from(e) * c_in;
    let k2 = u64::from(k) * u64::from(k);
    h_in * h_in * c_in * hidden + h_out * h_out * hidden * k2 + h_out * h_out * hidden * c_out
}

fn block_params(c_in: u64, c_out: u64, e: u32, k: u32) -> u64 {
    let hidden = u64::from(e) * c_in;
    c_in * hidden + hidden * u64::from(k) * u64::from(k) + hidden * c_out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub expand_ratio: u32,
    pub kernel_size: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub resolution: u32,
    pub width_multiplier: f64,
    pub stages: Vec<Vec<LayerSpec>>,
}

impl NetworkSpec {
    pub fn depth(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }
}

/// The (E, K) pairs of one layer slot in code order (code `i + 1` is entry `i`).
pub fn layer_code_table(
    space: &SearchSpaceConfig,
    cost: &CostModel,
    resolution: u32,
    width: f64,
    stage: usize,
    layer: usize,
) -> Vec<LayerSpec> {
    let geo = Geometry::new(resolution, width, cost);
    table_for(space, cost, &geo, stage, layer)
}

fn table_for(
    space: &SearchSpaceConfig,
    cost: &CostModel,
    geo: &Geometry,
    stage: usize,
    layer: usize,
) -> Vec<LayerSpec> {
    let (h, c_in, c_out, stride) = geo.layer(cost, stage, layer);
    let mut combos = space.combos();
    combos.sort_by_key(|&(e, k)| (block_madds(h, c_in, c_out, stride, e, k), e, k));
    combos
        .into_iter()
        .map(|(expand_ratio, kernel_size)| LayerSpec {
            expand_ratio,
            kernel_size,
        })
        .collect()
}

/// An encoded architecture. Serialises as a plain JSON array of integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<u8>);

impl Genome {
    pub fn new(values: Vec<u8>) -> Self {
        Genome(values)
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [u8] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Raw integer codes as regression features.
    pub fn features(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }

    /// Whether the value at `position` contributes to the network.
    pub fn is_active(&self, space: &SearchSpaceConfig, position: usize) -> bool {
        space.slot(position).is_none() || self.0[position] != 0
    }

    pub fn validate(&self, space: &SearchSpaceConfig) -> Result<()> {
        if self.0.len() != space.genome_len() {
            return Err(NatError::InvalidGenome {
                position: self.0.len().min(space.genome_len()),
                reason: format!("expected length {}, got {}", space.genome_len(), self.0.len()),
            });
        }
        for (position, &v) in self.0.iter().enumerate() {
            let (lo, hi) = space.bounds(position);
            if v > hi {
                return Err(NatError::InvalidGenome {
                    position,
                    reason: format!("value {v} exceeds upper bound {hi}"),
                });
            }
            if v < lo {
                return Err(NatError::InvalidGenome {
                    position,
                    reason: "skip code at a non-skippable layer slot".into(),
                });
            }
        }
        for stage in 0..space.stages {
            let base = HEADER_LEN + stage * space.max_layers_per_stage;
            let mut skipped = false;
            for layer in space.min_layers_per_stage..space.max_layers_per_stage {
                let position = base + layer;
                if self.0[position] == 0 {
                    skipped = true;
                } else if skipped {
                    return Err(NatError::InvalidGenome {
                        position,
                        reason: "active layer follows a skipped slot".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Restores skip contiguity: within each stage the active values of the
    /// skippable slots are shifted forward (order preserved) and the skips
    /// moved to the end.
    pub fn repair(&mut self, space: &SearchSpaceConfig) {
        for stage in 0..space.stages {
            let base = HEADER_LEN + stage * space.max_layers_per_stage;
            let lo = base + space.min_layers_per_stage;
            let hi = base + space.max_layers_per_stage;
            let mut write = lo;
            for read in lo..hi {
                let v = self.0[read];
                if v != 0 {
                    self.0[write] = v;
                    write += 1;
                }
            }
            for slot in &mut self.0[write..hi] {
                *slot = 0;
            }
        }
    }

    pub fn repaired(mut self, space: &SearchSpaceConfig) -> Self {
        self.repair(space);
        self
    }
}

impl From<Vec<u8>> for Genome {
    fn from(v: Vec<u8>) -> Self {
        Genome(v)
    }
}

pub fn decode(genome: &Genome, space: &SearchSpaceConfig, cost: &CostModel) -> Result<NetworkSpec> {
    genome.validate(space)?;
    let v = genome.values();
    let resolution = space.resolutions[v[0] as usize];
    let width_multiplier = space.width_multipliers[v[1] as usize];
    let geo = Geometry::new(resolution, width_multiplier, cost);
    let stages = (0..space.stages)
        .map(|stage| {
            (0..space.max_layers_per_stage)
                .filter_map(|layer| {
                    let code = v[HEADER_LEN + stage * space.max_layers_per_stage + layer];
                    (code != 0).then(|| table_for(space, cost, &geo, stage, layer)[code as usize - 1])
                })
                .collect()
        })
        .collect();
    Ok(NetworkSpec {
        resolution,
        width_multiplier,
        stages,
    })
}

/// Inverse of [`decode`].
pub fn encode(spec: &NetworkSpec, space: &SearchSpaceConfig, cost: &CostModel) -> Result<Genome> {
    let res_idx = space
        .resolutions
        .iter()
        .position(|&r| r == spec.resolution)
        .ok_or_else(|| NatError::InvalidGenome {
            position: 0,
            reason: format!("resolution {} not in the search space", spec.resolution),
        })?;
    let width_idx = space
        .width_multipliers
        .iter()
        .position(|&w| w == spec.width_multiplier)
        .ok_or_else(|| NatError::InvalidGenome {
            position: 1,
            reason: format!("width multiplier {} not in the search space", spec.width_multiplier),
        })?;
    if spec.stages.len() != space.stages {
        return Err(NatError::InvalidGenome {
            position: HEADER_LEN,
            reason: format!("expected {} stages", space.stages),
        });
    }
    let geo = Geometry::new(spec.resolution, spec.width_multiplier, cost);
    let mut values = vec![0u8; space.genome_len()];
    values[0] = res_idx as u8;
    values[1] = width_idx as u8;
    for (stage, layers) in spec.stages.iter().enumerate() {
        let base = HEADER_LEN + stage * space.max_layers_per_stage;
        if layers.len() < space.min_layers_per_stage || layers.len() > space.max_layers_per_stage {
            return Err(NatError::InvalidGenome {
                position: base,
                reason: format!("stage {stage} has {} layers", layers.len()),
            });
        }
        for (layer, ls) in layers.iter().enumerate() {
            let table = table_for(space, cost, &geo, stage, layer);
            let code = table.iter().position(|t| t == ls).ok_or_else(|| NatError::InvalidGenome {
                position: base + layer,
                reason: format!("layer option {ls:?} not in the search space"),
            })?;
            values[base + layer] = (code + 1) as u8;
        }
    }
    Ok(Genome(values))
}

/// Multiply-adds: stem 3x3/2 convolution, every inverted residual block,
/// then the 1x1 tail convolution, global pooling and the classifier.
pub fn madds(spec: &NetworkSpec, cost: &CostModel) -> u64 {
    let geo = Geometry::new(spec.resolution, spec.width_multiplier, cost);
    let mut total = geo.stem_out * geo.stem_out * cost.input_channels * 9 * geo.stem_channels;
    let mut h = geo.stem_out;
    let mut c_in = geo.stem_channels;
    for (stage, layers) in spec.stages.iter().enumerate() {
        let c_out = geo.stage_channels[stage];
        for (layer, ls) in layers.iter().enumerate() {
            let stride = if layer == 0 { cost.stage_strides[stage] } else { 1 };
            total += block_madds(h, c_in, c_out, stride, ls.expand_ratio, ls.kernel_size);
            h = spatial_out(h, stride);
            c_in = c_out;
        }
    }
    let tail = geo.tail_channels;
    total + h * h * c_in * tail + h * h * tail + tail * cost.num_classes
}

/// Weight count of the same layers, plus the classifier bias.
pub fn params(spec: &NetworkSpec, cost: &CostModel) -> u64 {
    let geo = Geometry::new(spec.resolution, spec.width_multiplier, cost);
    let mut total = cost.input_channels * 9 * geo.stem_channels;
    let mut c_in = geo.stem_channels;
    for (stage, layers) in spec.stages.iter().enumerate() {
        let c_out = geo.stage_channels[stage];
        for ls in layers {
            total += block_params(c_in, c_out, ls.expand_ratio, ls.kernel_size);
            c_in = c_out;
        }
    }
    let tail = geo.tail_channels;
    total + c_in * tail + tail * cost.num_classes + cost.num_classes
}

/// Draws a valid genome: resolution, width and each stage depth uniformly,
/// then every active slot's code uniformly.
pub fn sample_uniform<R: rand::Rng + ?Sized>(space: &SearchSpaceConfig, rng: &mut R) -> Genome {
    let mut values = vec![0u8; space.genome_len()];
    values[0] = rng.random_range(0..space.resolutions.len()) as u8;
    values[1] = rng.random_range(0..space.width_multipliers.len()) as u8;
    let opts = space.layer_options() as u8;
    for stage in 0..space.stages {
        let depth = rng.random_range(space.min_layers_per_stage..=space.max_layers_per_stage);
        let base = HEADER_LEN + stage * space.max_layers_per_stage;
        for slot in &mut values[base..base + depth] {
            *slot = rng.random_range(1..=opts);
        }
    }
    Genome(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn all_code(code: u8) -> Genome {
        let space = SearchSpaceConfig::default();
        let mut v = vec![code; space.genome_len()];
        v[0] = 2;
        v[1] = 0;
        Genome(v)
    }

    #[test]
    fn code_one_is_smallest_e_and_k() {
        let space = SearchSpaceConfig::default();
        let cost = CostModel::default();
        let spec = decode(&all_code(1), &space, &cost).unwrap();
        for layers in &spec.stages {
            assert_eq!(layers.len(), 4);
            for l in layers {
                assert_eq!((l.expand_ratio, l.kernel_size), (3, 3));
            }
        }
    }

    #[test]
    fn skipped_slots_give_minimum_depth() {
        let space = SearchSpaceConfig::default();
        let cost = CostModel::default();
        let mut g = all_code(5);
        for stage in 0..5 {
            g.values_mut()[HEADER_LEN + stage * 4 + 2] = 0;
            g.values_mut()[HEADER_LEN + stage * 4 + 3] = 0;
        }
        let spec = decode(&g, &space, &cost).unwrap();
        assert!(spec.stages.iter().all(|s| s.len() == 2));
        assert_eq!(spec.depth(), 10);
    }

    #[test]
    fn validation_names_offending_position() {
        let space = SearchSpaceConfig::default();
        let mut g = all_code(3);
        g.values_mut()[HEADER_LEN] = 0;
        match g.validate(&space) {
            Err(NatError::InvalidGenome { position, .. }) => assert_eq!(position, HEADER_LEN),
            other => panic!("unexpected {other:?}"),
        }

        let mut g = all_code(3);
        g.values_mut()[HEADER_LEN + 4 + 2] = 0;
        match g.validate(&space) {
            Err(NatError::InvalidGenome { position, .. }) => assert_eq!(position, HEADER_LEN + 4 + 3),
            other => panic!("unexpected {other:?}"),
        }

        let mut g = all_code(3);
        g.values_mut()[7] = 10;
        assert!(matches!(
            g.validate(&space),
            Err(NatError::InvalidGenome { position: 7, .. })
        ));

        let mut g = all_code(3);
        g.values_mut()[0] = 5;
        assert!(matches!(
            g.validate(&space),
            Err(NatError::InvalidGenome { position: 0, .. })
        ));
    }

    #[test]
    fn repair_moves_fourth_slot_forward() {
        let space = SearchSpaceConfig::default();
        let mut g = all_code(3);
        g.values_mut()[HEADER_LEN + 2] = 0;
        g.values_mut()[HEADER_LEN + 3] = 7;
        g.repair(&space);
        assert_eq!(&g.values()[HEADER_LEN..HEADER_LEN + 4], &[3, 3, 7, 0]);
        g.validate(&space).unwrap();
    }

    #[test]
    fn resolution_quadruples_conv_madds() {
        // Doubling the resolution (all strides preserved, every map even)
        // multiplies every spatial term by 4; only the classifier is fixed.
        let space = SearchSpaceConfig::default();
        let cost = CostModel::default();
        let mut spec = decode(&all_code(4), &space, &cost).unwrap();
        spec.resolution = 224;
        let small = madds(&spec, &cost);
        spec.resolution = 448;
        let big = madds(&spec, &cost);
        let fc = cost.scale_channels(cost.tail_channels, spec.width_multiplier) * cost.num_classes;
        assert_eq!(big - fc, 4 * (small - fc));
        assert_eq!(params(&spec, &cost), {
            spec.resolution = 224;
            params(&spec, &cost)
        });
    }

    #[test]
    fn uniform_samples_are_valid() {
        let space = SearchSpaceConfig::default();
        let mut rng = seeded(11);
        for _ in 0..10_000 {
            sample_uniform(&space, &mut rng).validate(&space).unwrap();
        }
    }

    #[test]
    fn stage_configuration_count() {
        let space = SearchSpaceConfig::default();
        assert_eq!(space.stage_configurations(), 7371);
        let total = space.stage_configurations().pow(5);
        assert_eq!(total, 21_758_655_492_572_485_851);
        assert!((total as f64 - 2.17e19).abs() < 0.01e19);
    }
}
