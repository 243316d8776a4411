//! Architecture search spaces, presets, sampling, encoding and variation operators.
//!
//! An architecture is an embedding width, a layer count, a per-layer list of
//! attention-head counts and MLP expansion ratios, and a bias flag. A
//! [`SearchSpaceSpec`] fixes the admissible choices for each of these.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 7] = [
    "gpt-s",
    "gpt-m",
    "gpt-l",
    "gpt-s-wide",
    "gpt-m-wide",
    "gpt-l-wide",
    "gpt-xl-wide",
];

/// Both bias settings are always searchable.
pub const BIAS_CHOICES: [bool; 2] = [true, false];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpaceSpec {
    pub name: String,
    pub embed_choices: Vec<usize>,
    pub layer_choices: Vec<usize>,
    pub head_choices: Vec<usize>,
    pub mlp_ratio_choices: Vec<usize>,
    pub head_size: usize,
    pub vocab_size: usize,
    pub seq_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArchConfig {
    pub embed_dim: usize,
    pub num_layers: usize,
    pub heads: Vec<usize>,
    pub mlp_ratios: Vec<usize>,
    pub bias: bool,
}

impl ArchConfig {
    pub fn mean_heads(&self) -> f64 {
        self.heads.iter().sum::<usize>() as f64 / self.heads.len() as f64
    }

    pub fn mean_mlp_ratio(&self) -> f64 {
        self.mlp_ratios.iter().sum::<usize>() as f64 / self.mlp_ratios.len() as f64
    }
}

/// One-hot architecture encoding; see [`encode`] for the layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedArch {
    pub bits: Vec<u8>,
}

impl EncodedArch {
    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmbedNotInChoices(usize),
    LayersNotInChoices(usize),
    LengthMismatch { field: &'static str, expected: usize, found: usize },
    HeadNotInChoices { layer: usize, value: usize },
    MlpRatioNotInChoices { layer: usize, value: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmbedNotInChoices(v) => write!(f, "embed_dim not in choices ({v})"),
            Violation::LayersNotInChoices(v) => write!(f, "num_layers not in choices ({v})"),
            Violation::LengthMismatch { field, expected, found } => {
                write!(f, "length mismatch: {field} has {found} entries, num_layers is {expected}")
            }
            Violation::HeadNotInChoices { layer, value } => {
                write!(f, "heads[{layer}] not in choices ({value})")
            }
            Violation::MlpRatioNotInChoices { layer, value } => {
                write!(f, "mlp_ratios[{layer}] not in choices ({value})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidArch(self.violations.iter().map(ToString::to_string).collect()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Largest,
    Smallest,
}

impl SearchSpaceSpec {
    /// Builds a space with the default model dimensions (head size 64,
    /// vocabulary 50254, sequence length 1024).
    pub fn new(
        name: impl Into<String>,
        embed: &[usize],
        layers: &[usize],
        heads: &[usize],
        mlp_ratios: &[usize],
    ) -> Self {
        Self {
            name: name.into(),
            embed_choices: embed.to_vec(),
            layer_choices: layers.to_vec(),
            head_choices: heads.to_vec(),
            mlp_ratio_choices: mlp_ratios.to_vec(),
            head_size: 64,
            vocab_size: 50254,
            seq_len: 1024,
        }
    }

    pub fn max_layers(&self) -> usize {
        *self.layer_choices.iter().max().expect("layer choices are nonempty")
    }

    pub fn encoding_len(&self) -> usize {
        let l = self.max_layers();
        self.layer_choices.len()
            + self.embed_choices.len()
            + l * self.head_choices.len()
            + l * self.mlp_ratio_choices.len()
            + 1
    }

    /// Human-readable name of every encoding position, in layout order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.encoding_len());
        names.extend(self.layer_choices.iter().map(|v| format!("num_layers={v}")));
        names.extend(self.embed_choices.iter().map(|v| format!("embed_dim={v}")));
        for i in 0..self.max_layers() {
            names.extend(self.head_choices.iter().map(|v| format!("heads[{i}]={v}")));
        }
        for i in 0..self.max_layers() {
            names.extend(self.mlp_ratio_choices.iter().map(|v| format!("mlp_ratios[{i}]={v}")));
        }
        names.push("bias".to_string());
        names
    }
}

/// Two embeddings, one or two layers, two head and ratio choices: 80 architectures.
pub fn toy_space() -> SearchSpaceSpec {
    SearchSpaceSpec::new("toy", &[16, 32], &[1, 2], &[1, 2], &[1, 2])
}

pub fn preset(name: &str) -> Result<SearchSpaceSpec> {
    let spec = match name {
        "gpt-s" => SearchSpaceSpec::new(name, &[192, 384, 768], &[10, 11, 12], &[4, 8, 12], &[2, 3, 4]),
        "gpt-m" => SearchSpaceSpec::new(name, &[256, 512, 1024], &[22, 23, 24], &[8, 12, 16], &[2, 3, 4]),
        "gpt-l" => SearchSpaceSpec::new(name, &[320, 640, 1280], &[34, 35, 36], &[8, 16, 20], &[2, 3, 4]),
        "gpt-s-wide" => SearchSpaceSpec::new(name, &[192, 384, 768], &[3, 6, 12], &[3, 6, 12], &[1, 2, 4]),
        "gpt-m-wide" => SearchSpaceSpec::new(name, &[256, 512, 1024], &[6, 12, 24], &[4, 8, 16], &[1, 2, 4]),
        "gpt-l-wide" => SearchSpaceSpec::new(name, &[320, 640, 1280], &[9, 18, 36], &[5, 10, 20], &[1, 2, 4]),
        "gpt-xl-wide" => {
            SearchSpaceSpec::new(name, &[400, 800, 1600], &[12, 24, 48], &[6, 12, 25], &[1, 2, 4])
        }
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.to_vec(),
            })
        }
    };
    Ok(spec)
}

pub fn validate(spec: &SearchSpaceSpec, arch: &ArchConfig) -> ValidationReport {
    let mut violations = Vec::new();
    if !spec.embed_choices.contains(&arch.embed_dim) {
        violations.push(Violation::EmbedNotInChoices(arch.embed_dim));
    }
    if !spec.layer_choices.contains(&arch.num_layers) {
        violations.push(Violation::LayersNotInChoices(arch.num_layers));
    }
    for (field, len) in [("heads", arch.heads.len()), ("mlp_ratios", arch.mlp_ratios.len())] {
        if len != arch.num_layers {
            violations.push(Violation::LengthMismatch {
                field,
                expected: arch.num_layers,
                found: len,
            });
        }
    }
    for (layer, &value) in arch.heads.iter().enumerate() {
        if !spec.head_choices.contains(&value) {
            violations.push(Violation::HeadNotInChoices { layer, value });
        }
    }
    for (layer, &value) in arch.mlp_ratios.iter().enumerate() {
        if !spec.mlp_ratio_choices.contains(&value) {
            violations.push(Violation::MlpRatioNotInChoices { layer, value });
        }
    }
    ValidationReport { violations }
}

/// Exact number of architectures: sum over layer counts of
/// |embed| * |bias| * (|heads| * |ratios|)^layers.
pub fn cardinality(spec: &SearchSpaceSpec) -> BigUint {
    let per_layer = BigUint::from(spec.head_choices.len() * spec.mlp_ratio_choices.len());
    let prefix = BigUint::from(spec.embed_choices.len() * BIAS_CHOICES.len());
    spec.layer_choices
        .iter()
        .map(|&l| &prefix * per_layer.pow(l as u32))
        .sum()
}

fn draw_arch<R: Rng + ?Sized>(spec: &SearchSpaceSpec, rng: &mut R) -> ArchConfig {
    let num_layers = *spec.layer_choices.choose(rng).expect("nonempty layer choices");
    let embed_dim = *spec.embed_choices.choose(rng).expect("nonempty embed choices");
    let heads = (0..num_layers)
        .map(|_| *spec.head_choices.choose(rng).expect("nonempty head choices"))
        .collect();
    let mlp_ratios = (0..num_layers)
        .map(|_| *spec.mlp_ratio_choices.choose(rng).expect("nonempty ratio choices"))
        .collect();
    let bias = rng.random_bool(0.5);
    ArchConfig {
        embed_dim,
        num_layers,
        heads,
        mlp_ratios,
        bias,
    }
}

/// Draws `count` architectures, each dimension independently and uniformly
/// (layer count first). With `unique`, duplicates are rejected and redrawn.
pub fn sample_uniform<R: Rng + ?Sized>(
    spec: &SearchSpaceSpec,
    count: usize,
    unique: bool,
    rng: &mut R,
) -> Result<Vec<ArchConfig>> {
    if !unique {
        return Ok((0..count).map(|_| draw_arch(spec, rng)).collect());
    }
    let available = cardinality(spec);
    if BigUint::from(count) > available {
        return Err(Error::CountExceedsCardinality {
            requested: count,
            available: available.to_string(),
        });
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let arch = draw_arch(spec, rng);
        if seen.insert(arch.clone()) {
            out.push(arch);
        }
    }
    Ok(out)
}

/// Layout: layer one-hot, embed one-hot, per-layer head one-hots (max_layers
/// blocks), per-layer MLP-ratio one-hots (max_layers blocks), bias bit.
/// Blocks for layers beyond `num_layers` stay zero.
pub fn encode(spec: &SearchSpaceSpec, arch: &ArchConfig) -> Result<EncodedArch> {
    validate(spec, arch).into_result()?;
    let max_layers = spec.max_layers();
    let mut bits = vec![0u8; spec.encoding_len()];
    let pos = |choices: &[usize], v: usize| choices.iter().position(|&c| c == v).unwrap();

    let mut offset = 0;
    bits[offset + pos(&spec.layer_choices, arch.num_layers)] = 1;
    offset += spec.layer_choices.len();
    bits[offset + pos(&spec.embed_choices, arch.embed_dim)] = 1;
    offset += spec.embed_choices.len();
    let nh = spec.head_choices.len();
    for (i, &h) in arch.heads.iter().enumerate() {
        bits[offset + i * nh + pos(&spec.head_choices, h)] = 1;
    }
    offset += max_layers * nh;
    let nm = spec.mlp_ratio_choices.len();
    for (i, &m) in arch.mlp_ratios.iter().enumerate() {
        bits[offset + i * nm + pos(&spec.mlp_ratio_choices, m)] = 1;
    }
    offset += max_layers * nm;
    bits[offset] = u8::from(arch.bias);
    Ok(EncodedArch { bits })
}

#[derive(Debug, Clone, Copy)]
enum Gene {
    Embed,
    Layers,
    Bias,
    Head(usize),
    Ratio(usize),
}

fn other_choice<R: Rng + ?Sized>(choices: &[usize], current: usize, rng: &mut R) -> usize {
    let alternatives: Vec<usize> = choices.iter().copied().filter(|&c| c != current).collect();
    *alternatives.choose(rng).expect("caller checked alternatives exist")
}

/// Changes exactly one gene. Genes without an alternative value are never
/// selected, so the result always differs from the input.
pub fn mutate<R: Rng + ?Sized>(spec: &SearchSpaceSpec, arch: &ArchConfig, rng: &mut R) -> ArchConfig {
    let mut genes = Vec::with_capacity(3 + 2 * arch.num_layers);
    if spec.embed_choices.len() > 1 {
        genes.push(Gene::Embed);
    }
    if spec.layer_choices.len() > 1 {
        genes.push(Gene::Layers);
    }
    genes.push(Gene::Bias);
    if spec.head_choices.len() > 1 {
        genes.extend((0..arch.num_layers).map(Gene::Head));
    }
    if spec.mlp_ratio_choices.len() > 1 {
        genes.extend((0..arch.num_layers).map(Gene::Ratio));
    }

    let mut child = arch.clone();
    match *genes.choose(rng).expect("bias is always mutable") {
        Gene::Embed => child.embed_dim = other_choice(&spec.embed_choices, arch.embed_dim, rng),
        Gene::Bias => child.bias = !arch.bias,
        Gene::Head(i) => child.heads[i] = other_choice(&spec.head_choices, arch.heads[i], rng),
        Gene::Ratio(i) => {
            child.mlp_ratios[i] = other_choice(&spec.mlp_ratio_choices, arch.mlp_ratios[i], rng)
        }
        Gene::Layers => {
            let l = other_choice(&spec.layer_choices, arch.num_layers, rng);
            child.num_layers = l;
            child.heads.truncate(l);
            child.mlp_ratios.truncate(l);
            while child.heads.len() < l {
                child.heads.push(*spec.head_choices.choose(rng).unwrap());
                child.mlp_ratios.push(*spec.mlp_ratio_choices.choose(rng).unwrap());
            }
        }
    }
    child
}

/// Uniform crossover; layer count is inherited from one parent, and each
/// per-layer gene comes from whichever parent has that layer.
pub fn crossover<R: Rng + ?Sized>(
    _spec: &SearchSpaceSpec,
    a: &ArchConfig,
    b: &ArchConfig,
    rng: &mut R,
) -> ArchConfig {
    let pick = |rng: &mut R, x: usize, y: usize| if rng.random_bool(0.5) { x } else { y };
    let num_layers = pick(rng, a.num_layers, b.num_layers);
    let embed_dim = pick(rng, a.embed_dim, b.embed_dim);
    let bias = if rng.random_bool(0.5) { a.bias } else { b.bias };
    let mut heads = Vec::with_capacity(num_layers);
    let mut mlp_ratios = Vec::with_capacity(num_layers);
    for i in 0..num_layers {
        let (h, m) = match (i < a.num_layers, i < b.num_layers) {
            (true, true) => (pick(rng, a.heads[i], b.heads[i]), pick(rng, a.mlp_ratios[i], b.mlp_ratios[i])),
            (true, false) => (a.heads[i], a.mlp_ratios[i]),
            (false, true) => (b.heads[i], b.mlp_ratios[i]),
            (false, false) => unreachable!("child layer count comes from a parent"),
        };
        heads.push(h);
        mlp_ratios.push(m);
    }
    ArchConfig {
        embed_dim,
        num_layers,
        heads,
        mlp_ratios,
        bias,
    }
}

pub fn extreme(spec: &SearchSpaceSpec, which: Extreme) -> ArchConfig {
    let pick = |c: &[usize]| match which {
        Extreme::Largest => *c.iter().max().unwrap(),
        Extreme::Smallest => *c.iter().min().unwrap(),
    };
    let num_layers = pick(&spec.layer_choices);
    ArchConfig {
        embed_dim: pick(&spec.embed_choices),
        num_layers,
        heads: vec![pick(&spec.head_choices); num_layers],
        mlp_ratios: vec![pick(&spec.mlp_ratio_choices); num_layers],
        bias: which == Extreme::Largest,
    }
}
