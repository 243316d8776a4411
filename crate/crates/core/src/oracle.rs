//! Synthetic ground truth.
//!
//! Perplexity follows a fitted power law over the architecture's aggregate
//! dimensions. Parameter, FLOP and memory figures come from closed-form
//! shape counts of a decoder-only transformer. Latency and energy are drawn
//! from heteroscedastic per-device noise models whose relative spread grows
//! as perplexity improves.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{extreme, ArchConfig, Extreme, SearchSpaceSpec};

/// y = c * l^alpha * e^beta * mean(h)^gamma * mean(m)^delta * (b + bias_offset)^sigma_b
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawModel {
    pub c: f64,
    /// layer-count exponent
    pub alpha: f64,
    /// embedding-dimension exponent
    pub beta: f64,
    /// mean-heads exponent
    pub gamma: f64,
    /// mean-MLP-ratio exponent
    pub delta: f64,
    /// bias exponent
    pub sigma_b: f64,
    /// Added to the 0/1 bias indicator before exponentiation. The fitted
    /// coefficients are evaluated with 1, i.e. `(b + 1)^sigma_b`.
    #[serde(default = "default_bias_offset")]
    pub bias_offset: f64,
}

fn default_bias_offset() -> f64 {
    1.0
}

impl PowerLawModel {
    pub fn new(c: f64, alpha: f64, beta: f64, gamma: f64, delta: f64, sigma_b: f64) -> Self {
        Self {
            c,
            alpha,
            beta,
            gamma,
            delta,
            sigma_b,
            bias_offset: 1.0,
        }
    }

    pub fn exponents(&self) -> [f64; 5] {
        [self.alpha, self.beta, self.gamma, self.delta, self.sigma_b]
    }
}

pub fn preset_power_law(space_name: &str) -> Result<PowerLawModel> {
    let m = match space_name {
        "gpt-s" => PowerLawModel::new(646.234, -0.226, -0.371, -0.076, -0.100, -0.001),
        "gpt-m" => PowerLawModel::new(404.456, -0.104, -0.343, -0.049, -0.091, -0.005),
        "gpt-l" => PowerLawModel::new(280.757, -0.073, -0.309, -0.051, -0.088, -0.005),
        "gpt-s-wide" => PowerLawModel::new(1116.453, -0.212, -0.3770, -0.0647, -0.0514, -0.000190),
        "gpt-m-wide" => PowerLawModel::new(618.0753, -0.1795, -0.3401, -0.0556, -0.0711, -0.0050),
        "gpt-l-wide" => PowerLawModel::new(498.9920, -0.1659, -0.3204, -0.053, -0.0692, -0.0081),
        other => return Err(Error::NoCoefficients(other.to_string())),
    };
    Ok(m)
}

pub fn perplexity(model: &PowerLawModel, arch: &ArchConfig) -> f64 {
    let b = if arch.bias { 1.0 } else { 0.0 };
    model.c
        * (arch.num_layers as f64).powf(model.alpha)
        * (arch.embed_dim as f64).powf(model.beta)
        * arch.mean_heads().powf(model.gamma)
        * arch.mean_mlp_ratio().powf(model.delta)
        * (b + model.bias_offset).powf(model.sigma_b)
}

/// Trainable parameters with a tied embedding/output matrix. Each block has
/// fused q/k/v and output projections, a two-matrix MLP, and two norms; a
/// final norm follows the stack. Norms always carry weight and bias.
pub fn param_count(arch: &ArchConfig, spec: &SearchSpaceSpec) -> u64 {
    let e = arch.embed_dim as u64;
    let hs = spec.head_size as u64;
    let mut total = spec.vocab_size as u64 * e;
    for (&h, &m) in arch.heads.iter().zip(&arch.mlp_ratios) {
        let d_attn = h as u64 * hs;
        let d_mlp = m as u64 * e;
        total += 3 * e * d_attn + d_attn * e;
        total += e * d_mlp + d_mlp * e;
        if arch.bias {
            total += 3 * d_attn + e;
            total += d_mlp + e;
        }
        total += 2 * (2 * e);
    }
    total + 2 * e
}

/// Forward-pass FLOPs over one full sequence (two per multiply-accumulate),
/// including attention scores/values and the output projection.
pub fn flops(arch: &ArchConfig, spec: &SearchSpaceSpec) -> u64 {
    let seq = spec.seq_len as u64;
    let e = arch.embed_dim as u64;
    let mut total = 0u64;
    for (&h, &m) in arch.heads.iter().zip(&arch.mlp_ratios) {
        let d_attn = h as u64 * spec.head_size as u64;
        let macs = 3 * e * d_attn + d_attn * e + 2 * e * (m as u64 * e);
        total += 2 * seq * macs + 4 * seq * seq * d_attn;
    }
    total + 2 * seq * e * spec.vocab_size as u64
}

pub fn memory_bytes(arch: &ArchConfig, spec: &SearchSpaceSpec, bytes_per_param: u64) -> u64 {
    param_count(arch, spec) * bytes_per_param
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HwMetric {
    Latency,
    Energy,
}

impl HwMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            HwMetric::Latency => "latency",
            HwMetric::Energy => "energy",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "latency" | "latency_ms" => Ok(HwMetric::Latency),
            "energy" | "energy_mwh" => Ok(HwMetric::Energy),
            _ => Err(Error::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Gpu,
    Cpu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    #[serde(skip)]
    pub name: String,
    pub platform: Platform,
    /// milliseconds per GFLOP
    pub lat_per_gflop_ms: f64,
    /// fixed milliseconds per transformer block
    pub lat_per_layer_ms: f64,
    /// milliwatt-hours per GFLOP
    pub energy_per_gflop_mwh: f64,
    /// relative std at the worst perplexity in the space
    pub noise_floor_frac: f64,
    /// additional relative std reached at the best perplexity
    pub noise_slope_frac: f64,
    pub outlier_prob: f64,
    pub outlier_scale: f64,
}

impl DeviceProfile {
    pub fn mean(&self, arch: &ArchConfig, spec: &SearchSpaceSpec, metric: HwMetric) -> f64 {
        let gflops = flops(arch, spec) as f64 / 1e9;
        match metric {
            HwMetric::Latency => self.lat_per_gflop_ms * gflops + self.lat_per_layer_ms * arch.num_layers as f64,
            HwMetric::Energy => self.energy_per_gflop_mwh * gflops,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.lat_per_gflop_ms, self.lat_per_layer_ms, self.energy_per_gflop_mwh];
        if rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("device `{}`: rates must be positive", self.name)));
        }
        if self.noise_floor_frac < 0.0 || self.noise_slope_frac < 0.0 {
            return Err(Error::Config(format!("device `{}`: negative noise fraction", self.name)));
        }
        if !(0.0..=0.05).contains(&self.outlier_prob) || self.outlier_scale < 1.0 {
            return Err(Error::Config(format!("device `{}`: outlier settings out of range", self.name)));
        }
        Ok(())
    }
}

/// Perplexity range of a space, spanned by its smallest and largest archs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityRange {
    pub best: f64,
    pub worst: f64,
}

impl PerplexityRange {
    pub fn of(model: &PowerLawModel, spec: &SearchSpaceSpec) -> Self {
        let a = perplexity(model, &extreme(spec, Extreme::Largest));
        let b = perplexity(model, &extreme(spec, Extreme::Smallest));
        Self {
            best: a.min(b),
            worst: a.max(b),
        }
    }

    /// 0 at the worst perplexity, 1 at the best.
    pub fn quality(&self, ppl: f64) -> f64 {
        if self.worst > self.best {
            ((self.worst - ppl) / (self.worst - self.best)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

pub fn hw_std(
    profile: &DeviceProfile,
    model: &PowerLawModel,
    spec: &SearchSpaceSpec,
    arch: &ArchConfig,
    metric: HwMetric,
) -> f64 {
    let range = PerplexityRange::of(model, spec);
    let mu = profile.mean(arch, spec, metric);
    mu * (profile.noise_floor_frac + profile.noise_slope_frac * range.quality(perplexity(model, arch)))
}

/// Draws `k` noisy observations: Gaussian around the device mean, with an
/// occasional inflated deviation, truncated below at a tenth of the mean.
pub fn hw_samples<R: Rng + ?Sized>(
    profile: &DeviceProfile,
    model: &PowerLawModel,
    spec: &SearchSpaceSpec,
    arch: &ArchConfig,
    metric: HwMetric,
    k: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mu = profile.mean(arch, spec, metric);
    let sigma = hw_std(profile, model, spec, arch, metric);
    (0..k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let outlier = rng.random::<f64>() < profile.outlier_prob;
            let mut dev = sigma * z;
            if outlier {
                dev *= profile.outlier_scale;
            }
            (mu + dev).max(mu / 10.0)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn profile(
    name: &str,
    platform: Platform,
    lat_per_gflop_ms: f64,
    lat_per_layer_ms: f64,
    energy_per_gflop_mwh: f64,
) -> DeviceProfile {
    let (noise_floor_frac, noise_slope_frac, outlier_prob, outlier_scale) = match platform {
        Platform::Gpu => (0.01, 0.03, 0.01, 3.0),
        Platform::Cpu => (0.04, 0.10, 0.03, 4.0),
    };
    DeviceProfile {
        name: name.to_string(),
        platform,
        lat_per_gflop_ms,
        lat_per_layer_ms,
        energy_per_gflop_mwh,
        noise_floor_frac,
        noise_slope_frac,
        outlier_prob,
        outlier_scale,
    }
}

/// Thirteen synthetic devices: eight GPUs and five CPUs.
pub fn preset_device_profiles() -> BTreeMap<String, DeviceProfile> {
    use Platform::{Cpu, Gpu};
    [
        profile("rtx2080", Gpu, 0.090, 0.12, 0.0060),
        profile("rtx3080", Gpu, 0.050, 0.10, 0.0045),
        profile("a6000", Gpu, 0.040, 0.08, 0.0040),
        profile("a100", Gpu, 0.030, 0.06, 0.0030),
        profile("a40", Gpu, 0.045, 0.08, 0.0042),
        profile("p100", Gpu, 0.110, 0.15, 0.0075),
        profile("v100", Gpu, 0.060, 0.09, 0.0050),
        profile("h100", Gpu, 0.020, 0.05, 0.0022),
        profile("xeon-silver", Cpu, 2.000, 1.00, 0.0300),
        profile("xeon-gold", Cpu, 1.200, 0.80, 0.0220),
        profile("amd-7452", Cpu, 0.900, 0.60, 0.0180),
        profile("amd-7513", Cpu, 0.700, 0.50, 0.0150),
        profile("amd-7502", Cpu, 0.850, 0.60, 0.0170),
    ]
    .into_iter()
    .map(|p| (p.name.clone(), p))
    .collect()
}

pub fn profiles_to_json(profiles: &BTreeMap<String, DeviceProfile>) -> Result<String> {
    Ok(serde_json::to_string_pretty(profiles)?)
}

pub fn profiles_from_json(text: &str) -> Result<BTreeMap<String, DeviceProfile>> {
    let mut profiles: BTreeMap<String, DeviceProfile> = serde_json::from_str(text)?;
    for (name, p) in profiles.iter_mut() {
        p.name = name.clone();
        p.validate()?;
    }
    Ok(profiles)
}

pub fn load_profiles(path: &Path) -> Result<BTreeMap<String, DeviceProfile>> {
    profiles_from_json(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HwObservations {
    pub latency_ms: Vec<f64>,
    pub energy_mwh: Vec<f64>,
}

impl HwObservations {
    pub fn get(&self, metric: HwMetric) -> &[f64] {
        match metric {
            HwMetric::Latency => &self.latency_ms,
            HwMetric::Energy => &self.energy_mwh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub arch: ArchConfig,
    pub perplexity: f64,
    pub params: u64,
    pub flops: u64,
    pub mem_bytes: u64,
    pub hw: BTreeMap<String, HwObservations>,
}

/// Power law, device profiles and the space they are evaluated on.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub space: SearchSpaceSpec,
    pub power_law: PowerLawModel,
    pub profiles: BTreeMap<String, DeviceProfile>,
    pub bytes_per_param: u64,
}

impl Oracle {
    pub fn new(space: SearchSpaceSpec, power_law: PowerLawModel) -> Self {
        Self {
            space,
            power_law,
            profiles: preset_device_profiles(),
            bytes_per_param: 2,
        }
    }

    pub fn for_preset(name: &str) -> Result<Self> {
        Ok(Self::new(crate::space::preset(name)?, preset_power_law(name)?))
    }

    pub fn profile(&self, device: &str) -> Result<&DeviceProfile> {
        self.profiles
            .get(device)
            .ok_or_else(|| Error::UnknownDevice(device.to_string()))
    }

    pub fn perplexity(&self, arch: &ArchConfig) -> f64 {
        perplexity(&self.power_law, arch)
    }

    pub fn hw_mean(&self, device: &str, arch: &ArchConfig, metric: HwMetric) -> Result<f64> {
        Ok(self.profile(device)?.mean(arch, &self.space, metric))
    }

    pub fn hw_std(&self, device: &str, arch: &ArchConfig, metric: HwMetric) -> Result<f64> {
        Ok(hw_std(self.profile(device)?, &self.power_law, &self.space, arch, metric))
    }

    pub fn hw_samples<R: Rng + ?Sized>(
        &self,
        device: &str,
        arch: &ArchConfig,
        metric: HwMetric,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        Ok(hw_samples(self.profile(device)?, &self.power_law, &self.space, arch, metric, k, rng))
    }

    /// Full record for one architecture; devices are visited in name order.
    pub fn record<R: Rng + ?Sized>(
        &self,
        arch: &ArchConfig,
        devices: &[String],
        k_lat: usize,
        k_energy: usize,
        rng: &mut R,
    ) -> Result<MetricRecord> {
        let mut hw = BTreeMap::new();
        let mut ordered: Vec<&String> = devices.iter().collect();
        ordered.sort();
        for device in ordered {
            let latency_ms = self.hw_samples(device, arch, HwMetric::Latency, k_lat, rng)?;
            let energy_mwh = self.hw_samples(device, arch, HwMetric::Energy, k_energy, rng)?;
            hw.insert(device.clone(), HwObservations { latency_ms, energy_mwh });
        }
        Ok(MetricRecord {
            arch: arch.clone(),
            perplexity: self.perplexity(arch),
            params: param_count(arch, &self.space),
            flops: flops(arch, &self.space),
            mem_bytes: memory_bytes(arch, &self.space, self.bytes_per_param),
            hw,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::space::preset;

    fn tiny_spec() -> SearchSpaceSpec {
        let mut s = SearchSpaceSpec::new("tiny", &[4], &[1], &[1], &[2]);
        s.vocab_size = 10;
        s.head_size = 2;
        s.seq_len = 2;
        s
    }

    fn tiny_arch(bias: bool) -> ArchConfig {
        ArchConfig {
            embed_dim: 4,
            num_layers: 1,
            heads: vec![1],
            mlp_ratios: vec![2],
            bias,
        }
    }

    #[test]
    fn published_coefficients() {
        let s = preset_power_law("gpt-s").unwrap();
        assert_eq!(s.c, 646.234);
        assert_eq!(s.exponents(), [-0.226, -0.371, -0.076, -0.100, -0.001]);
        let mw = preset_power_law("gpt-m-wide").unwrap();
        assert_eq!(mw.c, 618.0753);
        assert_eq!(mw.exponents(), [-0.1795, -0.3401, -0.0556, -0.0711, -0.0050]);
        assert!(matches!(preset_power_law("gpt-xl-wide"), Err(Error::NoCoefficients(_))));
    }

    #[test]
    fn supernet_perplexity() {
        let m = preset_power_law("gpt-s").unwrap();
        let arch = extreme(&preset("gpt-s").unwrap(), Extreme::Largest);
        let expected = 646.234
            * 12f64.powf(-0.226)
            * 768f64.powf(-0.371)
            * 12f64.powf(-0.076)
            * 4f64.powf(-0.100)
            * 2f64.powf(-0.001);
        assert!((perplexity(&m, &arch) - expected).abs() < 1e-12);
        assert!((perplexity(&m, &arch) - 22.56).abs() < 0.01);
    }

    #[test]
    fn flat_power_law_returns_constant() {
        let m = PowerLawModel::new(37.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(perplexity(&m, &tiny_arch(true)), 37.5);
    }

    #[test]
    fn doubling_embed_scales_by_power() {
        let m = preset_power_law("gpt-s").unwrap();
        let mut a = extreme(&preset("gpt-s").unwrap(), Extreme::Smallest);
        let y1 = perplexity(&m, &a);
        a.embed_dim *= 2;
        let ratio = perplexity(&m, &a) / y1;
        assert!((ratio - 2f64.powf(-0.371)).abs() < 1e-12);
        assert!((ratio - 0.7733).abs() < 1e-4);
    }

    #[test]
    fn tiny_param_counts() {
        let s = tiny_spec();
        assert_eq!(param_count(&tiny_arch(false), &s), 160);
        assert_eq!(param_count(&tiny_arch(true), &s), 182);
        assert_eq!(memory_bytes(&tiny_arch(false), &s, 2), 320);
        assert_eq!(memory_bytes(&tiny_arch(false), &s, 4), 640);
    }

    #[test]
    fn tiny_flops_by_hand() {
        // e=4, d_attn=2, d_mlp=8, seq=2, vocab=10
        // qkv 2*2*(3*4*2)=96, proj 2*2*(2*4)=32, mlp 2*2*(2*4*8)=256,
        // scores+values 4*4*2=32, head 2*2*4*10=160
        assert_eq!(flops(&tiny_arch(false), &tiny_spec()), 96 + 32 + 256 + 32 + 160);
    }

    #[test]
    fn extremes_order_counts() {
        let s = preset("gpt-s").unwrap();
        let big = extreme(&s, Extreme::Largest);
        let small = extreme(&s, Extreme::Smallest);
        assert!(param_count(&big, &s) > param_count(&small, &s));
        assert!(flops(&big, &s) > flops(&small, &s));
        assert_eq!(memory_bytes(&big, &s, 2), 2 * param_count(&big, &s));
    }

    #[test]
    fn zero_noise_profile_returns_mean() {
        let s = preset("gpt-s").unwrap();
        let m = preset_power_law("gpt-s").unwrap();
        let mut p = preset_device_profiles()["a100"].clone();
        p.noise_floor_frac = 0.0;
        p.noise_slope_frac = 0.0;
        p.outlier_prob = 0.0;
        let arch = extreme(&s, Extreme::Largest);
        let mu = p.mean(&arch, &s, HwMetric::Latency);
        let draws = hw_samples(&p, &m, &s, &arch, HwMetric::Latency, 10, &mut seeded(1));
        assert_eq!(draws, vec![mu; 10]);
    }

    #[test]
    fn relative_noise_grows_with_quality() {
        let s = preset("gpt-s").unwrap();
        let m = preset_power_law("gpt-s").unwrap();
        let p = &preset_device_profiles()["rtx2080"];
        let good = extreme(&s, Extreme::Largest);
        let bad = extreme(&s, Extreme::Smallest);
        assert!(perplexity(&m, &good) < perplexity(&m, &bad));
        for metric in [HwMetric::Latency, HwMetric::Energy] {
            let rel_good = hw_std(p, &m, &s, &good, metric) / p.mean(&good, &s, metric);
            let rel_bad = hw_std(p, &m, &s, &bad, metric) / p.mean(&bad, &s, metric);
            assert!(rel_good >= rel_bad);
            assert!((rel_good - 0.04).abs() < 1e-12);
            assert!((rel_bad - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn preset_profiles_shape() {
        let profiles = preset_device_profiles();
        assert_eq!(profiles.len(), 13);
        let gpus = profiles.values().filter(|p| p.platform == Platform::Gpu).count();
        assert_eq!(gpus, 8);
        let rates: Vec<f64> = profiles.values().map(|p| p.lat_per_gflop_ms).collect();
        let spread = rates.iter().cloned().fold(0.0, f64::max) / rates.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread >= 20.0);
        let max_gpu_noise = profiles
            .values()
            .filter(|p| p.platform == Platform::Gpu)
            .map(|p| p.noise_floor_frac.max(p.noise_slope_frac))
            .fold(0.0, f64::max);
        for cpu in profiles.values().filter(|p| p.platform == Platform::Cpu) {
            assert!(cpu.noise_floor_frac >= 3.0 * 0.01 && cpu.noise_slope_frac >= 3.0 * 0.03);
            assert!(cpu.noise_floor_frac + cpu.noise_slope_frac >= 3.0 * max_gpu_noise);
        }
        for p in profiles.values() {
            p.validate().unwrap();
        }
    }

    #[test]
    fn profiles_json_round_trip() {
        let profiles = preset_device_profiles();
        let text = profiles_to_json(&profiles).unwrap();
        assert!(text.contains("\"lat_per_gflop_ms\""));
        assert_eq!(profiles_from_json(&text).unwrap(), profiles);
    }

    #[test]
    fn record_contains_all_devices() {
        let oracle = Oracle::for_preset("gpt-s").unwrap();
        let arch = extreme(&oracle.space, Extreme::Smallest);
        let devices = vec!["h100".to_string(), "a100".to_string()];
        let rec = oracle.record(&arch, &devices, 10, 50, &mut seeded(3)).unwrap();
        assert_eq!(rec.hw.len(), 2);
        assert_eq!(rec.hw["a100"].latency_ms.len(), 10);
        assert_eq!(rec.hw["h100"].energy_mwh.len(), 50);
        assert!(oracle.record(&arch, &["nope".to_string()], 1, 1, &mut seeded(3)).is_err());
    }
}
