//! Independent reference implementations shared by the integration suites.
//! None of these call into the library code they are compared against.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hwnas_core::bench::{fit_bundle, BenchConfig, BenchContext, FitPlan, Predictor};
use hwnas_core::oracle::HwMetric;
use hwnas_core::space::SearchSpaceSpec;
use hwnas_core::surrogate::{Persist, ScalarTarget};
use hwnas_core::ArchConfig;
use num_bigint::BigUint;
use proptest::prelude::*;

/// Every architecture of a (small) space, by nested iteration.
pub fn enumerate(spec: &SearchSpaceSpec) -> Vec<ArchConfig> {
    let mut out = Vec::new();
    for &l in &spec.layer_choices {
        for &e in &spec.embed_choices {
            for bias in [false, true] {
                let mut heads = vec![Vec::new()];
                for _ in 0..l {
                    heads = heads
                        .into_iter()
                        .flat_map(|h: Vec<usize>| {
                            spec.head_choices.iter().map(move |&c| {
                                let mut h = h.clone();
                                h.push(c);
                                h
                            })
                        })
                        .collect();
                }
                let mut ratios = vec![Vec::new()];
                for _ in 0..l {
                    ratios = ratios
                        .into_iter()
                        .flat_map(|m: Vec<usize>| {
                            spec.mlp_ratio_choices.iter().map(move |&c| {
                                let mut m = m.clone();
                                m.push(c);
                                m
                            })
                        })
                        .collect();
                }
                for h in &heads {
                    for m in &ratios {
                        out.push(ArchConfig {
                            embed_dim: e,
                            num_layers: l,
                            heads: h.clone(),
                            mlp_ratios: m.clone(),
                            bias,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Sum over layer counts of |E| * 2 * (|H| * |M|)^l.
pub fn closed_form_count(spec: &SearchSpaceSpec) -> BigUint {
    let per_layer = BigUint::from(spec.head_choices.len() * spec.mlp_ratio_choices.len());
    let stacks: BigUint = spec.layer_choices.iter().map(|&l| per_layer.pow(l as u32)).sum();
    stacks * spec.embed_choices.len() * 2u32
}

/// Every trainable tensor of the decoder as a shape.
pub fn tensor_shapes(arch: &ArchConfig, spec: &SearchSpaceSpec) -> Vec<Vec<usize>> {
    let e = arch.embed_dim;
    let mut shapes = vec![vec![spec.vocab_size, e]];
    for i in 0..arch.num_layers {
        let d_a = arch.heads[i] * spec.head_size;
        let d_m = arch.mlp_ratios[i] * e;
        shapes.push(vec![e]); // ln1 weight
        shapes.push(vec![e]); // ln1 bias
        shapes.push(vec![e, 3 * d_a]);
        shapes.push(vec![d_a, e]);
        shapes.push(vec![e]); // ln2 weight
        shapes.push(vec![e]); // ln2 bias
        shapes.push(vec![e, d_m]);
        shapes.push(vec![d_m, e]);
        if arch.bias {
            shapes.push(vec![3 * d_a]);
            shapes.push(vec![e]);
            shapes.push(vec![d_m]);
            shapes.push(vec![e]);
        }
    }
    shapes.push(vec![e]);
    shapes.push(vec![e]);
    shapes
}

pub fn shape_param_count(arch: &ArchConfig, spec: &SearchSpaceSpec) -> u64 {
    tensor_shapes(arch, spec).iter().map(|s| s.iter().product::<usize>() as u64).sum()
}

/// Forward FLOPs from a list of matmuls `(rows, inner, cols)`, two per MAC.
pub fn matmul_flops(arch: &ArchConfig, spec: &SearchSpaceSpec) -> u64 {
    let t = spec.seq_len;
    let e = arch.embed_dim;
    let mut mm: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..arch.num_layers {
        let h = arch.heads[i];
        let hs = spec.head_size;
        let d_m = arch.mlp_ratios[i] * e;
        mm.push((t, e, 3 * h * hs));
        for _ in 0..h {
            mm.push((t, hs, t)); // q k^T
            mm.push((t, t, hs)); // softmax(.) v
        }
        mm.push((t, h * hs, e));
        mm.push((t, e, d_m));
        mm.push((t, d_m, e));
    }
    mm.push((t, e, spec.vocab_size));
    mm.iter().map(|&(a, b, c)| 2 * (a * b * c) as u64).sum()
}

pub fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// O(n^2) non-dominated filter; duplicates collapse to one copy.
pub fn brute_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let beaten = points.iter().any(|q| weakly_dominates(q, p) && q != p);
        if !beaten && !out.contains(p) {
            out.push(p.clone());
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Inclusion-exclusion over all nonempty subsets; exponential, small fronts only.
pub fn inclusion_exclusion_hv(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let pts: Vec<&Vec<f64>> = points.iter().filter(|p| weakly_dominates(p, reference)).collect();
    let n = pts.len();
    assert!(n <= 16, "inclusion-exclusion oracle is exponential");
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let members: Vec<&Vec<f64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pts[i]).collect();
        let vol: f64 = (0..reference.len())
            .map(|k| reference[k] - members.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max))
            .product();
        total += if members.len() % 2 == 1 { vol } else { -vol };
    }
    total
}

/// Tau-a by direct pair counting.
pub fn pair_count_tau(y: &[f64], z: &[f64]) -> f64 {
    let n = y.len();
    let (mut conc, mut disc) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let s = (y[i] - y[j]) * (z[i] - z[j]);
            if s > 0.0 {
                conc += 1;
            } else if s < 0.0 {
                disc += 1;
            }
        }
    }
    (conc - disc) as f64 / (n * (n - 1) / 2) as f64
}

/// Architectures of `spec` drawn from per-field indices.
pub fn arch_in(spec: SearchSpaceSpec) -> impl Strategy<Value = ArchConfig> {
    let l_n = spec.layer_choices.len();
    let max_l = spec.max_layers();
    (
        0..l_n,
        0..spec.embed_choices.len(),
        proptest::collection::vec(0..spec.head_choices.len(), max_l),
        proptest::collection::vec(0..spec.mlp_ratio_choices.len(), max_l),
        any::<bool>(),
    )
        .prop_map(move |(li, ei, hi, mi, bias)| {
            let l = spec.layer_choices[li];
            ArchConfig {
                embed_dim: spec.embed_choices[ei],
                num_layers: l,
                heads: hi[..l].iter().map(|&k| spec.head_choices[k]).collect(),
                mlp_ratios: mi[..l].iter().map(|&k| spec.mlp_ratio_choices[k]).collect(),
                bias,
            }
        })
}

/// Tiny decoders (vocab <= 16, embed <= 8) where every count is hand-checkable.
pub fn tiny_spec_and_arch() -> impl Strategy<Value = (SearchSpaceSpec, ArchConfig)> {
    (1usize..=16, 1usize..=8, 1usize..=4, 1usize..=4, 1usize..=8).prop_flat_map(|(vocab, embed, layers, head_size, seq)| {
        let mut spec = SearchSpaceSpec::new("tiny", &[embed], &[layers], &[1, 2, 3], &[1, 2, 4]);
        spec.vocab_size = vocab;
        spec.head_size = head_size;
        spec.seq_len = seq;
        arch_in(spec.clone()).prop_map(move |a| (spec.clone(), a))
    })
}

/// Points on a random 2-D or 3-D objective cloud in [0, 1)^m.
pub fn point_cloud(m: usize, max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, m), 1..=max_n)
}

/// generate -> fit -> run (rs, nsga2, ehvi x 3 seeds on the surrogates) -> EAF,
/// all under one master seed. Returns every written file by name.
pub fn pipeline_files(master_seed: u64, n: usize, budget: usize) -> BTreeMap<String, Vec<u8>> {
    let cfg = BenchConfig {
        seed: master_seed,
        n,
        devices: vec!["rtx2080".into()],
        k_energy: 5,
        mlp_epochs: 40,
        forest_trees: 20,
        ..BenchConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut ctx = BenchContext::from_config(&cfg).unwrap();
    let dataset = ctx.generate_dataset(cfg.n, cfg.k_lat, cfg.k_energy, &cfg.devices, master_seed).unwrap();
    dataset.write(&dir.path().join("dataset.jsonl")).unwrap();
    let plan = FitPlan {
        targets: vec![ScalarTarget::Perplexity],
        hw_metrics: vec![HwMetric::Latency],
        devices: cfg.devices.clone(),
    };
    ctx.surrogates = fit_bundle(&dataset, &cfg, &plan).unwrap();
    std::fs::write(dir.path().join("surrogates.json"), ctx.surrogates.to_json().unwrap()).unwrap();
    for method in ["rs", "nsga2", "ehvi"] {
        let report = ctx
            .run_baseline(method, &cfg.objectives, budget, &[0, 1, 2], Predictor::Surrogate)
            .unwrap();
        report.export(&dir.path().join(method)).unwrap();
    }
    let mut files = BTreeMap::new();
    collect(dir.path(), dir.path(), &mut files);
    files
}

fn collect(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect(root, &path, out);
        } else {
            let name = path.strip_prefix(root).unwrap().display().to_string();
            out.insert(name, std::fs::read(&path).unwrap());
        }
    }
}
