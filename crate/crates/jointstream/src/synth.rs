//! Synthetic bags with planted per-label signal.
//!
//! Every instance starts as a draw from `N(0, I_d)`. For each positive label
//! `k` some instances of the bag (each with probability ½, at least one) are
//! shifted by `difficulty · u_k`, where the `u_k` are seeded orthonormal
//! directions. A label is therefore on exactly when its signal appears in
//! the bag. Raw labels follow a fixed mixing table whose marginals are
//! skewed the way clinical cohorts are (about four in five ER positive).
//!
//! In the two-domain variant labels ER, PR and HER2 are planted in the first
//! half of the coordinates of an RGB bag and HG, MS and ALN in the second
//! half of the coordinates of a DFT bag, so no single domain sees every
//! label's signal.

use jointstream_core::features::{Grade, NodeStatus, Subtype};
use jointstream_core::rng::{self, pair_index, Purpose};
use jointstream_core::{Domain, FeatureBag, Matrix, RawLabels, NUM_FACTORS};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::manifest::Split;

pub const MAX_BAG: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_wsis: usize,
    pub d: usize,
    pub difficulty: f64,
    /// Split the signal between an RGB and a DFT bag per slide.
    pub two_domain: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSlide {
    pub wsi_id: String,
    pub labels: RawLabels,
    pub split: Split,
    /// One bag per domain, in domain order.
    pub bags: Vec<FeatureBag>,
}

/// Label draws from a fixed table of conditional rates.
pub fn draw_labels(rng: &mut impl Rng) -> RawLabels {
    let er = rng.random_bool(0.785);
    let pr = rng.random_bool(if er { 0.9 } else { 0.188 });
    let her2 = rng.random_bool(0.262);
    let subtype = match (er || pr, her2) {
        (false, false) => Subtype::TripleNegative,
        (false, true) => Subtype::Her2Positive,
        (true, true) => Subtype::LuminalB,
        (true, false) => {
            if rng.random_bool(0.7) {
                Subtype::LuminalA
            } else {
                Subtype::LuminalB
            }
        }
    };
    let grade = if rng.random_bool(0.40) {
        Grade::G3
    } else if rng.random_bool(38.0 / 556.0) {
        Grade::G1
    } else {
        Grade::G2
    };
    let nodes = if !rng.random_bool(0.381) {
        NodeStatus::N0
    } else if rng.random_bool(210.0 / 403.0) {
        NodeStatus::N1To2
    } else {
        NodeStatus::N2Plus
    };
    RawLabels { er, pr, her2, grade, subtype, nodes }
}

/// Gram–Schmidt on Gaussian draws restricted to `coords`.
fn directions(rng: &mut impl Rng, d: usize, coords: std::ops::Range<usize>, count: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        let mut v = vec![0.0; d];
        for x in &mut v[coords.clone()] {
            *x = rng.sample(StandardNormal);
        }
        for u in &out {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            out.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    out
}

fn split_of(i: usize, n: usize) -> Split {
    let train = (n * 6).div_ceil(10);
    let val = (n * 2).div_ceil(10);
    if i < train {
        Split::Train
    } else if i < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

/// One bag carrying the signal of each label in `planted`.
fn bag(rng: &mut impl Rng, cfg: &SynthConfig, planted: &[(usize, &[f64])], wsi_id: &str, domain: Domain, labels: [u8; NUM_FACTORS]) -> FeatureBag {
    let n = rng.random_range(1..=MAX_BAG);
    let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..cfg.d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    for &(_, u) in planted {
        let mut carriers: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if carriers.is_empty() {
            carriers.push(rng.random_range(0..n));
        }
        for i in carriers {
            for (x, ui) in rows[i].iter_mut().zip(u) {
                *x += cfg.difficulty * ui;
            }
        }
    }
    // Stored at the precision the bag file keeps.
    let data = rows.into_iter().flatten().map(|v| v as f32 as f64).collect();
    let instances = Matrix::from_vec(n, cfg.d, data).expect("n×d");
    FeatureBag::single_domain(wsi_id, instances, domain, jointstream_core::FactorLabels(labels)).expect("non-empty bag")
}

/// Generates `n_wsis` slides. Panics when `d` is too small to hold the six
/// orthogonal directions (two domains need `d ≥ 6` per half).
pub fn generate(cfg: &SynthConfig) -> Vec<SynthSlide> {
    let mut dir_rng = rng::stream(cfg.seed, Purpose::Synthetic, pair_index(0, 0));
    let groups: Vec<(Domain, Vec<usize>, Vec<Vec<f64>>)> = if cfg.two_domain {
        assert!(cfg.d >= 6, "two-domain data needs d >= 6");
        let half = cfg.d / 2;
        vec![
            (Domain::Rgb, vec![0, 1, 2], directions(&mut dir_rng, cfg.d, 0..half, 3)),
            (Domain::Dft, vec![3, 4, 5], directions(&mut dir_rng, cfg.d, half..cfg.d, 3)),
        ]
    } else {
        assert!(cfg.d >= NUM_FACTORS, "need d >= 6");
        vec![(Domain::Rgb, (0..NUM_FACTORS).collect(), directions(&mut dir_rng, cfg.d, 0..cfg.d, NUM_FACTORS))]
    };

    (0..cfg.n_wsis)
        .map(|i| {
            let mut r = rng::stream(cfg.seed, Purpose::Synthetic, pair_index(1, i as u64));
            let wsi_id = format!("syn{i:04}");
            let labels = draw_labels(&mut r);
            let bits = labels.to_binary().0;
            let bags = groups
                .iter()
                .map(|(domain, ks, dirs)| {
                    let planted: Vec<(usize, &[f64])> =
                        ks.iter().zip(dirs).filter(|(&k, _)| bits[k] == 1).map(|(&k, u)| (k, u.as_slice())).collect();
                    bag(&mut r, cfg, &planted, &wsi_id, *domain, bits)
                })
                .collect();
            SynthSlide { wsi_id, labels, split: split_of(i, cfg.n_wsis), bags }
        })
        .collect()
}
