//! Independent reference implementations used by the integration tests.
//! Each one is written the slow, obvious way and shares no code with the
//! library it checks.
#![allow(dead_code)]

use uisal::features::{BoundingBox, UiElement};
use uisal::gaze::PixelSaliencyMap;
use uisal::SeededRng;

/// Indices of the top `ceil(k/5)` ground-truth values, ties to the lower id.
pub fn positives(gt: &[f64], ids: &[u32]) -> Vec<bool> {
    let k = gt.len();
    let n_pos = k.div_ceil(5);
    let mut taken = vec![false; k];
    for _ in 0..n_pos {
        let mut best: Option<usize> = None;
        for i in 0..k {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) if gt[i] > gt[b] || (gt[i] == gt[b] && ids[i] < ids[b]) => Some(i),
                keep => keep,
            };
        }
        taken[best.unwrap()] = true;
    }
    taken
}

/// Mann–Whitney statistic: share of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn mann_whitney(gt: &[f64], pred: &[f64], ids: &[u32]) -> f64 {
    let pos = positives(gt, ids);
    let (mut twice_wins, mut pairs) = (0u64, 0u64);
    for i in 0..gt.len() {
        for j in 0..gt.len() {
            if pos[i] && !pos[j] {
                pairs += 1;
                twice_wins += match pred[i].partial_cmp(&pred[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice_wins as f64 / (2 * pairs) as f64
}

/// Pearson correlation from raw sums.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

pub fn kl_divergence(gt: &[f64], pred: &[f64]) -> f64 {
    let eps = 1e-12;
    let mut total = 0.0;
    for i in 0..gt.len() {
        total += gt[i] * ((gt[i] + eps) / (pred[i] + eps)).ln();
    }
    total
}

/// Probability vector of length `k` with occasional exact ties and zeros.
pub fn random_distribution(rng: &mut SeededRng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| match rng.int_range(0, 10) {
            0 => 0.0,
            1 => 0.5,
            _ => rng.uniform(),
        })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Random boxes inside `w × h`, overlaps allowed, ids shuffled.
pub fn random_layout(rng: &mut SeededRng, w: usize, h: usize, k: usize) -> Vec<UiElement> {
    let mut ids: Vec<u32> = (0..k as u32).map(|i| i * 3 + 1).collect();
    rng.shuffle(&mut ids);
    ids.into_iter()
        .map(|id| {
            let x0 = rng.int_range(0, w - 1);
            let y0 = rng.int_range(0, h - 1);
            let x1 = rng.int_range(x0 + 1, w);
            let y1 = rng.int_range(y0 + 1, h);
            UiElement {
                id,
                bbox: BoundingBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32).unwrap(),
            }
        })
        .collect()
}

/// Density owned by each element, by scanning every element at every pixel:
/// the owner is the smallest covering box, ties to the lower id.
pub fn owned_mass(map: &PixelSaliencyMap, elements: &[UiElement]) -> Vec<f64> {
    let mut mass = vec![0.0; elements.len()];
    for y in 0..map.height {
        for x in 0..map.width {
            let mut owner: Option<usize> = None;
            for (i, e) in elements.iter().enumerate() {
                if !e.bbox.contains(x, y) {
                    continue;
                }
                owner = match owner {
                    None => Some(i),
                    Some(o) => {
                        let (a, b) = (e.bbox.area(), elements[o].bbox.area());
                        if a < b || (a == b && e.id < elements[o].id) {
                            Some(i)
                        } else {
                            Some(o)
                        }
                    }
                };
            }
            if let Some(o) = owner {
                mass[o] += map.at(x, y);
            }
        }
    }
    mass
}
