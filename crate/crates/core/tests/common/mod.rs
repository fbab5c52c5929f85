//! Test-only helpers: planted-cluster data and finite-difference oracles.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tversky::data::{FeatureVector, LabeledItem, LabeledItemSet};
use tversky::measures::{Measure, TverskyParams};

/// Synthetic item set whose class structure is planted under a hidden
/// measure: every same-class pair scores above `same_min` and every
/// cross-class pair below `cross_max`.
#[derive(Clone, Debug)]
pub struct Planted {
    pub m: usize,
    pub n_items: usize,
    pub n_classes: usize,
    /// Features `0..informative` carry class signal, the rest are noise.
    pub informative: usize,
    pub prototype_size: usize,
    pub keep_rate: f64,
    pub noise_rate: f64,
    pub hidden: Measure,
    pub same_min: f64,
    pub cross_max: f64,
    pub seed: u64,
}

impl Planted {
    /// 40 features, 500 items, 10 classes under a hidden weighted Tversky
    /// measure (alpha = beta = 0.5, informative weights 1, noise 0.05).
    pub fn weighted(seed: u64) -> Self {
        let m = 40;
        let informative = 30;
        let weights = (0..m).map(|i| if i < informative { 1.0 } else { 0.05 }).collect();
        Planted {
            m,
            n_items: 500,
            n_classes: 10,
            informative,
            prototype_size: 5,
            keep_rate: 0.95,
            noise_rate: 0.3,
            hidden: Measure::Tversky(TverskyParams::symmetric(0.5, Some(weights)).unwrap()),
            same_min: 0.6,
            cross_max: 0.4,
            seed,
        }
    }

    /// Class equality coincides with Jaccard > 0.5.
    pub fn jaccard(seed: u64) -> Self {
        Planted {
            m: 30,
            n_items: 240,
            n_classes: 6,
            informative: 30,
            prototype_size: 6,
            keep_rate: 0.97,
            noise_rate: 0.0,
            hidden: Measure::Tversky(TverskyParams::jaccard()),
            same_min: 0.5,
            cross_max: 0.5,
            seed,
        }
    }

    fn prototypes(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
        let pool: Vec<usize> = (0..self.informative).collect();
        let mut protos: Vec<Vec<usize>> = Vec::new();
        let mut attempts = 0;
        while protos.len() < self.n_classes {
            attempts += 1;
            assert!(attempts < 100_000, "cannot place prototypes");
            let cand: Vec<usize> = pool.choose_multiple(rng, self.prototype_size).copied().collect();
            let ok = protos
                .iter()
                .all(|p| p.iter().filter(|f| cand.contains(f)).count() <= 1);
            if ok {
                protos.push(cand);
            }
        }
        protos
    }

    pub fn generate(&self) -> LabeledItemSet {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let protos = self.prototypes(&mut rng);
        let mut items: Vec<LabeledItem> = Vec::with_capacity(self.n_items);
        let mut attempts = 0;
        while items.len() < self.n_items {
            attempts += 1;
            assert!(attempts < 200 * self.n_items, "planting rejected too many items");
            let class = items.len() % self.n_classes;
            let mut bits = vec![0u8; self.m];
            for &f in &protos[class] {
                bits[f] = u8::from(rng.random_bool(self.keep_rate));
            }
            for b in bits.iter_mut().skip(self.informative) {
                *b = u8::from(rng.random_bool(self.noise_rate));
            }
            let candidate = FeatureVector::new(bits).unwrap();
            let label = format!("class{class}");
            let consistent = items.iter().all(|other| {
                let s = self.hidden.score(&candidate, &other.features).unwrap();
                if other.label == label {
                    s > self.same_min
                } else {
                    s < self.cross_max
                }
            });
            if consistent {
                items.push(LabeledItem::new(format!("item{}", items.len()), label, candidate));
            }
        }
        let names = (0..self.m).map(|i| format!("attr{i}")).collect();
        LabeledItemSet::new(names, items).unwrap()
    }
}

/// Central difference of `f` along coordinate `i` of `theta`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, theta: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = theta.to_vec();
    let mut minus = theta.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Relative agreement with a small absolute floor for near-zero partials.
pub fn grads_agree(analytic: f64, numeric: f64, rel_tol: f64) -> bool {
    let scale = analytic.abs().max(numeric.abs());
    (analytic - numeric).abs() <= rel_tol * scale + 1e-8
}

/// Score of `measure` with its parameters replaced by `theta` (no projection).
pub fn score_at(measure: &Measure, theta: &[f64], x: &FeatureVector, y: &FeatureVector) -> f64 {
    let mut m = measure.clone();
    m.set_parameters(theta).unwrap();
    m.score(x, y).unwrap()
}

pub fn random_vector<R: Rng>(rng: &mut R, m: usize, density: f64) -> FeatureVector {
    FeatureVector::from_bools((0..m).map(|_| rng.random_bool(density)))
}
