//! Independent reference computations used by the oracle and acceptance tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdoh_core::crf::{sequence_nll_gradient, Scores};
use sdoh_core::linear::binary_objective;
use sdoh_core::textproc::FeatureVector;

/// Every labeling of length `n` over `l` labels.
pub fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..l).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn naive_score(s: &Scores, path: &[usize]) -> f64 {
    let mut total = 0.0;
    for t in 0..path.len() {
        total += s.emit[t][path[t]];
        if t > 0 {
            total += s.trans[path[t - 1]][path[t]];
        }
    }
    total
}

pub struct BruteForce {
    pub log_z: f64,
    pub unary: Vec<Vec<f64>>,
    pub pairwise: Vec<Vec<Vec<f64>>>,
    pub best_score: f64,
    /// All paths attaining the best score.
    pub argmax: Vec<Vec<usize>>,
}

pub fn brute_force(s: &Scores) -> BruteForce {
    let n = s.emit.len();
    let l = s.trans.len();
    let paths = all_paths(n, l);
    let scores: Vec<f64> = paths.iter().map(|p| naive_score(s, p)).collect();
    let z: f64 = scores.iter().map(|x| x.exp()).sum();
    let mut unary = vec![vec![0.0; l]; n];
    let mut pairwise = vec![vec![vec![0.0; l]; l]; n.saturating_sub(1)];
    for (p, sc) in paths.iter().zip(&scores) {
        let prob = sc.exp() / z;
        for t in 0..n {
            unary[t][p[t]] += prob;
            if t + 1 < n {
                pairwise[t][p[t]][p[t + 1]] += prob;
            }
        }
    }
    let best_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let argmax = paths
        .iter()
        .zip(&scores)
        .filter(|(_, s)| **s == best_score)
        .map(|(p, _)| p.clone())
        .collect();
    BruteForce {
        log_z: z.ln(),
        unary,
        pairwise,
        best_score,
        argmax,
    }
}

pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, l: usize) -> Scores {
    let mut row = |k: usize| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    let emit = (0..n).map(|_| row(l)).collect();
    let trans = (0..l).map(|_| row(l)).collect();
    Scores { emit, trans }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn random_features(rng: &mut ChaCha8Rng, dim: usize, density: f64) -> FeatureVector {
    let mut pairs = Vec::new();
    for f in 0..dim as u32 {
        if rng.gen_bool(density) {
            pairs.push((f, rng.gen_range(0.5..1.5)));
        }
    }
    FeatureVector::from_pairs(pairs)
}

/// A random CRF problem in the raw parameter layout.
pub struct CrfProblem {
    pub feats: Vec<FeatureVector>,
    pub gold: Vec<usize>,
    pub emissions: Vec<f64>,
    pub transitions: Vec<f64>,
    pub num_labels: usize,
    pub l2: f64,
}

pub fn random_crf_problem(seed: u64) -> CrfProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.gen_range(2..=4);
    let n = rng.gen_range(1..=5);
    let dim = 6;
    let feats = (0..n)
        .map(|_| {
random_features(&mut rng, dim, 0.5)
        })
        .collect();
    CrfProblem {
        feats,
        gold: (0..n).map(|_| rng.gen_range(0..l)).collect(),
        emissions: (0..dim * l).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        transitions: (0..l * l).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        num_labels: l,
        l2: 0.1,
    }
}

/// Largest relative error between the analytic CRF gradient and central differences.
pub fn crf_gradient_error(p: &CrfProblem) -> f64 {
    let loss = |e: &[f64], t: &[f64]| sequence_nll_gradient(&p.feats, &p.gold, e, t, p.num_labels, p.l2).0;
    let (_, g) = sequence_nll_gradient(&p.feats, &p.gold, &p.emissions, &p.transitions, p.num_labels, p.l2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..p.emissions.len() {
        let (mut up, mut down) = (p.emissions.clone(), p.emissions.clone());
        up[i] += h;
        down[i] -= h;
        let fd = (loss(&up, &p.transitions) - loss(&down, &p.transitions)) / (2.0 * h);
        worst = worst.max(relative_error(fd, g.emissions[i]));
    }
    for i in 0..p.transitions.len() {
        let (mut up, mut down) = (p.transitions.clone(), p.transitions.clone());
        up[i] += h;
        down[i] -= h;
        let fd = (loss(&p.emissions, &up) - loss(&p.emissions, &down)) / (2.0 * h);
        worst = worst.max(relative_error(fd, g.transitions[i]));
    }
    worst
}

/// Largest relative error for the regularized logistic objective.
pub fn logistic_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 8;
    let examples: Vec<(FeatureVector, bool)> = (0..6)
        .map(|_| {
            let fv = random_features(&mut rng, dim, 0.4);
            (fv, rng.gen_bool(0.5))
        })
        .collect();
    let w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = rng.gen_range(-1.0..1.0);
    let l2 = 0.05;
    let (_, g, gb) = binary_objective(&w, b, &examples, l2);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        let (mut up, mut down) = (w.clone(), w.clone());
        up[i] += h;
        down[i] -= h;
        let fd = (binary_objective(&up, b, &examples, l2).0 - binary_objective(&down, b, &examples, l2).0) / (2.0 * h);
        worst = worst.max(relative_error(fd, g[i]));
    }
    let fd = (binary_objective(&w, b + h, &examples, l2).0 - binary_objective(&w, b - h, &examples, l2).0) / (2.0 * h);
    worst.max(relative_error(fd, gb))
}
