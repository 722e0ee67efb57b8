//! Log-space forward-backward and Viterbi over dense score matrices.

/// Per-position label scores and label-to-label transition scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    /// `emit[t][y]`
    pub emit: Vec<Vec<f64>>,
    /// `trans[prev][cur]`
    pub trans: Vec<Vec<f64>>,
}

impl Scores {
    pub fn len(&self) -> usize {
        self.emit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emit.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.trans.len()
    }

    /// Unnormalized log score of a complete labeling.
    pub fn path_score(&self, path: &[usize]) -> f64 {
        let mut s = 0.0;
        for (t, &y) in path.iter().enumerate() {
            s += self.emit[t][y];
            if t > 0 {
                s += self.trans[path[t - 1]][y];
            }
        }
        s
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub struct ForwardBackward {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub log_z: f64,
}

/// Requires a nonempty sequence.
pub fn forward_backward(scores: &Scores) -> ForwardBackward {
    let n = scores.len();
    let l = scores.num_labels();
    assert!(n > 0, "forward_backward on an empty sequence");
    let mut alpha = vec![vec![0.0; l]; n];
    alpha[0].clone_from(&scores.emit[0]);
    for t in 1..n {
        for y in 0..l {
            alpha[t][y] = log_sum_exp((0..l).map(|p| alpha[t - 1][p] + scores.trans[p][y]))
                + scores.emit[t][y];
        }
    }
    let mut beta = vec![vec![0.0; l]; n];
    for t in (0..n - 1).rev() {
        for p in 0..l {
            beta[t][p] = log_sum_exp(
                (0..l).map(|y| scores.trans[p][y] + scores.emit[t + 1][y] + beta[t + 1][y]),
            );
        }
    }
    let log_z = log_sum_exp(alpha[n - 1].iter().copied());
    ForwardBackward { alpha, beta, log_z }
}

#[derive(Debug, Clone)]
pub struct Marginals {
    /// `unary[t][y] = P(y_t = y)`
    pub unary: Vec<Vec<f64>>,
    /// `pairwise[t][p][y] = P(y_t = p, y_{t+1} = y)`, length `n - 1`
    pub pairwise: Vec<Vec<Vec<f64>>>,
    pub log_z: f64,
}

pub fn marginals(scores: &Scores) -> Marginals {
    let fb = forward_backward(scores);
    let n = scores.len();
    let l = scores.num_labels();
    let unary = (0..n)
        .map(|t| {
            (0..l)
                .map(|y| (fb.alpha[t][y] + fb.beta[t][y] - fb.log_z).exp())
                .collect()
        })
        .collect();
    let pairwise = (0..n.saturating_sub(1))
        .map(|t| {
            (0..l)
                .map(|p| {
                    (0..l)
                        .map(|y| {
                            (fb.alpha[t][p]
                                + scores.trans[p][y]
                                + scores.emit[t + 1][y]
                                + fb.beta[t + 1][y]
                                - fb.log_z)
                                .exp()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Marginals {
        unary,
        pairwise,
        log_z: fb.log_z,
    }
}

/// Highest-scoring labeling and its score. Ties go to the lower label index.
pub fn viterbi(scores: &Scores) -> (Vec<usize>, f64) {
    let n = scores.len();
    let l = scores.num_labels();
    assert!(n > 0, "viterbi on an empty sequence");
    let mut delta = scores.emit[0].clone();
    let mut back = vec![vec![0usize; l]; n];
    for t in 1..n {
        let mut next = vec![0.0; l];
        for y in 0..l {
            let mut best = 0;
            let mut best_score = delta[0] + scores.trans[0][y];
            for p in 1..l {
                let s = delta[p] + scores.trans[p][y];
                if s > best_score {
                    best = p;
                    best_score = s;
                }
            }
            back[t][y] = best;
            next[y] = best_score + scores.emit[t][y];
        }
        delta = next;
    }
    let mut last = 0;
    for y in 1..l {
        if delta[y] > delta[last] {
            last = y;
        }
    }
    let best = delta[last];
    let mut path = vec![last; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    (path, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(n: usize, l: usize) -> Scores {
        Scores {
            emit: vec![vec![0.0; l]; n],
            trans: vec![vec![0.0; l]; l],
        }
    }

    #[test]
    fn uniform_partition() {
        let s = zeros(4, 3);
        assert!((forward_backward(&s).log_z - 4.0 * 3f64.ln()).abs() < 1e-12);
        for row in marginals(&s).unary {
            for p in row {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_scores_decode_to_label_zero() {
        assert_eq!(viterbi(&zeros(5, 4)).0, vec![0; 5]);
    }

    #[test]
    fn log_sum_exp_handles_large_values() {
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert_eq!(log_sum_exp([]), f64::NEG_INFINITY);
    }
}
