//! Least-squares fitting of the threshold network.
//!
//! Full-batch gradient descent on analytic gradients with Barzilai-Borwein
//! step proposals and Armijo backtracking, so every accepted step lowers
//! the loss. Several random restarts run independently; the lowest final
//! loss wins (ties go to the lower restart index).
//!
//! The objective weights each output by `1 / eta_k^2`, i.e. the squared
//! error is measured relative to each axis' output range. Without this the
//! S-(L+M) axis, whose contrasts are an order of magnitude smaller, would be
//! ignored by the optimizer.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rbfnn::{RbfnnModel, PARAMS_PER_NODE};
use super::{display_eta, ThresholdSample, DEFAULT_NODES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub nodes: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    pub seed: u64,
    /// Output scale; `None` derives it from the sRGB gamut.
    pub eta: Option<[f64; 2]>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            nodes: DEFAULT_NODES,
            restarts: 32,
            max_iters: 3000,
            grad_tol: 1e-12,
            seed: 0,
            eta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Unweighted sum of squared residuals over both outputs.
    pub sse: f64,
    /// Pooled over both outputs, each centered on its own mean.
    pub r2: Option<f64>,
    pub r2_lm: Option<f64>,
    pub r2_s: Option<f64>,
    /// Adjusted with `n` scalar targets and 3 predictors.
    pub adjusted_r2: Option<f64>,
    pub samples: usize,
    pub best_restart: usize,
    pub iterations: usize,
    /// Weighted objective after each accepted step of the best restart.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: RbfnnModel,
    pub report: FitReport,
}

struct Problem<'a> {
    data: &'a [ThresholdSample],
    weights: [f64; 2],
}

impl Problem<'_> {
    /// Loss and gradient at `theta`, where widths are stored as `ln sigma`.
    fn loss_grad(&self, model: &mut RbfnnModel, theta: &[f64], grad: &mut [f64]) -> f64 {
        load_theta(model, theta);
        grad.iter_mut().for_each(|g| *g = 0.0);
        self.data
            .iter()
            .map(|s| model.accumulate_loss_grad(s.input(), s.target(), self.weights, grad))
            .sum()
    }
}

fn load_theta(model: &mut RbfnnModel, theta: &[f64]) {
    model.set_params(theta);
    for w in model.widths.iter_mut() {
        *w = w.exp();
    }
}

fn to_theta(model: &RbfnnModel) -> Vec<f64> {
    let mut p = model.params();
    for j in 0..model.nodes() {
        p[j * PARAMS_PER_NODE + 3] = p[j * PARAMS_PER_NODE + 3].ln();
    }
    p
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

fn median_pairwise_distance(data: &[ThresholdSample]) -> f64 {
    let mut d = Vec::with_capacity(data.len() * (data.len().saturating_sub(1)) / 2);
    for (i, a) in data.iter().enumerate() {
        for b in &data[i + 1..] {
            let (u, v) = (a.input(), b.input());
            d.push(((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    d.get(d.len() / 2).copied().unwrap_or(0.0)
}

struct RestartOutcome {
    loss: f64,
    model: RbfnnModel,
    iterations: usize,
    history: Vec<f64>,
}

fn run_restart(problem: &Problem, init: RbfnnModel, cfg: &TrainConfig) -> RestartOutcome {
    let mut model = init;
    let mut theta = to_theta(&model);
    let len = theta.len();
    let mut grad = vec![0.0; len];
    let mut loss = problem.loss_grad(&mut model, &theta, &mut grad);
    let mut history = vec![loss];

    let mut next = vec![0.0; len];
    let mut next_grad = vec![0.0; len];
    let mut step = 1e-2 / dot(&grad, &grad).sqrt().max(1.0);
    let mut iterations = 0;

    'outer: for _ in 0..cfg.max_iters {
        let g2 = dot(&grad, &grad);
        if g2.sqrt() < cfg.grad_tol || loss == 0.0 {
            break;
        }
        let next_loss = loop {
            for i in 0..len {
                next[i] = theta[i] - step * grad[i];
            }
            let l = problem.loss_grad(&mut model, &next, &mut next_grad);
            if l.is_finite() && l <= loss - 1e-4 * step * g2 {
                break l;
            }
            step *= 0.5;
            if step < 1e-20 {
                break 'outer;
            }
        };
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..len {
            let s = next[i] - theta[i];
            ss += s * s;
            sy += s * (next_grad[i] - grad[i]);
        }
        std::mem::swap(&mut theta, &mut next);
        std::mem::swap(&mut grad, &mut next_grad);
        loss = next_loss;
        history.push(loss);
        iterations += 1;
        step = if sy > 0.0 { (ss / sy).min(1e6) } else { (step * 2.0).min(1e6) };
    }
    load_theta(&mut model, &theta);
    RestartOutcome {
        loss,
        model,
        iterations,
        history,
    }
}

fn r_squared(data: &[ThresholdSample], model: &RbfnnModel) -> (f64, [Option<f64>; 3]) {
    let n = data.len() as f64;
    let mut mean = [0.0; 2];
    for s in data {
        mean[0] += s.alpha_lm / n;
        mean[1] += s.alpha_s / n;
    }
    let mut res = [0.0; 2];
    let mut tot = [0.0; 2];
    let mut sq = [0.0; 2];
    for s in data {
        let p = model.eval(s.input());
        let t = s.target();
        for k in 0..2 {
            res[k] += (p[k] - t[k]).powi(2);
            tot[k] += (t[k] - mean[k]).powi(2);
            sq[k] += t[k] * t[k];
        }
    }
    // Spread below rounding noise counts as a constant target.
    let ratio = |r: f64, t: f64, sq: f64| (t > 1e-24 * sq).then(|| 1.0 - r / t);
    (
        res[0] + res[1],
        [
            ratio(res[0] + res[1], tot[0] + tot[1], sq[0] + sq[1]),
            ratio(res[0], tot[0], sq[0]),
            ratio(res[1], tot[1], sq[1]),
        ],
    )
}

/// Fits the threshold network to `data` by least squares.
pub fn train_rbfnn(data: &[ThresholdSample], cfg: &TrainConfig) -> Result<TrainedModel> {
    if cfg.nodes == 0 || cfg.restarts == 0 {
        return Err(Error::Training("nodes and restarts must be positive".into()));
    }
    if data.len() < cfg.nodes + 1 {
        return Err(Error::Training(format!(
            "need at least {} samples for {} nodes, got {}",
            cfg.nodes + 1,
            cfg.nodes,
            data.len()
        )));
    }
    if data
        .iter()
        .any(|s| !s.input().iter().chain(&s.target()).all(|v| v.is_finite()))
    {
        return Err(Error::Training("non-finite sample".into()));
    }
    let first = data[0].input();
    if data.iter().all(|s| s.input() == first) {
        return Err(Error::Training("all training inputs are identical".into()));
    }

    let eta = cfg.eta.unwrap_or_else(display_eta);
    if !eta.iter().all(|e| *e > 0.0 && e.is_finite()) {
        return Err(Error::Training(format!("invalid output scale {eta:?}")));
    }
    let problem = Problem {
        data,
        weights: [1.0 / (eta[0] * eta[0]), 1.0 / (eta[1] * eta[1])],
    };
    let width = match median_pairwise_distance(data) {
        d if d > 0.0 => d,
        _ => 1.0,
    };
    let n = data.len() as f64;
    let mean = [
        data.iter().map(|s| s.alpha_lm).sum::<f64>() / n,
        data.iter().map(|s| s.alpha_s).sum::<f64>() / n,
    ];
    let bias = [logit(mean[0] / eta[0]), logit(mean[1] / eta[1])];

    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let centers: Vec<[f64; 3]> = if data.len() >= cfg.nodes {
                sample(&mut rng, data.len(), cfg.nodes)
                    .into_iter()
                    .map(|i| data[i].input())
                    .collect()
            } else {
                (0..cfg.nodes)
                    .map(|_| data[rng.random_range(0..data.len())].input())
                    .collect()
            };
            let weights = (0..cfg.nodes)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                .collect();
            let init = RbfnnModel {
                centers,
                widths: vec![width; cfg.nodes],
                weights,
                bias,
                eta,
            };
            run_restart(&problem, init, cfg)
        })
        .collect();

    let (best_restart, best) = outcomes
        .into_iter()
        .enumerate()
        .filter(|(_, o)| o.loss.is_finite())
        .min_by(|a, b| a.1.loss.total_cmp(&b.1.loss).then(a.0.cmp(&b.0)))
        .ok_or_else(|| Error::Training("every restart diverged".into()))?;
    best.model.validate().map_err(|e| Error::Training(e.to_string()))?;

    let (sse, [r2, r2_lm, r2_s]) = r_squared(data, &best.model);
    let targets = 2.0 * n;
    let predictors = 3.0;
    let adjusted_r2 = r2.and_then(|r2| {
        let dof = targets - predictors - 1.0;
        (dof > 0.0).then(|| 1.0 - (1.0 - r2) * (targets - 1.0) / dof)
    });
    Ok(TrainedModel {
        model: best.model,
        report: FitReport {
            sse,
            r2,
            r2_lm,
            r2_s,
            adjusted_r2,
            samples: data.len(),
            best_restart,
            iterations: best.iterations,
            loss_history: best.history,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(f: impl Fn([f64; 3]) -> [f64; 2]) -> Vec<ThresholdSample> {
        let mut out = Vec::new();
        for i in 0..5 {
            for j in 0..3 {
                for e in [10.0, 17.5, 25.0, 30.0, 35.0] {
                    let u = [-0.6 + 0.3 * i as f64, -0.03 + 0.03 * j as f64, e];
                    let a = f(u);
                    out.push(ThresholdSample {
                        k_lm: u[0],
                        k_s: u[1],
                        ecc_deg: u[2],
                        alpha_lm: a[0],
                        alpha_s: a[1],
                    });
                }
            }
        }
        out
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            restarts: 4,
            max_iters: 1500,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn rejects_too_few_samples() {
        let data = grid(|_| [0.1, 0.01]);
        let err = train_rbfnn(&data[..5], &quick()).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn rejects_identical_inputs() {
        let s = ThresholdSample {
            k_lm: 0.1,
            k_s: 0.0,
            ecc_deg: 20.0,
            alpha_lm: 0.1,
            alpha_s: 0.01,
        };
        let err = train_rbfnn(&vec![s; 10], &quick()).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
    }

    #[test]
    fn constant_targets_are_reproduced() {
        let data = grid(|_| [0.1, 0.1]);
        let cfg = TrainConfig {
            eta: Some([1.0, 1.0]),
            ..quick()
        };
        let fit = train_rbfnn(&data, &cfg).unwrap();
        for s in &data {
            let p = fit.model.eval(s.input());
            assert!((p[0] - 0.1).abs() < 1e-3 && (p[1] - 0.1).abs() < 1e-3, "{p:?}");
        }
        assert!(fit.report.r2.is_none());
    }

    #[test]
    fn loss_never_increases() {
        let data = grid(|u| [0.02 + 0.004 * u[2] + 0.02 * u[0].abs(), 0.001 + 0.0001 * u[2]]);
        let fit = train_rbfnn(&data, &quick()).unwrap();
        let h = &fit.report.loss_history;
        assert!(h.len() > 10);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(fit.report.r2.unwrap() > 0.9, "{:?}", fit.report);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = grid(|u| [0.02 + 0.004 * u[2], 0.001 + 0.0001 * u[2]]);
        let a = train_rbfnn(&data, &quick()).unwrap();
        let b = train_rbfnn(&data, &quick()).unwrap();
        assert_eq!(a.model, b.model);
    }
}
