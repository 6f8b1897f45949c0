use super::{check_data, global_moments, variance_floor, GmmModel, TrainingConfig};
use crate::error::{Error, Result};

/// Responsibility mass below which a component counts as collapsed.
const COLLAPSE_THRESHOLD: f64 = 1e-10;

/// Result of a fixed-length EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    pub model: GmmModel,
    /// `Σ_t log p(x_t | λ)` under the initial model.
    pub initial_log_likelihood: f64,
    /// Total log-likelihood after each iteration, one value per iteration.
    pub log_likelihoods: Vec<f64>,
    /// Components re-seeded because their responsibility mass vanished.
    pub reinitialized: usize,
}

/// Runs exactly `cfg.em_iterations` EM passes from `init`.
///
/// E-step responsibilities come from the current model; the M-step sets
/// weights to mean responsibility, means to responsibility-weighted averages
/// and diagonal variances to responsibility-weighted centred second moments,
/// floored at `variance_floor_factor` times the global variance. A component
/// whose responsibility mass drops below 1e-10 is re-seeded on the worst
/// explained data point with the global variance.
pub fn em_train(data: &[Vec<f64>], init: &GmmModel, cfg: &TrainingConfig) -> Result<EmOutcome> {
    if cfg.em_iterations == 0 {
        return Err(Error::InvalidConfig(
            "em_iterations must be at least 1".into(),
        ));
    }
    let dim = check_data(data)?;
    if dim != init.dim() {
        return Err(Error::DimensionMismatch {
            expected: init.dim(),
            found: dim,
        });
    }
    let m = init.components();
    if data.len() < 10 * m {
        log::warn!(
            "EM on {} vectors for {m} components; at least {} recommended",
            data.len(),
            10 * m
        );
    }
    let (_, gvar) = global_moments(data, dim);
    let floor = variance_floor(&gvar, cfg.variance_floor_factor);
    let n = data.len();

    let mut model = init.clone();
    let mut resp = vec![0.0; n * m];
    let mut point_ll = vec![0.0; n];
    let mut lls = Vec::with_capacity(cfg.em_iterations + 1);
    let mut reinitialized = 0;

    for _ in 0..cfg.em_iterations {
        lls.push(e_step(&model, data, &mut resp, &mut point_ll));

        let mut mass = vec![0.0; m];
        let mut means = vec![0.0; m * dim];
        for (t, x) in data.iter().enumerate() {
            let r = &resp[t * m..(t + 1) * m];
            for i in 0..m {
                mass[i] += r[i];
                for (mu, v) in means[i * dim..(i + 1) * dim].iter_mut().zip(x) {
                    *mu += r[i] * v;
                }
            }
        }
        let collapsed: Vec<bool> = mass.iter().map(|&w| w < COLLAPSE_THRESHOLD).collect();
        for i in 0..m {
            if !collapsed[i] {
                means[i * dim..(i + 1) * dim]
                    .iter_mut()
                    .for_each(|v| *v /= mass[i]);
            }
        }
        let mut vars = vec![0.0; m * dim];
        for (t, x) in data.iter().enumerate() {
            let r = &resp[t * m..(t + 1) * m];
            for i in 0..m {
                let mu = &means[i * dim..(i + 1) * dim];
                for ((s, v), c) in vars[i * dim..(i + 1) * dim].iter_mut().zip(x).zip(mu) {
                    *s += r[i] * (v - c) * (v - c);
                }
            }
        }
        for i in 0..m {
            if collapsed[i] {
                continue;
            }
            for (s, f) in vars[i * dim..(i + 1) * dim].iter_mut().zip(&floor) {
                *s = (*s / mass[i]).max(*f);
            }
        }

        let mut weights: Vec<f64> = mass.iter().map(|w| w / n as f64).collect();
        if collapsed.iter().any(|&c| c) {
            // Worst-explained points first; ties by index.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]).then(a.cmp(&b)));
            let mut next = order.into_iter();
            for i in (0..m).filter(|&i| collapsed[i]) {
                let t = next.next().unwrap_or(0);
                means[i * dim..(i + 1) * dim].copy_from_slice(&data[t]);
                for (s, (g, f)) in vars[i * dim..(i + 1) * dim]
                    .iter_mut()
                    .zip(gvar.iter().zip(&floor))
                {
                    *s = g.max(*f);
                }
                weights[i] = 1.0 / n as f64;
                reinitialized += 1;
                log::debug!("re-seeded collapsed component {i} on vector {t}");
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        model = GmmModel::new(model.kind(), dim, weights, means, vars)?;
    }
    lls.push(e_step(&model, data, &mut resp, &mut point_ll));

    Ok(EmOutcome {
        model,
        initial_log_likelihood: lls[0],
        log_likelihoods: lls.split_off(1),
        reinitialized,
    })
}

/// Fills responsibilities and per-point log-likelihoods; returns the total.
fn e_step(model: &GmmModel, data: &[Vec<f64>], resp: &mut [f64], point_ll: &mut [f64]) -> f64 {
    let m = model.components();
    let mut total = 0.0;
    for (t, x) in data.iter().enumerate() {
        let r = &mut resp[t * m..(t + 1) * m];
        let lse = model.weighted_log_densities(x, r);
        for v in r.iter_mut() {
            *v = (*v - lse).exp();
        }
        point_ll[t] = lse;
        total += lse;
    }
    total
}
