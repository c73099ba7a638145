//! Five-parameter logistic mapping from objective scores to the MOS scale,
//! fitted by least squares with a Nelder-Mead simplex.

use serde::Serialize;

use crate::error::{Error, Result};

/// `b1 * (1/2 - 1/(1 + exp(b2 * (x - b3)))) + b4 * x + b5`
pub fn logistic(beta: &[f64; 5], x: f64) -> f64 {
    let [b1, b2, b3, b4, b5] = *beta;
    b1 * (0.5 - 1.0 / (1.0 + (b2 * (x - b3)).exp())) + b4 * x + b5
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticFit {
    pub beta: [f64; 5],
    pub converged: bool,
    /// Euclidean norm of the residuals at `beta`.
    pub residual: f64,
}

impl LogisticFit {
    pub fn apply(&self, x: f64) -> f64 {
        logistic(&self.beta, x)
    }

    pub fn map(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}

struct Simplex {
    best: Vec<f64>,
    value: f64,
    converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2). Converged when the spread of vertex values and the simplex
/// diameter both fall below tolerance, or when every vertex value is below
/// the absolute tolerance `fatol` (an exact fit whose parameters are not
/// identifiable never collapses the simplex).
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], steps: &[f64], max_iter: usize, ftol: f64, fatol: f64) -> Simplex {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let small_simplex = diameter <= 1e-10 * (1.0 + pts[0].iter().map(|v| v.abs()).fold(0.0, f64::max));
        if (spread <= ftol * (vals[0].abs() + ftol) && small_simplex) || vals[n] <= fatol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (w - c)).collect() };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[n] {
            let c = along(-0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = contracted;
            vals[n] = fc;
            continue;
        }
        let best = pts[0].clone();
        for i in 1..=n {
            pts[i] = pts[i].iter().zip(&best).map(|(p, b)| b + 0.5 * (p - b)).collect();
            vals[i] = f(&pts[i]);
        }
    }
    let i = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Simplex { best: pts[i].clone(), value: vals[i], converged }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares fit of [`logistic`] to `(objective, mos)`.
///
/// Three deterministic starts are tried: `b3` at the median score, `b1` the
/// MOS range, `b2` the inverse score deviation, `b4 = 0`, `b5` the MOS mean;
/// then the same with `b1` negated; then with `b2` scaled by 5. Each start is
/// restarted from its best vertex until it stops improving. A fit that never
/// meets the convergence test is returned with `converged = false`.
pub fn fit_logistic(objective: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    if objective.len() != mos.len() {
        return Err(Error::DegenerateInput("objective and MOS lengths differ".into()));
    }
    if objective.len() < 5 {
        return Err(Error::DegenerateInput(format!("need at least 5 points to fit 5 parameters, got {}", objective.len())));
    }
    if objective.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value".into()));
    }
    let n = objective.len() as f64;
    let mean_x = objective.iter().sum::<f64>() / n;
    let std_x = (objective.iter().map(|x| (x - mean_x).powi(2)).sum::<f64>() / n).sqrt();
    let (lo, hi) = mos.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    let mean_y = mos.iter().sum::<f64>() / n;
    let x_scale = if std_x > 0.0 { std_x } else { 1.0 };
    let y_scale = if range > 0.0 { range } else { 1.0 };

    let sse = |b: &[f64]| -> f64 {
        let beta: [f64; 5] = b.try_into().unwrap();
        let s: f64 = objective.iter().zip(mos).map(|(&x, &y)| (logistic(&beta, x) - y).powi(2)).sum();
        if s.is_finite() { s } else { f64::MAX }
    };

    let fatol = 1e-24 * n * y_scale * y_scale;
    let base = [range, 1.0 / x_scale, median(objective), 0.0, mean_y];
    let starts = [base, [-range, base[1], base[2], 0.0, mean_y], [range, 5.0 / x_scale, base[2], 0.0, mean_y]];
    let steps_for = |b: &[f64; 5]| -> [f64; 5] {
        let scale = [y_scale, 1.0 / x_scale, x_scale, y_scale / x_scale, y_scale];
        std::array::from_fn(|i| if b[i].abs() > 1e-12 { 0.1 * b[i].abs() } else { 0.1 * scale[i] })
    };

    let mut best: Option<([f64; 5], f64, bool)> = None;
    for start in starts {
        let mut x = start;
        let mut value = sse(&x);
        let mut converged = false;
        for _ in 0..20 {
            let s = nelder_mead(&sse, &x, &steps_for(&x), 4000, 1e-15, fatol);
            let improved = s.value < value * (1.0 - 1e-12);
            if s.value <= value {
                x = s.best.as_slice().try_into().unwrap();
                value = s.value;
            }
            converged = s.converged;
            if !improved && s.converged {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| value < b.1) {
            best = Some((x, value, converged));
        }
    }
    let (beta, value, converged) = best.expect("at least one start");
    Ok(LogisticFit { beta, converged, residual: value.sqrt() })
}
