//! Rank and linear correlation coefficients.

use crate::error::{Error, Result};

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DegenerateInput(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput("need at least two points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value".into()));
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Ranks starting at 1; tied values share the average of their positions.
pub fn mid_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson linear correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::DegenerateInput("constant sequence".into()));
    }
    Ok(pearson_unchecked(x, y))
}

/// Spearman rank-order correlation: Pearson correlation of the mid-ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::DegenerateInput("constant sequence".into()));
    }
    Ok(pearson_unchecked(&mid_ranks(x), &mid_ranks(y)))
}

/// Kendall tau-b by enumerating all pairs.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::DegenerateInput("constant sequence".into()));
    }
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let c_d = (concordant + discordant) as f64;
    let denom = ((c_d + tie_x as f64) * (c_d + tie_y as f64)).sqrt();
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

/// Root-mean-square difference.
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}
