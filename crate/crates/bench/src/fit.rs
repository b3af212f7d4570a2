//! Least-squares curve fits with coefficient of determination.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `y = a ln(x) + b`
    Logarithmic,
    /// `y = a x + b`
    Linear,
    /// `y = a x`
    LinearThroughOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub kind: FitKind,
    pub a: f64,
    pub b: f64,
    /// `1 - SS_res / SS_tot` with the total sum of squares taken about the
    /// mean, so a poor fit through the origin can go negative.
    pub r2: f64,
}

impl Fit {
    pub fn predict(&self, x: f64) -> f64 {
        match self.kind {
            FitKind::Logarithmic => self.a * x.ln() + self.b,
            FitKind::Linear | FitKind::LinearThroughOrigin => self.a * x + self.b,
        }
    }
}

fn r_squared(xs: &[f64], ys: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - f(x)).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Ordinary least squares for `y = a x + b`. Needs two distinct `x`.
fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let (a, b) = ols(xs, ys)?;
    let r2 = r_squared(xs, ys, |x| a * x + b);
    Some(Fit { kind: FitKind::Linear, a, b, r2 })
}

pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    if xs.len() != ys.len() || xs.is_empty() {
        return None;
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return None;
    }
    let a = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx;
    let r2 = r_squared(xs, ys, |x| a * x);
    Some(Fit { kind: FitKind::LinearThroughOrigin, a, b: 0.0, r2 })
}

/// Least squares for `y = a x + b` subject to `b >= 0`.
///
/// The problem is convex, so when the free optimum has a negative intercept
/// the constrained optimum sits on the boundary `b = 0`.
pub fn fit_linear_nonneg_intercept(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    let free = fit_linear(xs, ys)?;
    if free.b >= 0.0 {
        return Some(free);
    }
    let origin = fit_through_origin(xs, ys)?;
    Some(Fit { kind: FitKind::Linear, ..origin })
}

/// Least squares for `y = a ln(x) + b`; every `x` must be positive.
pub fn fit_logarithmic(xs: &[f64], ys: &[f64]) -> Option<Fit> {
    if xs.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let (a, b) = ols(&lx, ys)?;
    let r2 = r_squared(xs, ys, |x| a * x.ln() + b);
    Some(Fit { kind: FitKind::Logarithmic, a, b, r2 })
}
