//! Derivative-free simplex minimization.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmOptions {
    pub max_iters: usize,
    /// Spread of objective values across the simplex.
    pub ftol: f64,
    /// Largest coordinate distance from the best vertex.
    pub xtol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

/// Simplex made of `x0` plus one vertex per axis offset by `steps[i]`.
pub fn axis_simplex(x0: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    debug_assert_eq!(x0.len(), steps.len());
    let mut simplex = Vec::with_capacity(x0.len() + 1);
    simplex.push(x0.to_vec());
    for (i, s) in steps.iter().enumerate() {
        let mut v = x0.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    simplex
}

fn checked<F>(f: &mut F, x: &[f64], evals: &mut usize) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    *evals += 1;
    let v = f(x)?;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!(
            "objective is {v} at parameters {x:?}"
        )));
    }
    Ok(v)
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
}

/// Minimizes `f` starting from `simplex` (`n + 1` vertices of length `n`).
pub fn minimize<F>(mut f: F, simplex: Vec<Vec<f64>>, opts: &NmOptions) -> Result<NmOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = simplex.len().saturating_sub(1);
    if n == 0 || simplex.iter().any(|v| v.len() != n) {
        return Err(Error::Shape(format!(
            "simplex needs n + 1 vertices of length n, got {} vertices",
            simplex.len()
        )));
    }
    let mut evals = 0;
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for v in simplex {
        let fv = checked(&mut f, &v, &mut evals)?;
        pts.push((v, fv));
    }
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = pts[n].1 - pts[0].1;
        let size = pts[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if spread <= opts.ftol && size <= opts.xtol {
            converged = true;
            break;
        }
        if iterations == opts.max_iters {
            break;
        }
        iterations += 1;

        let mut centroid = alloc::vec![0.0; n];
        for (v, _) in &pts[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = pts[n].0.clone();
        let (f_best, f_second, f_worst) = (pts[0].1, pts[n - 1].1, pts[n].1);

        let xr = lerp(&centroid, &worst, -REFLECT);
        let fr = checked(&mut f, &xr, &mut evals)?;
        let accepted = if fr < f_best {
            let xe = lerp(&centroid, &worst, -REFLECT * EXPAND);
            let fe = checked(&mut f, &xe, &mut evals)?;
            Some(if fe < fr { (xe, fe) } else { (xr, fr) })
        } else if fr < f_second {
            Some((xr, fr))
        } else if fr < f_worst {
            let xc = lerp(&centroid, &xr, CONTRACT);
            let fc = checked(&mut f, &xc, &mut evals)?;
            (fc <= fr).then_some((xc, fc))
        } else {
            let xc = lerp(&centroid, &worst, CONTRACT);
            let fc = checked(&mut f, &xc, &mut evals)?;
            (fc < f_worst).then_some((xc, fc))
        };
        match accepted {
            Some(p) => pts[n] = p,
            None => {
                let best = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    p.0 = lerp(&best, &p.0, SHRINK);
                    p.1 = checked(&mut f, &p.0, &mut evals)?;
                }
            }
        }
        trace.push(pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min));
    }
    let (x, fx) = pts.swap_remove(0);
    Ok(NmOutcome {
        x,
        f: fx,
        iterations,
        evaluations: evals,
        converged,
        trace,
    })
}
