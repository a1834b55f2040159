//! Numerical building blocks: kink-aware differentiation, adaptive Simpson
//! quadrature with breakpoints, bracketed golden-section maximization and
//! Gauss-Hermite nodes.

use crate::error::{Error, Result};

/// Interval and kink set on which a piecewise-smooth function is
/// differentiated.
#[derive(Debug, Clone, Copy)]
pub struct DiffDomain<'a> {
    pub lo: f64,
    pub hi: f64,
    pub kinks: &'a [f64],
}

impl<'a> DiffDomain<'a> {
    pub fn new(lo: f64, hi: f64, kinks: &'a [f64]) -> Self {
        Self { lo, hi, kinks }
    }
}

/// Base step used at `x`.
#[inline]
pub fn diff_step(x: f64) -> f64 {
    1e-4 * x.abs().max(1.0)
}

fn checked(f: &impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SurfaceEvaluation { eps: x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// One-sided difference with two-term Richardson extrapolation,
/// `2 D(h/2) - D(h)`, using only points on `side` of `x`.
pub fn one_sided_derivative(f: &impl Fn(f64) -> f64, x: f64, h: f64, side: Side) -> Result<f64> {
    let s = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let f0 = checked(f, x)?;
    let d_full = (checked(f, x + s * h)? - f0) / (s * h);
    let d_half = (checked(f, x + s * h / 2.0)? - f0) / (s * h / 2.0);
    Ok(2.0 * d_half - d_full)
}

fn is_at(x: f64, k: f64) -> bool {
    (x - k).abs() <= 1e-12 * k.abs().max(1.0)
}

/// Derivative of a piecewise-smooth function.
///
/// Central differences with step `1e-4 max(1,|x|)`; within two steps of a
/// declared kink, or where the central stencil leaves the domain, a one-sided
/// Richardson difference on the safe side is used. Exactly at a kink the
/// derivative does not exist and both one-sided values are reported.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, dom: &DiffDomain<'_>) -> Result<f64> {
    let h = diff_step(x);
    if let Some(&k) = dom.kinks.iter().find(|&&k| is_at(x, k)) {
        let left = one_sided_derivative(&f, x, h.min((x - dom.lo).max(0.0)).max(h * 1e-3), Side::Left);
        let right = one_sided_derivative(&f, x, h.min((dom.hi - x).max(0.0)).max(h * 1e-3), Side::Right);
        return Err(Error::NonDifferentiable {
            at: k,
            left: left.unwrap_or(f64::NAN),
            right: right.unwrap_or(f64::NAN),
        });
    }
    let near_kink = dom
        .kinks
        .iter()
        .filter(|&&k| (x - k).abs() < 2.0 * h)
        .min_by(|a, b| (x - **a).abs().total_cmp(&(x - **b).abs()));
    if let Some(&k) = near_kink {
        let side = if x > k { Side::Right } else { Side::Left };
        return one_sided_derivative(&f, x, h, side);
    }
    let room_left = x - dom.lo;
    let room_right = dom.hi - x;
    if room_left < h && room_right < h {
        let step = room_left.max(room_right);
        if step <= 0.0 {
            return Err(Error::SurfaceEvaluation { eps: x });
        }
        let side = if room_right >= room_left { Side::Right } else { Side::Left };
        return one_sided_derivative(&f, x, step, side);
    }
    if room_left < h {
        return one_sided_derivative(&f, x, h, Side::Right);
    }
    if room_right < h {
        return one_sided_derivative(&f, x, h, Side::Left);
    }
    Ok((checked(&f, x + h)? - checked(&f, x - h)?) / (2.0 * h))
}

/// Derivative from the right; at a kink this is the right one-sided value.
pub fn right_derivative(f: impl Fn(f64) -> f64, x: f64, dom: &DiffDomain<'_>) -> Result<f64> {
    match derivative(&f, x, dom) {
        Err(Error::NonDifferentiable { right, .. }) if right.is_finite() => Ok(right),
        other => other,
    }
}

/// Intercept at `x = 0` of the least-squares line through the points.
pub fn extrapolate_to_zero(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return my;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    my - (sxy / sxx) * mx
}

/// Adaptive Simpson quadrature settings.
#[derive(Debug, Clone, Copy)]
pub struct SimpsonConfig {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for SimpsonConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-9, max_depth: 40 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64) -> Result<Panel> {
    let m = 0.5 * (a + b);
    let fm = checked(f, m)?;
    Ok(Panel { a, b, fa, fm, fb, whole: (b - a) / 6.0 * (fa + 4.0 * fm + fb) })
}

fn refine(f: &impl Fn(f64) -> f64, p: Panel, tol: f64, depth: u32, cfg: &SimpsonConfig) -> Result<f64> {
    let m = 0.5 * (p.a + p.b);
    let left = simpson_panel(f, p.a, m, p.fa, p.fm)?;
    let right = simpson_panel(f, m, p.b, p.fm, p.fb)?;
    let delta = left.whole + right.whole - p.whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left.whole + right.whole + delta / 15.0);
    }
    if depth >= cfg.max_depth {
        return Err(Error::QuadratureFailed { lo: p.a, hi: p.b });
    }
    Ok(refine(f, left, tol / 2.0, depth + 1, cfg)? + refine(f, right, tol / 2.0, depth + 1, cfg)?)
}

/// Integrates `f` over `[lo, hi]`, splitting the interval at every breakpoint
/// strictly inside it.
///
/// Endpoint values of a piece that sit on a breakpoint are taken just inside
/// the piece, so a jump at the breakpoint does not leak into the neighbouring
/// piece.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, breakpoints: &[f64], cfg: &SimpsonConfig) -> Result<f64> {
    if hi == lo {
        return Ok(0.0);
    }
    if hi < lo {
        return integrate(f, hi, lo, breakpoints, cfg).map(|v| -v);
    }
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&k| k > lo && k < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    let pieces = (edges.len() - 1) as f64;
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let nudge = 1e-13 * (b - a).max(1e-300) + 1e-15 * a.abs().max(b.abs());
        let is_break = |x: f64| breakpoints.contains(&x);
        let fa = checked(&f, if is_break(a) { a + nudge } else { a })?;
        let fb = checked(&f, if is_break(b) { b - nudge } else { b })?;
        let panel = simpson_panel(&f, a, b, fa, fb)?;
        total += refine(&f, panel, cfg.abs_tol / pieces, 0, cfg)?;
    }
    Ok(total)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Result of a bracketed scalar maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub bracket: (f64, f64),
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`, stopping once
/// the bracket is narrower than `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<Maximum> {
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::ObjectiveEvaluation { tau: x })
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut iters = 0;
    while (b - a) > tol && iters < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        iters += 1;
    }
    let x = 0.5 * (a + b);
    Ok(Maximum { x, value: eval(x)?, bracket: (lo, hi) })
}

/// Global maximization on `[lo, hi]` without a unimodality assumption: an
/// interior grid scan brackets the best grid point, golden-section refines it.
pub fn maximize_bracketed(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid_points: usize, tol: f64) -> Result<Maximum> {
    let n = grid_points.max(1);
    let step = (hi - lo) / (n as f64 + 1.0);
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 1..=n {
        let x = lo + step * i as f64;
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::ObjectiveEvaluation { tau: x });
        }
        if v > best.1 {
            best = (i, v);
        }
    }
    let left = lo + step * (best.0 as f64 - 1.0);
    let right = (lo + step * (best.0 as f64 + 1.0)).min(hi);
    let m = golden_section_max(&f, left, right, tol)?;
    Ok(Maximum { bracket: (left, right), ..m })
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `exp(-x^2)`, found by Newton iteration on the Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E f(g)` for `g ~ N(mean, std_dev^2)` by `n`-point Gauss-Hermite.
pub fn normal_expectation(f: impl Fn(f64) -> f64, mean: f64, std_dev: f64, n: usize) -> f64 {
    let (x, w) = gauss_hermite(n);
    let norm = std::f64::consts::PI.sqrt();
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(mean + std::f64::consts::SQRT_2 * std_dev * xi)).sum::<f64>() / norm
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
