//! One-dimensional quadrature: Gauss-Legendre rules and a geometrically graded
//! composite rule for integrands with a logarithmic endpoint singularity.

use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

/// Plain Gauss-Legendre on `[a, b]` with `n` panels of 8 points.
pub fn integrate(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gl8();
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for k in 0..8 {
            acc += w[k] * f(mid + 0.5 * h * x[k]);
        }
    }
    acc * 0.5 * h
}

/// Integral over `[a, b]` of a function that may be log-singular at `a`:
/// 16-point panels `[a + L s^{k+1}, a + L s^k]` with ratio `s = 0.3`.
pub fn integrate_graded(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    const RATIO: f64 = 0.3;
    const LEVELS: usize = 36;
    let len = b - a;
    if len == 0.0 {
        return 0.0;
    }
    let (x, w) = gl16();
    let mut acc = 0.0;
    let mut hi = 1.0;
    // closer to `a` the integrand is dominated by rounding in its arguments
    let floor = 1e-13 * (a.abs() + b.abs() + len) / len;
    for level in 0..=LEVELS {
        if hi < floor {
            break;
        }
        let lo = if level == LEVELS { 0.0 } else { hi * RATIO };
        let h = (hi - lo) * len;
        let mid = a + 0.5 * (hi + lo) * len;
        let mut part = 0.0;
        for k in 0..16 {
            part += w[k] * f(mid + 0.5 * h * x[k]);
        }
        acc += 0.5 * h * part;
        hi = lo;
    }
    acc
}

/// Integral over `[a, b]` of a function log-singular at an interior or end point `s`.
pub fn integrate_split(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, s: f64) -> f64 {
    let s = s.clamp(a, b);
    let mut acc = 0.0;
    if s > a {
        acc += integrate_graded(&mut |u| f(s - (u - a)), a, a + (s - a));
    }
    if b > s {
        acc += integrate_graded(f, s, b);
    }
    acc
}
