//! Gauss–Legendre quadrature.

use std::sync::OnceLock;

/// Number of nodes of the fixed rule.
pub const GL_ORDER: usize = 16;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and its derivative.
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_ORDER))
}

/// 16-point Gauss–Legendre rule on [a, b].
pub fn gl16_integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gl16();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter().zip(w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>() * half
}

/// Composite 16-point rule on `panels` equal panels.
pub fn gl16_composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| gl16_integrate(f, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

/// Adaptive bisection on top of the 16-point rule.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = gl16_integrate(f, a, mid);
        let right = gl16_integrate(f, mid, b);
        let both = left + right;
        if depth == 0 || (both - whole).abs() <= tol * both.abs().max(f64::MIN_POSITIVE) {
            both
        } else {
            recurse(f, a, mid, left, tol, depth - 1) + recurse(f, mid, b, right, tol, depth - 1)
        }
    }
    let whole = gl16_integrate(f, a, b);
    recurse(f, a, b, whole, tol, 40)
}
