//! Gauss-Legendre quadrature over the raised-cosine support, split into
//! flat and rolloff panels so the taper edges are panel boundaries.

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_{n-1}(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Appends the n-point rule mapped onto [a, b].
fn push_panel(out: &mut Vec<(f64, f64)>, a: f64, b: f64, n: usize) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for i in 0..n {
        out.push((mid + half * x[i], w[i] * half));
    }
}

/// Frequency nodes covering |nu| <= (1+alpha)/2: one flat panel plus the two
/// rolloff tapers. `scale` multiplies the per-panel orders; the caller grows
/// it with the pulse truncation span so longer grids stay resolved.
pub(crate) fn band_nodes(alpha: f64, scale: usize) -> Vec<(f64, f64)> {
    let s = scale.max(1);
    let lo = (1.0 - alpha) / 2.0;
    let hi = (1.0 + alpha) / 2.0;
    let mut out = Vec::with_capacity(256 * s);
    push_panel(&mut out, -hi, -lo, 64 * s);
    push_panel(&mut out, -lo, lo, 128 * s);
    push_panel(&mut out, lo, hi, 64 * s);
    out
}

/// Panel scale for a pulse truncated at +-span symbols.
pub(crate) fn span_scale(span: usize) -> usize {
    span.div_ceil(32).max(1)
}
