//! Fixed-rule quadratures.

/// Composite Simpson on `[a, b]`; `panels` is rounded up to an even count.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = panels.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson split at `breaks` lying strictly inside `(a, b)`, with at least
/// `min_panels` panels per piece and at least `panels_per_unit` per unit length.
/// `f(s, m)` also receives the midpoint `m` of the current piece, so an
/// integrand that jumps at a break can use the branch of that piece at both
/// of its endpoints.
pub fn simpson_split<F: Fn(f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    min_panels: usize,
    panels_per_unit: usize,
) -> f64 {
    let mut edges = Vec::with_capacity(breaks.len() + 2);
    edges.push(a);
    edges.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    edges.push(b);
    edges
        .windows(2)
        .map(|w| {
            let len = w[1] - w[0];
            let n = min_panels.max((len * panels_per_unit as f64).ceil() as usize);
            let mid = 0.5 * (w[0] + w[1]);
            simpson(|s| f(s, mid), w[0], w[1], n)
        })
        .sum()
}

/// Two-point Gauss-Legendre on `[a, b]`; exact for cubics.
pub fn gauss_legendre2<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let off = half / 3f64.sqrt();
    half * (f(mid - off) + f(mid + off))
}
