//! Adaptive Simpson quadrature.

const PANELS: usize = 64;

/// Integrates `f` over `[a, b]` to an absolute tolerance of roughly `tol`.
///
/// The interval is first cut into 64 panels so that narrow peaks are not missed
/// by the initial three-point estimate.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    let mut fa = f(a);
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        let hi = if k + 1 == PANELS { b } else { lo + h };
        let fb = f(hi);
        let fm = f(0.5 * (lo + hi));
        let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += recurse(&f, lo, hi, fa, fm, fb, whole, tol / PANELS as f64, 50);
        fa = fb;
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_transcendentals() {
        assert!((adaptive_simpson(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        // sqrt has an unbounded derivative at 0
        let v = adaptive_simpson(f64::sqrt, 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9), 0.0);
        // a spike far narrower than the interval
        let v = adaptive_simpson(|x| (-(x - 3.0) * (x - 3.0) * 1e2).exp(), 0.0, 100.0, 1e-12);
        assert!((v - (std::f64::consts::PI / 1e2).sqrt()).abs() < 1e-10);
    }
}
