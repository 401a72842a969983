//! Derivative-free scalar solvers shared by the geometric and bifurcation code.

use crate::error::{Error, Result};

/// Root of a continuous function on a sign-changing bracket, by bisection
/// interleaved with secant (regula falsi) steps. Stops when the bracket is no
/// wider than `xtol` or stops shrinking.
pub fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::NoRootInBracket(format!("f({a})={fa}, f({b})={fb}")));
    }
    let mut use_secant = true;
    for _ in 0..400 {
        let width = (b - a).abs();
        if width <= xtol {
            break;
        }
        let mid = 0.5 * (a + b);
        let mut x = mid;
        if use_secant {
            let s = b - fb * (b - a) / (fb - fa);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let margin = 0.01 * width;
            if s.is_finite() && s > lo + margin && s < hi - margin {
                x = s;
            }
        }
        if x == a || x == b {
            break;
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if !fx.is_finite() {
            return Err(Error::NoRootInBracket(format!("non-finite residual at {x}")));
        }
        let shrink_before = width;
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // fall back to plain bisection when secant steps stop halving the bracket
        use_secant = (b - a).abs() < 0.5 * shrink_before || !use_secant;
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Boundary of a predicate that is true on one end of [lo, hi] and false on the
/// other; returns the last point where the predicate equals `pred(lo)` and the
/// first where it flips, refined to floating-point resolution.
pub fn bisect_predicate<P: FnMut(f64) -> bool>(mut pred: P, lo: f64, hi: f64) -> (f64, f64) {
    let at_lo = pred(lo);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..1100 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if pred(m) == at_lo {
            a = m;
        } else {
            b = m;
        }
    }
    (a, b)
}

/// Minimum of a unimodal function on [a, b] by golden-section search.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Vertex abscissa of the parabola through three points.
pub fn quadratic_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if curv == 0.0 || !curv.is_finite() {
        return None;
    }
    Some(0.5 * (x[0] + x[1]) - d1 / (2.0 * curv))
}

/// Least-squares slope and intercept of y against x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_transcendental() {
        let r = bracketed_root(|x| x.exp() - 3.0 * x, 0.0, 1.0, 1e-15).unwrap();
        assert!((r.exp() - 3.0 * r).abs() < 1e-14);
        let r = bracketed_root(|x| (x - 1e-9).powi(3), -1.0, 2.0, 1e-18).unwrap();
        assert!((r - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn root_requires_sign_change() {
        assert!(matches!(bracketed_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::NoRootInBracket(_))));
    }

    #[test]
    fn predicate_boundary() {
        let (a, b) = bisect_predicate(|x| x < 0.3, 0.0, 1.0);
        assert!(a < 0.3 && b >= 0.3 && b - a < 1e-15);
    }

    #[test]
    fn golden_section_and_vertex() {
        let (x, _) = golden_min(|x| (x - 0.25).powi(2), -1.0, 1.0, 1e-12);
        assert!((x - 0.25).abs() < 1e-6);
        let v = quadratic_vertex([0.0, 1.0, 3.0], [1.0, 0.0, 4.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 2.0).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 0.5).abs() < 1e-14 && (c + 2.0).abs() < 1e-14);
    }
}
