/// Outcome of a golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    /// Midpoint of the final bracket.
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
    /// False when `max_iter` ran out before the bracket shrank below `tol`.
    pub converged: bool,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimise a unimodal `f` on `[lo, hi]` by golden-section search, shrinking
/// the bracket until its width is at most `tol`. Each iteration reuses one
/// interior point and costs a single new evaluation.
pub fn golden_section_minimize<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> GoldenResult
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    let mut iter = 0;
    while b - a > tol && iter < max_iter {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evaluations += 1;
        iter += 1;
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    GoldenResult { x, fx, evaluations: evaluations + 1, converged: b - a <= tol }
}
