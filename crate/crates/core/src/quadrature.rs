//! Gauss–Legendre quadrature on arbitrary intervals.
//!
//! Nodes and weights are computed once per rule by Newton iteration on the
//! Legendre recurrence; accuracy is at machine precision for the orders used
//! here (≤ 64). The rules serve the angular integrals of the 2D kernel
//! assembly and the nonlinearity primitives; they are also reusable by
//! oracle code in tests.

/// A Gauss–Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Build the `n`-point rule (exact for polynomials of degree 2n−1).
    pub fn legendre(n: usize) -> Self {
        assert!(n >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi-type initial guess, then Newton on P_n(x).
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_eval(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Integrate `f` over [a, b] with this rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let mid = 0.5 * (a + b);
        let rad = 0.5 * (b - a);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + rad * x);
        }
        rad * acc
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_eval(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussRule::legendre(8);
        // degree 15 is the exactness limit of the 8-point rule
        let val = rule.integrate(0.0, 1.0, |x| x.powi(15));
        assert!((val - 1.0 / 16.0).abs() < 1e-14, "got {val}");
    }

    #[test]
    fn integrates_cosine() {
        let rule = GaussRule::legendre(32);
        let val = rule.integrate(0.0, std::f64::consts::PI, f64::cos);
        assert!(val.abs() < 1e-14);
    }
}
