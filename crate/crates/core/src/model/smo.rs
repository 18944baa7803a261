//! Sequential minimal optimization for the dual
//! `min 0.5 a'Qa + p'a  s.t.  y'a = 0, 0 <= a_i <= C_i`
//! with `Q_ij = y_i y_j K(i mod n, j mod n)`. Working-set selection uses
//! second-order information.

const TAU: f64 = 1e-12;

pub(crate) struct DualProblem<'a> {
    /// Row-major `n_base x n_base` kernel matrix.
    pub kernel: &'a [f64],
    pub n_base: usize,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

impl DualProblem<'_> {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.kernel[(i % self.n_base) * self.n_base + j % self.n_base]
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.k(i, j)
    }

    fn upper(&self, a: &[f64], i: usize) -> bool {
        a[i] >= self.c[i]
    }

    fn lower(&self, a: &[f64], i: usize) -> bool {
        a[i] <= 0.0
    }

    /// Gradient `Qa + p` computed from scratch.
    pub fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut g = self.p.clone();
        for (j, &aj) in alpha.iter().enumerate() {
            if aj != 0.0 {
                for (i, gi) in g.iter_mut().enumerate().take(n) {
                    *gi += self.q(i, j) * aj;
                }
            }
        }
        g
    }

    pub fn objective(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        0.5 * alpha.iter().zip(grad).zip(&self.p).map(|((a, g), p)| a * (g + p)).sum::<f64>()
    }

    /// Largest violation `m(a) - M(a)` of the first-order optimality
    /// conditions; zero or negative at an optimum.
    pub fn violation(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::NEG_INFINITY;
        for t in 0..self.len() {
            let v = -self.y[t] * grad[t];
            let in_up = (self.y[t] > 0.0 && !self.upper(alpha, t)) || (self.y[t] < 0.0 && !self.lower(alpha, t));
            let in_low = (self.y[t] > 0.0 && !self.lower(alpha, t)) || (self.y[t] < 0.0 && !self.upper(alpha, t));
            if in_up {
                up = up.max(v);
            }
            if in_low {
                low = low.max(-v);
            }
        }
        if up == f64::NEG_INFINITY || low == f64::NEG_INFINITY {
            0.0
        } else {
            up + low
        }
    }

    fn select(&self, alpha: &[f64], g: &[f64], tol: f64) -> Option<(usize, usize)> {
        let n = self.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if self.y[t] > 0.0 {
                if !self.upper(alpha, t) && -g[t] >= gmax {
                    gmax = -g[t];
                    i_sel = Some(t);
                }
            } else if !self.lower(alpha, t) && g[t] >= gmax {
                gmax = g[t];
                i_sel = Some(t);
            }
        }
        let i = i_sel?;
        let qdi = self.k(i, i);
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for j in 0..n {
            let qij = self.q(i, j);
            let qdj = self.k(j, j);
            let (grad_diff, quad) = if self.y[j] > 0.0 {
                if self.lower(alpha, j) {
                    continue;
                }
                gmax2 = gmax2.max(g[j]);
                (gmax + g[j], qdi + qdj - 2.0 * self.y[i] * qij)
            } else {
                if self.upper(alpha, j) {
                    continue;
                }
                gmax2 = gmax2.max(-g[j]);
                (gmax - g[j], qdi + qdj + 2.0 * self.y[i] * qij)
            };
            if grad_diff > 0.0 {
                let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j_sel = Some(j);
                }
            }
        }
        if gmax + gmax2 < tol {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    fn rho(&self, alpha: &[f64], g: &[f64]) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for i in 0..self.len() {
            let yg = self.y[i] * g[i];
            if self.upper(alpha, i) {
                if self.y[i] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.lower(alpha, i) {
                if self.y[i] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum_free += yg;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }

    pub fn solve(&self, tol: f64, max_iter: usize, trace: bool) -> DualSolution {
        let n = self.len();
        let mut alpha = vec![0.0; n];
        let mut g = self.p.clone();
        let mut objective_trace = Vec::new();
        if trace {
            objective_trace.push(0.0);
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let Some((i, j)) = self.select(&alpha, &g, tol) else {
                converged = true;
                break;
            };
            iterations += 1;
            let (ci, cj) = (self.c[i], self.c[j]);
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let qij = self.q(i, j);
            let (qdi, qdj) = (self.k(i, i), self.k(j, j));
            if self.y[i] != self.y[j] {
                let quad = (qdi + qdj + 2.0 * qij).max(TAU);
                let delta = (-g[i] - g[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > ci - cj {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = ci - diff;
                    }
                } else if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = cj + diff;
                }
            } else {
                let quad = (qdi + qdj - 2.0 * qij).max(TAU);
                let delta = (g[i] - g[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > ci {
                    if alpha[i] > ci {
                        alpha[i] = ci;
                        alpha[j] = sum - ci;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > cj {
                    if alpha[j] > cj {
                        alpha[j] = cj;
                        alpha[i] = sum - cj;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for (k, gk) in g.iter_mut().enumerate() {
                *gk += self.q(i, k) * di + self.q(j, k) * dj;
            }
            if trace {
                objective_trace.push(self.objective(&alpha, &g));
            }
        }
        let rho = self.rho(&alpha, &g);
        DualSolution {
            alpha,
            rho,
            iterations,
            converged,
            objective_trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_classification_is_symmetric() {
        // linear kernel on x = -1, +1
        let k = [1.0, -1.0, -1.0, 1.0];
        let prob = DualProblem {
            kernel: &k,
            n_base: 2,
            y: vec![-1.0, 1.0],
            p: vec![-1.0, -1.0],
            c: vec![10.0, 10.0],
        };
        let sol = prob.solve(1e-6, 1000, true);
        assert!(sol.converged);
        // hard margin: w = 1, alphas 0.5 each
        assert!((sol.alpha[0] - 0.5).abs() < 1e-9 && (sol.alpha[1] - 0.5).abs() < 1e-9);
        assert!(sol.rho.abs() < 1e-9);
        assert!(sol.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
