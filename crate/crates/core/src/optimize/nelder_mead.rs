//! Nelder-Mead simplex minimizer with dimension-adaptive coefficients
//! (Gao & Han, 2012) and automatic restarts around the incumbent.

/// Result of a local minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct NelderMead {
    /// Budget of simplex iterations across all internal restarts.
    pub max_iters: usize,
    /// Converged when a rebuilt simplex improves the incumbent by less than
    /// this; each simplex runs until its value spread is below `tol / 100`.
    pub tol: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Rebuild the simplex around the incumbent at most this many times.
    pub max_rebuilds: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol: 1e-7,
            initial_step: 0.3,
            max_rebuilds: 4,
        }
    }
}

impl NelderMead {
    pub fn minimize(&self, mut f: impl FnMut(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        if n == 0 {
            return Minimum {
                x: vec![],
                value: eval(x0),
                iterations: 0,
                converged: true,
            };
        }
        let nf = n as f64;
        let alpha = 1.0;
        let beta = 1.0 + 2.0 / nf;
        let gamma = 0.75 - 1.0 / (2.0 * nf);
        let delta = 1.0 - 1.0 / nf;

        let mut best_x = x0.to_vec();
        let mut best_v = eval(x0);
        let mut iterations = 0;
        let mut converged = false;
        let mut step = self.initial_step;

        for _rebuild in 0..=self.max_rebuilds {
            if iterations >= self.max_iters {
                break;
            }
            let start_v = best_v;
            let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
            let mut values: Vec<f64> = Vec::with_capacity(n + 1);
            simplex.push(best_x.clone());
            values.push(best_v);
            for i in 0..n {
                let mut x = best_x.clone();
                let h = if x[i].abs() > 1e-12 { step * x[i].abs().max(0.1) } else { step * 0.1 };
                x[i] += h;
                values.push(eval(&x));
                simplex.push(x);
            }

            let mut local_converged = false;
            while iterations < self.max_iters {
                iterations += 1;
                let mut order: Vec<usize> = (0..=n).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                simplex = order.iter().map(|&i| simplex[i].clone()).collect();
                values = order.iter().map(|&i| values[i]).collect();

                let spread = values[n] - values[0];
                if spread.is_finite() && spread <= 1e-2 * self.tol {
                    local_converged = true;
                    break;
                }

                let mut centroid = vec![0.0; n];
                for x in &simplex[..n] {
                    for (c, xi) in centroid.iter_mut().zip(x) {
                        *c += xi / nf;
                    }
                }
                let along = |t: f64| -> Vec<f64> {
                    centroid
                        .iter()
                        .zip(&simplex[n])
                        .map(|(c, w)| c + t * (c - w))
                        .collect()
                };

                let xr = along(alpha);
                let fr = eval(&xr);
                if fr < values[0] {
                    let xe = along(alpha * beta);
                    let fe = eval(&xe);
                    if fe < fr {
                        simplex[n] = xe;
                        values[n] = fe;
                    } else {
                        simplex[n] = xr;
                        values[n] = fr;
                    }
                    continue;
                }
                if fr < values[n - 1] {
                    simplex[n] = xr;
                    values[n] = fr;
                    continue;
                }
                let (xc, fc) = if fr < values[n] {
                    let xc = along(alpha * gamma);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-gamma);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                    continue;
                }
                // shrink towards the best vertex
                let best = simplex[0].clone();
                for i in 1..=n {
                    for (xi, bi) in simplex[i].iter_mut().zip(&best) {
                        *xi = bi + delta * (*xi - bi);
                    }
                    values[i] = eval(&simplex[i]);
                }
            }

            let (i_best, &v) = values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("simplex is nonempty");
            if v <= best_v {
                best_v = v;
                best_x = simplex[i_best].clone();
            }
            if local_converged && start_v - best_v <= self.tol {
                converged = true;
                break;
            }
            step *= 0.5;
        }

        Minimum {
            x: best_x,
            value: best_v,
            iterations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5, &[0.0, 0.0]);
        assert!((m.value - 0.5).abs() < 1e-8);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] + 2.0).abs() < 1e-3);
        assert!(m.converged);
    }

    #[test]
    fn rosenbrock() {
        let nm = NelderMead {
            max_iters: 10_000,
            tol: 1e-12,
            ..Default::default()
        };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.value < 1e-10, "{m:?}");
    }

    #[test]
    fn higher_dimension_sphere() {
        let nm = NelderMead {
            max_iters: 20_000,
            ..Default::default()
        };
        let x0: Vec<f64> = (0..12).map(|i| i as f64 * 0.1 - 0.5).collect();
        let m = nm.minimize(|x| x.iter().map(|v| v * v).sum(), &x0);
        assert!(m.value < 1e-7, "{}", m.value);
    }

    #[test]
    fn nan_treated_as_worst() {
        let nm = NelderMead::default();
        let m = nm.minimize(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) }, &[1.0]);
        assert!((m.x[0] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn respects_iteration_budget() {
        let nm = NelderMead {
            max_iters: 10,
            ..Default::default()
        };
        let m = nm.minimize(|x| x.iter().map(|v| v * v).sum(), &[1.0; 6]);
        assert!(m.iterations <= 10);
        assert!(!m.converged);
    }
}
