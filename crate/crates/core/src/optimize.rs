//! Nelder-Mead simplex minimization with restarts.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the relative improvement of the best value over the last
    /// `2·dim` iterations falls below this.
    pub rel_tol: f64,
    pub initial_step: f64,
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 40_000,
            rel_tol: 1e-10,
            initial_step: 0.2,
            max_restarts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// One simplex descent from `x0`.
fn descend<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], step: f64, opts: &NelderMeadOptions, evals: &mut usize) -> Minimum {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs().max(1.0) } else { step };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| sanitize(f(x))).collect();
    *evals += dim + 1;

    let window = 2 * dim;
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while *evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        history.push(values[0]);
        if history.len() > window {
            let old = history[history.len() - 1 - window];
            let spread = (values[dim] - values[0]).abs();
            let scale = values[0].abs().max(1e-300);
            if (old - values[0]).abs() <= opts.rel_tol * scale && spread <= opts.rel_tol * scale.max(1e-30) {
                converged = true;
                break;
            }
            let size = simplex[1..]
                .iter()
                .flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs() / (b.abs() + 1e-12)))
                .fold(0.0f64, f64::max);
            if values[0] == 0.0 || size < 1e-14 {
                converged = true;
                break;
            }
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|x| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            (0..dim)
                .map(|j| centroid[j] + coef * (simplex[dim][j] - centroid[j]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = sanitize(f(&xr));
        *evals += 1;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = sanitize(f(&xe));
            *evals += 1;
            if fe < fr {
                simplex[dim] = xe;
                values[dim] = fe;
            } else {
                simplex[dim] = xr;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = xr;
            values[dim] = fr;
        } else {
            let (xc, fc) = if fr < values[dim] {
                let xc = along(-0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = sanitize(f(&xc));
                (xc, fc)
            };
            *evals += 1;
            if fc < values[dim].min(fr) {
                simplex[dim] = xc;
                values[dim] = fc;
            } else {
                let (head, rest) = simplex.split_at_mut(1);
                for (vertex, value) in rest.iter_mut().zip(&mut values[1..]) {
                    for (x, x0) in vertex.iter_mut().zip(&head[0]) {
                        *x = x0 + 0.5 * (*x - x0);
                    }
                    *value = sanitize(f(vertex));
                }
                *evals += dim;
            }
        }
    }
    let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
    }
}

/// Minimizes `f` from `x0`, restarting from the incumbent until a restart
/// brings no further improvement.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let mut evals = 0;
    let mut best = descend(&mut f, x0, opts.initial_step, opts, &mut evals);
    let mut total_iter = best.iterations;
    for _ in 0..opts.max_restarts {
        if evals >= opts.max_evals {
            break;
        }
        let next = descend(&mut f, &best.x, opts.initial_step * 0.5, opts, &mut evals);
        total_iter += next.iterations;
        let improved = next.value < best.value * (1.0 - opts.rel_tol) - f64::MIN_POSITIVE;
        if next.value <= best.value {
            best = Minimum { converged: next.converged, ..next };
        }
        if !improved {
            break;
        }
    }
    best.iterations = total_iter;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let m = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{m:?}");
        assert!(m.converged);
    }

    #[test]
    fn quadratic_in_four_dims() {
        let target = [0.3, -2.0, 5.0, 1e-2];
        let m = nelder_mead(
            |x| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum(),
            &[0.0; 4],
            &NelderMeadOptions::default(),
        );
        for (a, b) in m.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn nan_is_treated_as_infinite() {
        let m = nelder_mead(
            |x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) },
            &[1.0],
            &NelderMeadOptions::default(),
        );
        assert!((m.x[0] - 2.0).abs() < 1e-5);
    }
}
