//! Box-constrained Nelder–Mead minimizer.

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Converged once every vertex lies within this distance of the best one
    /// (max-norm, relative to `max(1, |x|)`).
    pub tol: f64,
    /// Initial simplex edge as a fraction of each coordinate's box width.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            initial_step: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Minimizes `f` starting from `x0`, clamping every trial point into `[lower, upper]`.
/// Non-finite objective values are treated as +∞.
pub fn minimize<F>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let p = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    simplex.push(start.clone());
    for i in 0..p {
        let mut v = start.clone();
        let step = opts.initial_step * (upper[i] - lower[i]);
        v[i] = if v[i] + step <= upper[i] { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=p).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = &simplex[0];
        let scale = best.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(best).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if diameter <= opts.tol * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..p)
            .map(|j| simplex[..p].iter().map(|v| v[j]).sum::<f64>() / p as f64)
            .collect();
        let worst = simplex[p].clone();

        let mut reflected = combine(&centroid, &worst, -1.0);
        clamp(&mut reflected, lower, upper);
        let fr = eval(&reflected);

        if fr < values[0] {
            let mut expanded = combine(&centroid, &worst, -2.0);
            clamp(&mut expanded, lower, upper);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[p] = expanded;
                values[p] = fe;
            } else {
                simplex[p] = reflected;
                values[p] = fr;
            }
            continue;
        }
        if fr < values[p - 1] {
            simplex[p] = reflected;
            values[p] = fr;
            continue;
        }
        let (mut contracted, outside) = if fr < values[p] {
            (combine(&centroid, &reflected, 0.5), true)
        } else {
            (combine(&centroid, &worst, 0.5), false)
        };
        clamp(&mut contracted, lower, upper);
        let fc = eval(&contracted);
        if (outside && fc <= fr) || (!outside && fc < values[p]) {
            simplex[p] = contracted;
            values[p] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=p {
            simplex[i] = combine(&best, &simplex[i], 0.5);
            values[i] = eval(&simplex[i]);
        }
    }

    let (idx, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty simplex");
    NelderMeadResult {
        x: simplex[idx].clone(),
        value: values[idx],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_iter: 5000,
            ..Default::default()
        };
        let r = minimize(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn respects_box() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2);
        let r = minimize(f, &[0.0], &[-1.0], &[1.0], &NelderMeadOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infinite_region_is_avoided() {
        let f = |x: &[f64]| if x[1] <= 0.0 { f64::INFINITY } else { (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2) };
        let r = minimize(f, &[0.0, 0.5], &[-10.0, -10.0], &[10.0, 10.0], &NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 2.0).abs() < 1e-6);
    }
}
