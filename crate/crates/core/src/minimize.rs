//! Derivative-free minimization over the unit box.
//!
//! Nelder–Mead with every trial point projected onto `[0, 1]^n`, used to
//! polish the best cells of a coarse grid.

#[derive(Debug, Clone, Copy)]
pub struct PolishOptions {
    /// Initial simplex edge, in box units.
    pub initial_step: f64,
    /// Stop when the simplex spread in f is below `f_rel_tol * |f|`...
    pub f_rel_tol: f64,
    /// ...and every vertex is within `x_tol` of the best one (box units).
    pub x_tol: f64,
    pub max_iterations: usize,
}

impl Default for PolishOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0 / 64.0,
            f_rel_tol: 1e-12,
            x_tol: 1e-9,
            max_iterations: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Polished {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(p: &mut [f64]) {
    for v in p.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (a - b)
    let mut out: Vec<f64> = a.iter().zip(b).map(|(&ai, &bi)| ai + t * (ai - bi)).collect();
    project(&mut out);
    out
}

pub fn nelder_mead_box<F>(f: F, start: &[f64], opts: PolishOptions) -> Polished
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    project(&mut x0);
    simplex.push(x0.clone());
    for i in 0..n {
        let mut v = x0.clone();
        // step inward when the start sits on the upper face
        v[i] = if v[i] + opts.initial_step <= 1.0 {
            v[i] + opts.initial_step
        } else {
            v[i] - opts.initial_step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[n];
        let spread = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_rel_tol * best.abs().max(1e-300) && spread <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }

        let reflected = combine(&centroid, &simplex[n], 1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = combine(&centroid, &simplex[n], 2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let c = combine(&centroid, &simplex[n], 0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = combine(&centroid, &simplex[n], -0.5);
            let fc = f(&c);
            (c, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[0].clone();
        for i in 1..=n {
            let p: Vec<f64> = simplex[i].iter().zip(&anchor).map(|(v, a)| a + 0.5 * (v - a)).collect();
            values[i] = f(&p);
            simplex[i] = p;
        }
    }

    let (idx, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex is never empty");
    Polished {
        point: simplex[idx].clone(),
        value: values[idx],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let f = |p: &[f64]| (p[0] - 0.3).powi(2) + 10.0 * (p[1] - 0.7).powi(2) + 1.0;
        let r = nelder_mead_box(f, &[0.9, 0.1], PolishOptions::default());
        assert!(r.converged);
        assert!((r.point[0] - 0.3).abs() < 1e-6);
        assert!((r.point[1] - 0.7).abs() < 1e-6);
    }

    #[test]
    fn finds_corner_minimum() {
        let f = |p: &[f64]| -p[0] + p[1] + 3.0;
        let r = nelder_mead_box(f, &[0.5, 0.5], PolishOptions::default());
        assert!((r.point[0] - 1.0).abs() < 1e-8);
        assert!(r.point[1].abs() < 1e-8);
    }

    #[test]
    fn rosenbrock_in_box() {
        let f = |p: &[f64]| {
            let (x, y) = (2.0 * p[0] - 0.5, 2.0 * p[1] - 0.5);
            (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)
        };
        let r = nelder_mead_box(f, &[0.1, 0.9], PolishOptions::default());
        assert!((r.point[0] - 0.75).abs() < 1e-4, "{:?}", r.point);
        assert!((r.point[1] - 0.75).abs() < 1e-4);
    }
}
