//! Nelder-Mead simplex minimization.
//!
//! Infeasible points are expressed by returning `+inf` from the objective;
//! the simplex then contracts away from them.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Initial edge length along each coordinate.
    pub step: Vec<f64>,
    /// Stop once every vertex is within `xtol` (max-norm) of the best one.
    pub xtol: f64,
    /// Stop once the objective spread across vertices is below `ftol`
    /// *and* the simplex is within `xtol`.
    pub ftol: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Max-norm distance of the final simplex vertices from the best vertex.
    pub diameter: f64,
    pub evals: usize,
    pub converged: bool,
}

pub fn nelder_mead<F>(mut f: F, start: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    if n == 0 {
        let value = eval(start, &mut evals);
        return NelderMeadResult { x: Vec::new(), value, diameter: 0.0, evals, converged: true };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut values: Vec<f64> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    values.push(eval(start, &mut evals));
    for i in 0..n {
        let mut v = start.to_vec();
        // Halve the step until the vertex is feasible, then give up on
        // shrinking and accept whatever the objective says.
        let mut h = opts.step[i];
        let mut fv = f64::INFINITY;
        for _ in 0..20 {
            v[i] = start[i] + h;
            fv = eval(&v, &mut evals);
            if fv.is_finite() {
                break;
            }
            h *= -0.5;
        }
        simplex.push(v);
        values.push(fv);
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut order: Vec<usize> = (0..=n).collect();
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let diameter = diameter(&simplex, best);
        let spread = values[worst] - values[best];
        if diameter < opts.xtol && (spread.abs() < opts.ftol || !spread.is_finite()) {
            converged = true;
            break;
        }
        if diameter < opts.xtol * 1e-3 {
            // Collapsed simplex with a non-finite vertex; nothing more to gain.
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }

        for k in 0..n {
            trial[k] = centroid[k] + alpha * (centroid[k] - simplex[worst][k]);
        }
        let fr = eval(&trial, &mut evals);

        if fr < values[best] {
            for k in 0..n {
                trial2[k] = centroid[k] + gamma * (trial[k] - centroid[k]);
            }
            let fe = eval(&trial2, &mut evals);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = fr;
            continue;
        }

        // Contraction, outside if the reflected point beat the worst vertex.
        let outside = fr < values[worst];
        for k in 0..n {
            trial2[k] = if outside {
                centroid[k] + rho * (trial[k] - centroid[k])
            } else {
                centroid[k] + rho * (simplex[worst][k] - centroid[k])
            };
        }
        let fc = eval(&trial2, &mut evals);
        if fc < fr.min(values[worst]) {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = fc;
            continue;
        }

        let anchor = simplex[best].clone();
        for &i in &order[1..] {
            for k in 0..n {
                simplex[i][k] = anchor[k] + sigma * (simplex[i][k] - anchor[k]);
            }
            values[i] = eval(&simplex[i], &mut evals);
        }
    }

    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let best = order[0];
    NelderMeadResult {
        x: simplex[best].clone(),
        value: values[best],
        diameter: diameter(&simplex, best),
        evals,
        converged,
    }
}

fn diameter(simplex: &[Vec<f64>], best: usize) -> f64 {
    simplex
        .iter()
        .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}
