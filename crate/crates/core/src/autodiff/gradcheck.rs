use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;

/// Magnitude below which gradient errors are measured absolutely. Without a
/// floor, coordinates whose true gradient is ~0 report round-off as huge
/// relative error.
pub const GRAD_MAGNITUDE_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// (input index, flat coordinate) of the worst relative error.
    pub worst: (usize, usize),
    pub coordinates: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Compares reverse-mode gradients of a scalar function against central
/// differences, one coordinate at a time.
///
/// `f` receives a fresh graph and the inputs registered as trainable leaves,
/// and must return a single-element var.
pub fn finite_diff_check<F>(f: F, inputs: &[Tensor], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.param(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map_or_else(|| vec![0.0; t.len()], <[f64]>::to_vec))
        .collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        coordinates: 0,
        tol,
        passed: true,
    };
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.data()[j];
            work[k].data_mut()[j] = orig + h;
            let plus = eval(&work)?;
            work[k].data_mut()[j] = orig - h;
            let minus = eval(&work)?;
            work[k].data_mut()[j] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[k][j];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(GRAD_MAGNITUDE_FLOOR);
            let rel = if rel.is_nan() { f64::INFINITY } else { rel };
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (k, j);
            }
            report.coordinates += 1;
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_is_exact() {
        // f(x) = x^T A x with symmetric A; central differences are exact up to round-off.
        let a = Tensor::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let x = Tensor::new(vec![2, 1], vec![0.7, -1.3]).unwrap();
        let report = finite_diff_check(
            |g, v| {
                let a = g.constant(a.clone());
                let ax = g.matmul(a, v[0])?;
                let xt = g.transpose(v[0])?;
                g.matmul(xt, ax)
            },
            &[x],
            1e-5,
            1e-8,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        // relu at an input of exactly zero: analytic 0, numeric 0.5.
        let x = Tensor::vector(vec![0.0, 1.0]);
        let report = finite_diff_check(
            |g, v| {
                let r = g.relu(v[0]);
                Ok(g.sum(r))
            },
            &[x],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst, (0, 0));
    }
}
