/// Central-difference gradient of `f` at `params`, one coordinate at a time.
pub fn finite_diff<F>(mut f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let all: Vec<usize> = (0..params.len()).collect();
    finite_diff_subset(&mut f, params, step, &all)
}

/// Central differences for the coordinates in `indices` only.
pub fn finite_diff_subset<F>(mut f: F, params: &[f64], step: f64, indices: &[usize]) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = params.to_vec();
    indices
        .iter()
        .map(|&k| {
            let orig = x[k];
            x[k] = orig + step;
            let plus = f(&x);
            x[k] = orig - step;
            let minus = f(&x);
            x[k] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// `‖a - b‖₂ / max(‖a‖₂, ‖b‖₂)`; zero when both vectors vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
