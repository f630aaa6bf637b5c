use nalgebra::Vector3;

/// First-order low-pass state: `x[t] = a·x[t−1] + (1 − a)·u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x_prev: Vector3<f64>,
    pub a: f64,
}

impl FilterState {
    /// Filter primed at `x0`, so the first output does not jump from the origin.
    pub fn new(x0: Vector3<f64>, a: f64) -> Self {
        assert!((0.0..1.0).contains(&a), "filter coefficient must lie in [0, 1)");
        Self { x_prev: x0, a }
    }
}

/// One filter update; returns the new state and its output.
pub fn iir_filter(fs: FilterState, u: &Vector3<f64>) -> (FilterState, Vector3<f64>) {
    let x = fs.x_prev * fs.a + u * (1.0 - fs.a);
    (FilterState { x_prev: x, a: fs.a }, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_and_first_step() {
        let u = Vector3::new(1.0, -2.0, 3.0);
        let (_, y) = iir_filter(FilterState::new(Vector3::zeros(), 0.0), &u);
        assert_eq!(y, u);
        let (_, y) = iir_filter(FilterState::new(Vector3::zeros(), 0.9), &Vector3::new(1.0, 1.0, 1.0));
        assert!((y.x - 0.1).abs() < 1e-15);
    }

    #[test]
    fn geometric_convergence() {
        let u = Vector3::new(1.0, 0.0, 0.0);
        let mut fs = FilterState::new(Vector3::zeros(), 0.9);
        let mut prev_err = 1.0;
        for _ in 0..50 {
            let (next, y) = iir_filter(fs, &u);
            let err = (u - y).norm();
            assert!((err / prev_err - 0.9).abs() < 1e-9);
            prev_err = err;
            fs = next;
        }
    }
}
