//! Classic fixed-step fourth-order Runge-Kutta.

/// One RK4 step of `y' = f(t, y)` from `(t, y)` with step `h`.
pub fn rk4_step<F>(f: F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = y.len();
    let k1 = f(t, y);
    let mut tmp = vec![0.0; n];
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = f(t + 0.5 * h, &tmp);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &tmp);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    let k4 = f(t + h, &tmp);
    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = vec![1.0];
        let h = 1e-2;
        for k in 0..100 {
            y = rk4_step(|_, y| vec![-y[0]], k as f64 * h, &y, h);
        }
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_is_fourth_order() {
        let run = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut y = vec![1.0, 0.0];
            for k in 0..n {
                y = rk4_step(|_, y| vec![y[1], -y[0]], k as f64 * h, &y, h);
            }
            (y[0] - 1f64.cos()).abs()
        };
        let ratio = run(0.02) / run(0.01);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }
}
