//! Classic fixed-step fourth-order Runge-Kutta.

use std::ops::{Add, Mul};

/// One RK4 step of `y' = f(t, y)`.
#[inline]
pub fn rk4_step<Y, F>(f: &mut F, t: f64, y: Y, dt: f64) -> Y
where
    Y: Copy + Add<Output = Y> + Mul<f64, Output = Y>,
    F: FnMut(f64, Y) -> Y,
{
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let k2 = f(t + half, y + k1 * half);
    let k3 = f(t + half, y + k2 * half);
    let k4 = f(t + dt, y + k3 * dt);
    y + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fourth_order() {
        let err = |dt: f64| {
            let mut y = 1.0;
            let n = (1.0 / dt).round() as usize;
            for i in 0..n {
                y = rk4_step(&mut |_t, y: f64| -y, i as f64 * dt, y, dt);
            }
            (y - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn time_dependent_rhs_exact_for_cubic() {
        // y' = 3t², y(0) = 0 → y = t³, integrated exactly by RK4
        let mut y = 0.0;
        for i in 0..10 {
            y = rk4_step(&mut |t, _y: f64| 3.0 * t * t, i as f64 * 0.1, y, 0.1);
        }
        assert!((y - 1.0).abs() < 1e-13);
    }
}
