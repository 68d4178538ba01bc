//! Classical fourth-order Runge–Kutta step, shared by the coherence ODE and
//! the density-matrix propagation.

use core::ops::{Add, Mul};

/// A state that can be advanced along a derivative.
pub trait OdeState: Copy {
    type Deriv: Copy + Add<Output = Self::Deriv> + Mul<f64, Output = Self::Deriv>;

    /// `self + h·d`
    fn advance(&self, d: Self::Deriv, h: f64) -> Self;
}

impl OdeState for f64 {
    type Deriv = f64;

    fn advance(&self, d: f64, h: f64) -> f64 {
        self + h * d
    }
}

/// One RK4 step of size `h` from `(x, y)`; `f` is evaluated at `x`, `x+h/2`
/// (twice) and `x+h`.
pub fn rk4_step<Y, E, F>(x: f64, y: Y, h: f64, mut f: F) -> Result<Y, E>
where
    Y: OdeState,
    F: FnMut(f64, Y) -> Result<Y::Deriv, E>,
{
    let half = 0.5 * h;
    let k1 = f(x, y)?;
    let k2 = f(x + half, y.advance(k1, half))?;
    let k3 = f(x + half, y.advance(k2, half))?;
    let k4 = f(x + h, y.advance(k3, h))?;
    let slope = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (1.0 / 6.0);
    Ok(y.advance(slope, h))
}
