use std::f64::consts::PI;

use crate::linalg::Vector;

/// Cart-pole with a force on the cart. State `[x, theta, x_dot, theta_dot]`,
/// `theta = 0` upright.
#[derive(Clone, Debug, PartialEq)]
pub struct Cartpole {
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Distance from the hinge to the pole's center of mass.
    pub pole_half_length: f64,
    pub gravity: f64,
    pub dt: f64,
}

impl Default for Cartpole {
    fn default() -> Self {
        Cartpole {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            gravity: 9.81,
            dt: 0.01,
        }
    }
}

impl Cartpole {
    /// Returns `(x_ddot, theta_ddot)` for a uniform pole on a frictionless cart.
    pub fn accelerations(&self, theta: f64, theta_dot: f64, force: f64) -> (f64, f64) {
        let total = self.cart_mass + self.pole_mass;
        let l = self.pole_half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + self.pole_mass * l * theta_dot * theta_dot * sin) / total;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (l * (4.0 / 3.0 - self.pole_mass * cos * cos / total));
        let x_acc = temp - self.pole_mass * l * theta_acc * cos / total;
        (x_acc, theta_acc)
    }

    /// One semi-implicit Euler step, without noise.
    pub fn drift(&self, x: &Vector, u: &Vector) -> Vector {
        let (x_acc, theta_acc) = self.accelerations(x[1], x[3], u[0]);
        let v = x[2] + self.dt * x_acc;
        let w = x[3] + self.dt * theta_acc;
        Vector::from_vec(vec![x[0] + self.dt * v, x[1] + self.dt * w, v, w])
    }

    pub fn hanging() -> Vector {
        Vector::from_vec(vec![0.0, PI, 0.0, 0.0])
    }
}
