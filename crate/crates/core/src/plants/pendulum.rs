use std::f64::consts::PI;

use crate::linalg::Vector;

/// Torque-actuated pendulum. State `[theta, theta_dot]` with `theta = 0`
/// upright and `theta = pi` hanging.
#[derive(Clone, Debug, PartialEq)]
pub struct Pendulum {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    /// Viscous joint friction, torque per rad/s.
    pub damping: f64,
    pub dt: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Pendulum {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            damping: 0.0,
            dt: 0.01,
        }
    }
}

impl Pendulum {
    pub fn angular_acceleration(&self, theta: f64, omega: f64, torque: f64) -> f64 {
        let inertia = self.mass * self.length * self.length;
        self.gravity / self.length * theta.sin() + (torque - self.damping * omega) / inertia
    }

    /// One semi-implicit Euler step, without noise.
    pub fn drift(&self, x: &Vector, u: &Vector) -> Vector {
        let (theta, omega) = (x[0], x[1]);
        let omega_next = omega + self.dt * self.angular_acceleration(theta, omega, u[0]);
        Vector::from_vec(vec![theta + self.dt * omega_next, omega_next])
    }

    /// Kinetic plus potential energy, potential measured from the pivot.
    pub fn energy(&self, x: &Vector) -> f64 {
        let inertia = self.mass * self.length * self.length;
        0.5 * inertia * x[1] * x[1] + self.mass * self.gravity * self.length * x[0].cos()
    }

    pub fn hanging() -> Vector {
        Vector::from_vec(vec![PI, 0.0])
    }
}
