use crate::error::{check_dim, Error, Result};
use crate::info_state::InfoLayout;
use crate::linalg::{Mat, Vector};

/// What the feedback gain multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeedbackSpace {
    /// `dz_t` only.
    RawMeasurement,
    /// The depth-`q` information-state deviation.
    InformationState,
}

/// `u_t = feedforward_t + perturbation_t + K_t * deviation_t`, where the
/// deviation is taken against a reference trajectory.
#[derive(Clone, Debug)]
pub struct FeedbackPolicy {
    pub feedforward: Vec<Vector>,
    pub perturbations: Option<Vec<Vector>>,
    pub gains: Vec<Mat>,
    pub reference_measurements: Vec<Vector>,
    pub reference_controls: Vec<Vector>,
    pub space: FeedbackSpace,
    pub depth: usize,
    /// Force the deviation at `t = 0` to zero.
    pub pin_initial: bool,
}

#[derive(Clone, Debug)]
pub enum ControlPolicy {
    OpenLoop {
        controls: Vec<Vector>,
    },
    OpenLoopPlusPerturbation {
        controls: Vec<Vector>,
        perturbations: Vec<Vector>,
    },
    FeedbackAugmented(FeedbackPolicy),
}

impl ControlPolicy {
    pub fn horizon(&self) -> usize {
        match self {
            ControlPolicy::OpenLoop { controls } => controls.len(),
            ControlPolicy::OpenLoopPlusPerturbation { controls, .. } => controls.len(),
            ControlPolicy::FeedbackAugmented(p) => p.feedforward.len(),
        }
    }

    pub fn validate(&self, horizon: usize, n_u: usize) -> Result<()> {
        if self.horizon() < horizon {
            return Err(Error::DimensionMismatch {
                context: "policy horizon",
                expected: horizon,
                actual: self.horizon(),
            });
        }
        let feedforward = match self {
            ControlPolicy::OpenLoop { controls } => controls,
            ControlPolicy::OpenLoopPlusPerturbation {
                controls,
                perturbations,
            } => {
                check_dim("policy perturbations", controls.len(), perturbations.len())?;
                controls
            }
            ControlPolicy::FeedbackAugmented(p) => {
                check_dim("feedback gains", p.feedforward.len(), p.gains.len())?;
                if let Some(d) = &p.perturbations {
                    check_dim("policy perturbations", p.feedforward.len(), d.len())?;
                }
                if p.reference_measurements.len() < horizon || p.reference_controls.len() < horizon
                {
                    return Err(Error::InvalidArgument(
                        "feedback reference shorter than horizon".into(),
                    ));
                }
                if p.depth == 0 {
                    return Err(Error::InvalidArgument("feedback depth must be >= 1".into()));
                }
                &p.feedforward
            }
        };
        if let Some(u) = feedforward.first() {
            check_dim("policy control", n_u, u.len())?;
        }
        Ok(())
    }

    /// Control at time `t` given measurements `z_0..=z_t` and applied
    /// controls `u_0..u_{t-1}`.
    pub fn control(&self, t: usize, measurements: &[Vector], applied: &[Vector]) -> Vector {
        match self {
            ControlPolicy::OpenLoop { controls } => controls[t].clone(),
            ControlPolicy::OpenLoopPlusPerturbation {
                controls,
                perturbations,
            } => &controls[t] + &perturbations[t],
            ControlPolicy::FeedbackAugmented(p) => p.control(t, measurements, applied),
        }
    }
}

impl FeedbackPolicy {
    pub fn deviation(&self, t: usize, measurements: &[Vector], applied: &[Vector]) -> Vector {
        let n_z = self.reference_measurements[0].len();
        let n_u = self.feedforward[0].len();
        let depth = match self.space {
            FeedbackSpace::RawMeasurement => 1,
            FeedbackSpace::InformationState => self.depth,
        };
        let layout = InfoLayout::new(n_z, n_u, depth);
        let mut out = Vector::zeros(layout.dim());
        if t == 0 && self.pin_initial {
            return out;
        }
        for i in 0..depth {
            let Some(s) = t.checked_sub(i) else { break };
            if s == 0 && self.pin_initial {
                break;
            }
            let mut block = out.rows_mut(layout.z_offset(i), n_z);
            block.copy_from(&measurements[s]);
            block -= &self.reference_measurements[s];
        }
        for j in 0..depth - 1 {
            let Some(s) = t.checked_sub(j + 1) else { break };
            let mut block = out.rows_mut(layout.u_offset(j), n_u);
            block.copy_from(&applied[s]);
            block -= &self.reference_controls[s];
        }
        out
    }

    pub fn control(&self, t: usize, measurements: &[Vector], applied: &[Vector]) -> Vector {
        let mut u = self.feedforward[t].clone();
        if let Some(d) = &self.perturbations {
            u += &d[t];
        }
        let dev = self.deviation(t, measurements, applied);
        u += &self.gains[t] * dev;
        u
    }
}
