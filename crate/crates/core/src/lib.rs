//! Modeling and design tools for a three-leg linear-rail delta stage.
//!
//! Lengths are mm, angles are radians inside the library (degrees in files and
//! reports), link deflections are µm and torques are N·mm internally.

pub mod bench;
pub mod compliance;
pub mod error;
pub mod fit;
pub mod kinematics;
pub mod optimizer;
pub mod units;
pub mod workspace;

pub use compliance::{ComplianceLaw, DeflectionResult, ForcePair, Wrench};
pub use error::{ModelError, Result};
pub use fit::{fit_compliance_law, FitReport};
pub use kinematics::{
    forward_kinematics, inverse_kinematics, jacobian, DeltaParams, JointPositions, PlatformPose,
};
pub use optimizer::{run_sweep, ParameterGrid, ScalarizationWeights, SweepResult};
pub use workspace::{ConstraintLimits, DesignScore, WorkspaceSpec};
