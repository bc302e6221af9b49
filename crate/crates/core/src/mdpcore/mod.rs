//! The foresight MDP: states, transitions, finite-horizon values and the
//! transition bounds checked by simulation.

mod state;

pub use state::{Digest, MdpState, DEFAULT_CONE_BUDGET};
mod value;

pub use value::{check_step5, enumerate_states, finite_horizon_value, Step5Report, Step5Row, ValueCaps, ValueSolver};
mod steps;

pub use steps::{
    check_step1, check_step4, check_step6_dominance, check_supermartingale, phi_estimate, state_distribution_phi, BinKey,
    CheckOptions, DominanceBin, DominanceIndex, MartingaleBin, StateSet, Step6Report, StepBin, StepReport,
    SupermartingaleReport,
};
