//! Monte-Carlo and exact estimators: strategy success, branch search,
//! shifted-problem identities and the scripted replications.

mod conditions;
mod omniscient;
mod products;
mod replication;
mod shift;
mod success;

pub use conditions::{
    check_conditions, partition_mean, ConditionKind, ConditionReport, LampertiDominance, LABEL_FINITE_MEAN, LABEL_INVARIANCE,
    LABEL_KOLMOGOROV, LABEL_LAMPERTI,
};
pub use omniscient::{
    branch_exists, estimate_omniscient, estimate_omniscient_at, generation_count, OmniscientReport, DEFAULT_SEARCH_BUDGET,
    MAX_SKIP_RATE,
};
pub use products::*;
pub use replication::{
    claim2_chain, delta_cylinder, example42_battery, example43_battery, example45_battery, lambda_stagewise,
    replicate_table2, theta_stagewise, value_ordering, Claim2Report, CylinderReport, OrderingReport, StagewiseReport,
    StagewiseRow, Table2, Table2Row, ValueEvidence,
};
pub use shift::{
    conditional_power_identity_check, exact_nonzero_shift_values, shift_value_sequence, PowerBin, PowerIdentityReport,
    RecursionRow, ShiftTerm, ShiftValueSequence,
};
pub use success::{
    complementarity_check, estimate_strategy_success, horizon_ladder, roster_evidence, ComplementarityReport,
    HorizonLadder, RosterReport, StrategyEstimate,
};

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// `|observed - reference| <= tolerance`.
    Approx,
    /// `observed >= reference - tolerance`.
    AtLeast,
    /// `observed <= reference + tolerance`.
    AtMost,
    /// A boolean condition; `observed` is 1 or 0.
    Holds,
}

/// One assertion of a replication battery.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub observed: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn approx(name: impl Into<String>, observed: f64, reference: f64, tolerance: f64) -> Self {
        let pass = (observed - reference).abs() <= tolerance;
        Check { name: name.into(), relation: Relation::Approx, observed, reference, tolerance, pass }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, reference: f64, tolerance: f64) -> Self {
        let pass = observed >= reference - tolerance;
        Check { name: name.into(), relation: Relation::AtLeast, observed, reference, tolerance, pass }
    }

    pub fn at_most(name: impl Into<String>, observed: f64, reference: f64, tolerance: f64) -> Self {
        let pass = observed <= reference + tolerance;
        Check { name: name.into(), relation: Relation::AtMost, observed, reference, tolerance, pass }
    }

    pub fn holds(name: impl Into<String>, condition: bool) -> Self {
        let v = condition as u8 as f64;
        Check { name: name.into(), relation: Relation::Holds, observed: v, reference: 1.0, tolerance: 0.0, pass: condition }
    }
}

/// A named list of checks with free-form notes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Battery {
    pub name: String,
    pub samples: usize,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl Battery {
    pub fn new(name: impl Into<String>, samples: usize, checks: Vec<Check>, notes: Vec<String>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Battery { name: name.into(), samples, checks, notes, pass }
    }
}
