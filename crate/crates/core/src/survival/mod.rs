//! Time-to-event validation: Kaplan-Meier curves, log-rank comparison of
//! risk groups, Cox regression and the added-value likelihood ratio test.
//!
//! `event = false` means right-censored at `time`.

mod cox;
mod km;
mod logrank;

pub use cox::{
    added_value_lrt, cox_fit, predicted_risk_histograms, CoxFit, LrtResult, RiskHistograms, TIES_WARNING_FRACTION,
};
pub use km::{km_calibration_check, km_estimate, km_estimate_at_level, km_risk_at, KmCalibration, KmCurve, KmRisk};
pub use logrank::{logrank, LogrankResult, SurvivalGroup};

use crate::dataset::ValidationRecord;
use crate::{Error, Result};
use std::collections::BTreeSet;

/// Times and event flags of the records that carry a survival outcome.
/// Repeated subject ids are rejected: recurrent-event data is not supported.
pub fn survival_data(records: &[ValidationRecord]) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut seen = BTreeSet::new();
    let mut times = Vec::new();
    let mut events = Vec::new();
    for r in records {
        if let Some(s) = r.survival {
            if !seen.insert(r.subject_id.as_str()) {
                return Err(Error::invalid(format!(
                    "subject `{}` has more than one survival record; recurrent events are not supported",
                    r.subject_id
                )));
            }
            times.push(s.time);
            events.push(s.event);
        }
    }
    if times.is_empty() {
        return Err(Error::invalid("no records carry a survival outcome"));
    }
    Ok((times, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DeviceOutput, SurvivalOutcome};

    #[test]
    fn duplicate_subjects_rejected() {
        let mut a = ValidationRecord::new("s1", None, DeviceOutput::Score(0.2));
        a.survival = Some(SurvivalOutcome { time: 3.0, event: true });
        let b = a.clone();
        assert!(survival_data(&[a.clone()]).is_ok());
        assert!(survival_data(&[a, b]).is_err());
        assert!(survival_data(&[ValidationRecord::new("s2", None, DeviceOutput::Score(0.2))]).is_err());
    }
}
