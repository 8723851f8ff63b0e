use std::fmt;
use std::str::FromStr;

use super::{info_gain_ranking, repeated_cv, CvParams, Dataset, EvalReport, Learner, MlError};
use crate::label::Label;

/// The four experimental label setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setup {
    /// bully, aggressor, spammer, normal.
    FourClass,
    /// Spammers dropped.
    ThreeNoSpam,
    /// Bullies and aggressors merged into `offensive`.
    ThreeOffensive,
    /// Spammers dropped, offensive vs normal.
    TwoOffensive,
}

impl Setup {
    pub const ALL: [Setup; 4] = [Setup::FourClass, Setup::ThreeNoSpam, Setup::ThreeOffensive, Setup::TwoOffensive];

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::FourClass => "four_class",
            Setup::ThreeNoSpam => "three_no_spam",
            Setup::ThreeOffensive => "three_offensive",
            Setup::TwoOffensive => "two_offensive",
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Setup::FourClass => Label::ALL.iter().map(|l| l.as_str()).collect(),
            Setup::ThreeNoSpam => vec!["bully", "aggressor", "normal"],
            Setup::ThreeOffensive => vec!["offensive", "spammer", "normal"],
            Setup::TwoOffensive => vec!["offensive", "normal"],
        }
    }

    fn map(self, raw: Label) -> Option<&'static str> {
        match (self, raw) {
            (Setup::FourClass, l) => Some(l.as_str()),
            (Setup::ThreeNoSpam | Setup::TwoOffensive, Label::Spammer) => None,
            (Setup::ThreeNoSpam, l) => Some(l.as_str()),
            (Setup::ThreeOffensive | Setup::TwoOffensive, Label::Bully | Label::Aggressor) => Some("offensive"),
            (_, l) => Some(l.as_str()),
        }
    }

    /// Relabels (and filters) a dataset carrying the four raw classes.
    pub fn apply(self, ds: &Dataset) -> Result<Dataset, MlError> {
        let raw: Vec<&str> = Label::ALL.iter().map(|l| l.as_str()).collect();
        if ds.class_names != raw {
            return Err(MlError::NotRawLabels {
                setup: self,
                found: ds.class_names.clone(),
            });
        }
        let names = self.class_names();
        let mut keep = Vec::new();
        let mut labels = Vec::new();
        for (i, &l) in ds.labels.iter().enumerate() {
            if let Some(target) = self.map(Label::ALL[l]) {
                keep.push(i);
                labels.push(names.iter().position(|n| *n == target).expect("setup maps into its own classes"));
            }
        }
        let mut out = ds.subset(&keep);
        out.labels = labels;
        out.class_names = names.iter().map(|s| s.to_string()).collect();
        Ok(out)
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setup {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self, MlError> {
        Setup::ALL
            .into_iter()
            .find(|x| x.as_str() == s.trim())
            .ok_or_else(|| MlError::UnknownSetup(s.to_string()))
    }
}

/// Applies `setup`, runs repeated cross-validation and attaches the information-gain
/// ranking (10 bins).
pub fn run_setup(ds: &Dataset, setup: Setup, learner: &dyn Learner, params: &CvParams) -> Result<EvalReport, MlError> {
    let data = setup.apply(ds)?;
    let mut report = repeated_cv(&data, learner, params)?;
    report.setup = Some(setup.to_string());
    report.feature_ranking = info_gain_ranking(&data, 10);
    Ok(report)
}
