use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trained::Feasibility;
use crate::world::InfoReport;

/// The objectives of the bottleneck family, each of the form `I1 - nu * I2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IboKind {
    /// min `I(t;x_P) - beta I(t;x_F)`
    Ibp,
    /// max `I(t;x_F) - lambda I(t;x_P)`
    Pibp,
    /// min `I(t;x_P|x_F) - beta I(t;x_P)`
    Epibp,
    /// max `I(theta;x_P|x_F) - beta I(theta;x_P)`, `beta = 1 + lambda`, with `L <= eps`
    Trained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    /// Sign that turns the objective into a quantity to minimize.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Min => 1.0,
            Direction::Max => -1.0,
        }
    }

    /// `true` when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Min => a < b,
            Direction::Max => a > b,
        }
    }

    /// How much worse `value` is than `reference` (negative when better).
    pub fn shortfall(self, value: f64, reference: f64) -> f64 {
        self.sign() * (value - reference)
    }
}

impl IboKind {
    pub fn direction(self) -> Direction {
        match self {
            IboKind::Ibp | IboKind::Epibp => Direction::Min,
            IboKind::Pibp | IboKind::Trained => Direction::Max,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IboKind::Ibp => "IBP",
            IboKind::Pibp => "PIBP",
            IboKind::Epibp => "EPIBP",
            IboKind::Trained => "TRAINED",
        }
    }
}

/// One member of the objective family: kind, multiplier and, for trained
/// models, the empirical-loss feasibility constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct IboSpec {
    kind: IboKind,
    nu: f64,
    feasibility: Option<Feasibility>,
}

impl IboSpec {
    pub fn new(kind: IboKind, nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "multiplier must be finite and >= 0, got {nu}"
            )));
        }
        if kind == IboKind::Trained && nu < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "TRAINED multiplier is beta = 1 + lambda >= 1, got {nu}"
            )));
        }
        Ok(Self {
            kind,
            nu,
            feasibility: None,
        })
    }

    pub fn ibp(beta: f64) -> Result<Self> {
        Self::new(IboKind::Ibp, beta)
    }

    pub fn pibp(lambda: f64) -> Result<Self> {
        Self::new(IboKind::Pibp, lambda)
    }

    pub fn epibp(beta: f64) -> Result<Self> {
        Self::new(IboKind::Epibp, beta)
    }

    /// Trained-model objective for regularization `lambda` (`beta = 1 + lambda`).
    pub fn trained(lambda: f64, feasibility: Feasibility) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        let mut s = Self::new(IboKind::Trained, 1.0 + lambda)?;
        s.feasibility = Some(feasibility);
        Ok(s)
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        let mut s = Self::new(self.kind, nu)?;
        s.feasibility = self.feasibility.clone();
        Ok(s)
    }

    pub fn kind(&self) -> IboKind {
        self.kind
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn direction(&self) -> Direction {
        self.kind.direction()
    }

    pub fn feasibility(&self) -> Option<&Feasibility> {
        self.feasibility.as_ref()
    }

    /// `I1 - nu I2` from `I(t;x_P)`, `I(t;x_F)` and `I(t;x_P|x_F)` in nats.
    pub fn value(&self, i_past: f64, i_future: f64, i_past_given_future: f64) -> f64 {
        match self.kind {
            IboKind::Ibp => i_past - self.nu * i_future,
            IboKind::Pibp => i_future - self.nu * i_past,
            IboKind::Epibp | IboKind::Trained => i_past_given_future - self.nu * i_past,
        }
    }
}

/// Evaluates the objective on an exact report.
pub fn evaluate_ibo(spec: &IboSpec, report: &InfoReport) -> Result<f64> {
    let fields = [
        report.i_t_xp,
        report.i_t_xf,
        report.i_t_xp_given_xf,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "report contains infinite information values".into(),
        ));
    }
    Ok(spec.value(
        report.i_t_xp.nats(),
        report.i_t_xf.nats(),
        report.i_t_xp_given_xf.nats(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::InfoValue;

    fn report(p: f64, f: f64) -> InfoReport {
        let v = |x| InfoValue::from_nats(x).unwrap();
        InfoReport {
            i_t_xp: v(p),
            i_t_xf: v(f),
            i_t_xp_given_xf: v(p - f),
            i_t_xpxf: v(p),
            h_xp: v(1.0),
        }
    }

    #[test]
    fn table_rows() {
        let r = report(0.5, 0.3);
        assert_eq!(evaluate_ibo(&IboSpec::ibp(0.0).unwrap(), &r).unwrap(), 0.5);
        let v = evaluate_ibo(&IboSpec::pibp(2.0).unwrap(), &r).unwrap();
        assert!((v + 0.7).abs() < 1e-15);
        let e = evaluate_ibo(&IboSpec::epibp(1.0).unwrap(), &r).unwrap();
        assert!((e + 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_multipliers() {
        assert!(IboSpec::ibp(-1.0).is_err());
        assert!(IboSpec::new(IboKind::Trained, 0.5).is_err());
        assert!(IboSpec::pibp(f64::NAN).is_err());
    }

    #[test]
    fn infinite_report_rejected() {
        let mut r = report(0.5, 0.3);
        r.i_t_xf = InfoValue::INFINITE;
        assert!(evaluate_ibo(&IboSpec::ibp(1.0).unwrap(), &r).is_err());
    }

    #[test]
    fn directions_follow_the_table() {
        assert_eq!(IboKind::Ibp.direction(), Direction::Min);
        assert_eq!(IboKind::Pibp.direction(), Direction::Max);
        assert_eq!(IboKind::Epibp.direction(), Direction::Min);
        assert_eq!(IboKind::Trained.direction(), Direction::Max);
        assert!(Direction::Min.shortfall(1.0, 2.0) < 0.0);
        assert!(Direction::Max.shortfall(1.0, 2.0) > 0.0);
    }
}
