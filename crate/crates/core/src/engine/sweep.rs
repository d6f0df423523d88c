use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::info::Units;
use crate::numeric::fmt12;
use crate::table::Alphabet;
use crate::world::GenerativeWorld;

use super::grid::grid_oracle;
use super::objective::IboSpec;
use super::optimize::{optimize_encoder, OptimizerOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub nu: f64,
    pub objective: f64,
    /// `I(t;x_P)` in nats.
    pub i_first: f64,
    /// `I(t;x_F)` in nats.
    pub i_second: f64,
    pub converged: bool,
    pub encoder_checksum: String,
    /// Grid-oracle optimum at the same multiplier, when requested and within budget.
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Column names; the information columns carry the unit suffix.
pub fn sweep_header(units: Units) -> String {
    let u = units.suffix();
    format!("nu,objective,I_t_xP_{u},I_t_second_{u},converged,encoder_checksum")
}

impl SweepResult {
    /// CSV with the objective and information columns in `units`.
    pub fn to_csv(&self, units: Units) -> String {
        let mut out = sweep_header(units);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt12(r.nu),
                fmt12(units.convert(r.objective)),
                fmt12(units.convert(r.i_first)),
                fmt12(units.convert(r.i_second)),
                r.converged,
                r.encoder_checksum
            ));
        }
        out
    }
}

/// One [`optimize_encoder`] run per multiplier in `nus` (strictly
/// increasing). With `oracle_resolution`, each row also carries the grid
/// optimum when the grid fits the budget.
pub fn beta_sweep(
    world: &GenerativeWorld,
    t_axis: &Alphabet,
    template: &IboSpec,
    nus: &[f64],
    opts: &OptimizerOptions,
    oracle_resolution: Option<f64>,
) -> Result<SweepResult> {
    if nus.is_empty() {
        return Err(Error::InvalidArgument("multiplier list is empty".into()));
    }
    if let Some(w) = nus.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(format!(
            "multipliers must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    let rows = nus
        .par_iter()
        .map(|&nu| -> Result<SweepRow> {
            let spec = template.with_nu(nu)?;
            let r = optimize_encoder(world, t_axis, &spec, opts)?;
            let oracle = match oracle_resolution {
                None => None,
                Some(res) => match grid_oracle(world, t_axis, &spec, res) {
                    Ok(g) => Some(g.value),
                    Err(Error::BudgetExceeded { .. }) => None,
                    Err(e) => return Err(e),
                },
            };
            Ok(SweepRow {
                nu,
                objective: r.value,
                i_first: r.info.i_past,
                i_second: r.info.i_future,
                converged: r.converged,
                encoder_checksum: r.encoder.checksum(),
                oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        let spec = IboSpec::ibp(0.0).unwrap();
        let o = OptimizerOptions::default();
        assert!(beta_sweep(&w, &t, &spec, &[1.0, 1.0], &o, None).is_err());
        assert!(beta_sweep(&w, &t, &spec, &[2.0, 1.0], &o, None).is_err());
        assert!(beta_sweep(&w, &t, &spec, &[], &o, None).is_err());
    }

    #[test]
    fn singleton_matches_optimizer() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        let spec = IboSpec::ibp(5.0).unwrap();
        let o = OptimizerOptions::default();
        let s = beta_sweep(&w, &t, &spec, &[5.0], &o, None).unwrap();
        let r = optimize_encoder(&w, &t, &spec, &o).unwrap();
        assert_eq!(s.rows.len(), 1);
        assert_eq!(s.rows[0].objective, r.value);
        assert_eq!(s.rows[0].encoder_checksum, r.encoder.checksum());
    }

    #[test]
    fn csv_shape() {
        let w = GenerativeWorld::model_a();
        let t = Alphabet::indexed("t", 2).unwrap();
        let spec = IboSpec::ibp(0.0).unwrap();
        let s = beta_sweep(&w, &t, &spec, &[0.0, 1.0], &OptimizerOptions::default(), None).unwrap();
        let csv = s.to_csv(Units::Nats);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "nu,objective,I_t_xP_nats,I_t_second_nats,converged,encoder_checksum");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].split(',').count(), 6);
    }
}
