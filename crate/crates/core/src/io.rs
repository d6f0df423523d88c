//! JSON file formats: tables, kernels, worlds and loss tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{Alphabet, Kernel, ProbTable};
use crate::trained::LossTable;
use crate::world::{GenerativeWorld, DEFAULT_BUDGET};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisJson {
    pub name: String,
    pub symbols: Vec<String>,
}

impl AxisJson {
    fn build(&self, field: &str) -> Result<Alphabet> {
        Alphabet::new(self.name.clone(), self.symbols.clone()).map_err(|e| in_field(field, e))
    }

    fn of(a: &Alphabet) -> Self {
        Self {
            name: a.name.clone(),
            symbols: a.symbols.clone(),
        }
    }
}

/// `{axes: [{name, symbols}], values}`; values row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableJson {
    pub axes: Vec<AxisJson>,
    pub values: Vec<f64>,
}

/// `{from_axes, to_axis, values}`; one row per joint `from` state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelJson {
    pub from_axes: Vec<AxisJson>,
    pub to_axis: AxisJson,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub phi_prior: TableJson,
    pub obs_channel: KernelJson,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossFile {
    pub theta_symbols: Vec<String>,
    pub x_symbols: Vec<String>,
    pub loss_rows: Vec<Vec<f64>>,
}

fn in_field(field: &str, e: Error) -> Error {
    Error::InvalidArgument(format!("field `{field}`: {e}"))
}

impl TableJson {
    pub fn build(&self, field: &str) -> Result<ProbTable> {
        let axes = self
            .axes
            .iter()
            .map(|a| a.build(&format!("{field}.axes")))
            .collect::<Result<Vec<_>>>()?;
        ProbTable::new(axes, self.values.clone()).map_err(|e| in_field(&format!("{field}.values"), e))
    }

    pub fn of(t: &ProbTable) -> Self {
        Self {
            axes: t.axes().iter().map(AxisJson::of).collect(),
            values: t.values().to_vec(),
        }
    }
}

impl KernelJson {
    pub fn build(&self, field: &str) -> Result<Kernel> {
        let from = self
            .from_axes
            .iter()
            .map(|a| a.build(&format!("{field}.from_axes")))
            .collect::<Result<Vec<_>>>()?;
        let to = self.to_axis.build(&format!("{field}.to_axis"))?;
        Kernel::new(from, to, self.values.clone()).map_err(|e| in_field(&format!("{field}.values"), e))
    }

    pub fn of(k: &Kernel) -> Self {
        Self {
            from_axes: k.from_axes().iter().map(AxisJson::of).collect(),
            to_axis: AxisJson::of(k.to_axis()),
            values: k.values().to_vec(),
        }
    }
}

impl WorldFile {
    pub fn build(&self) -> Result<GenerativeWorld> {
        let prior = self.phi_prior.build("phi_prior")?;
        let channel = self.obs_channel.build("obs_channel")?;
        let budget = self.budget.map(u128::from).unwrap_or(DEFAULT_BUDGET);
        GenerativeWorld::with_budget(prior, channel, self.n, self.m, budget).map_err(|e| match e {
            Error::BudgetExceeded { .. } => e,
            other => in_field("world", other),
        })
    }

    pub fn of(w: &GenerativeWorld) -> Self {
        Self {
            phi_prior: TableJson::of(w.phi_prior()),
            obs_channel: KernelJson::of(w.obs_channel()),
            n: w.train_size(),
            m: w.future_size(),
            budget: (w.budget() != DEFAULT_BUDGET).then(|| w.budget() as u64),
        }
    }
}

impl LossFile {
    pub fn build(&self) -> Result<LossTable> {
        let theta = Alphabet::new("theta", self.theta_symbols.clone()).map_err(|e| in_field("theta_symbols", e))?;
        let x = Alphabet::new("x", self.x_symbols.clone()).map_err(|e| in_field("x_symbols", e))?;
        if self.loss_rows.len() != theta.size() {
            return Err(in_field(
                "loss_rows",
                Error::ShapeMismatch {
                    expected: theta.size(),
                    got: self.loss_rows.len(),
                },
            ));
        }
        if let Some((i, r)) = self.loss_rows.iter().enumerate().find(|(_, r)| r.len() != x.size()) {
            return Err(in_field(
                &format!("loss_rows[{i}]"),
                Error::ShapeMismatch {
                    expected: x.size(),
                    got: r.len(),
                },
            ));
        }
        let values = self.loss_rows.concat();
        LossTable::new(theta, x, values).map_err(|e| in_field("loss_rows", e))
    }

    pub fn of(lt: &LossTable) -> Self {
        Self {
            theta_symbols: lt.theta_axis().symbols.clone(),
            x_symbols: lt.x_axis().symbols.clone(),
            loss_rows: (0..lt.n_theta()).map(|t| lt.row(t).to_vec()).collect(),
        }
    }
}

pub fn parse_world(text: &str) -> Result<GenerativeWorld> {
    serde_json::from_str::<WorldFile>(text)?.build()
}

pub fn world_to_json(w: &GenerativeWorld) -> String {
    serde_json::to_string_pretty(&WorldFile::of(w)).expect("serializable")
}

pub fn parse_loss(text: &str) -> Result<LossTable> {
    serde_json::from_str::<LossFile>(text)?.build()
}

pub fn loss_to_json(lt: &LossTable) -> String {
    serde_json::to_string_pretty(&LossFile::of(lt)).expect("serializable")
}

pub fn parse_table(text: &str) -> Result<ProbTable> {
    serde_json::from_str::<TableJson>(text)?.build("table")
}

pub fn table_to_json(t: &ProbTable) -> String {
    serde_json::to_string_pretty(&TableJson::of(t)).expect("serializable")
}

pub fn parse_kernel(text: &str) -> Result<Kernel> {
    serde_json::from_str::<KernelJson>(text)?.build("kernel")
}

pub fn kernel_to_json(k: &Kernel) -> String {
    serde_json::to_string_pretty(&KernelJson::of(k)).expect("serializable")
}
