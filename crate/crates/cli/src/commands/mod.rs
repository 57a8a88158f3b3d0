mod fit;
mod irpls;
mod perturb;
mod simulate;

pub use fit::fit;
pub use irpls::irpls;
pub use perturb::perturb;
pub use simulate::simulate;

use serde::Serialize;

use crate::error::{CliError, CliResult};

fn to_value<T: Serialize>(value: &T) -> CliResult<serde_json::Value> {
    serde_json::to_value(value).map_err(|e| CliError::Data(e.to_string()))
}
