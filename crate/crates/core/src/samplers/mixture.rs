use serde::{Deserialize, Serialize};

use crate::diagnostics::Grid;
use crate::distributions::Distribution;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureCheck {
    pub min_reminder: f64,
    pub reminder_integral: f64,
}

/// Writes the proposal as `q = p / C + (1 - 1/C) * rem` and evaluates the
/// remainder density `rem(x) = (q(x) - p(x) / C) / (1 - 1/C)` on `grid`.
/// A valid envelope makes `rem` nonnegative with unit mass.
pub fn mixture_decomposition_check(
    p: &Distribution,
    q: &Distribution,
    c: f64,
    grid: &Grid,
) -> Result<MixtureCheck> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::InvalidC(c));
    }
    if p.dim() != grid.dim() || q.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            found: p.dim(),
        });
    }
    for d in [p, q] {
        if !d.has_density() {
            return Err(Error::UnsupportedDensity(d.name()));
        }
    }
    let inv_c = 1.0 / c;
    let rem = |x: &[f64]| {
        let pv = p.log_pdf(x).expect("density checked").exp();
        let qv = q.log_pdf(x).expect("density checked").exp();
        (qv - inv_c * pv) / (1.0 - inv_c)
    };
    let mut min_reminder = f64::INFINITY;
    grid.for_each_node(|x, _| min_reminder = min_reminder.min(rem(x)));
    Ok(MixtureCheck {
        min_reminder,
        reminder_integral: grid.integrate(rem),
    })
}
