//! JSON dump of one channel realization, used for regression fixtures.
//!
//! Matrices are stored as `{rows, cols, re, im}` with `re`/`im` in
//! column-major order.

use serde::{Deserialize, Serialize};

use super::harness::TrialContext;
use crate::cascade_sparse::CascadeRepresentation;
use crate::channel_model::{ChannelStatistics, PathComponent};
use crate::linalg::{CMatrix, CVector, C64};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_vector(v: &CVector) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            re: v.iter().map(|z| z.re).collect(),
            im: v.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDump {
    pub trial: usize,
    pub seed: u64,
    pub statistics: ChannelStatistics,
    pub paths_g: Vec<PathComponent>,
    pub paths_hr: Vec<PathComponent>,
    pub g: MatrixJson,
    pub h_r: MatrixJson,
    pub h_cascade: MatrixJson,
    /// Nonzero entries of `vec(Λ)` for on-grid draws.
    pub lambda_support: Option<Vec<usize>>,
    pub lambda_values: Option<MatrixJson>,
}

/// The channel that trial `trial` of this configuration would use.
pub fn dump_channel(ctx: &TrialContext, trial: usize) -> Result<ChannelDump> {
    let ch = ctx.draw_channel(trial)?;
    let (support, values) = match &ch.coefficients {
        Some(c) => {
            let rep = CascadeRepresentation::from_coefficients(c, &ctx.basis.merge)?;
            let x = rep.x();
            let support = rep.support();
            let vals = CVector::from_iterator(support.len(), support.iter().map(|&j| x[j]));
            (Some(support), Some(MatrixJson::from_vector(&vals)))
        }
        None => (None, None),
    };
    Ok(ChannelDump {
        trial,
        seed: ctx.channel_seed(trial),
        statistics: ctx.config.channel,
        paths_g: ch.paths_g,
        paths_hr: ch.paths_hr,
        g: MatrixJson::from_matrix(&ch.g),
        h_r: MatrixJson::from_vector(&ch.h_r),
        h_cascade: MatrixJson::from_matrix(&ch.h_cascade),
        lambda_support: support,
        lambda_values: values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::preset;

    #[test]
    fn round_trip_on_grid() {
        let mut cfg = preset("paper").unwrap();
        cfg.channel = cfg.channel.on_grid();
        let ctx = TrialContext::new(cfg).unwrap();
        let dump = dump_channel(&ctx, 3).unwrap();
        let text = serde_json::to_string(&dump).unwrap();
        let back: ChannelDump = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dump);
        let h = back.h_cascade.to_matrix();
        assert_eq!(h, ctx.draw_channel(3).unwrap().h_cascade);
        let support = back.lambda_support.unwrap();
        assert!(!support.is_empty() && support.len() <= 9);
    }

    #[test]
    fn off_grid_has_no_support() {
        let ctx = TrialContext::new(preset("paper").unwrap()).unwrap();
        let dump = dump_channel(&ctx, 0).unwrap();
        assert!(dump.lambda_support.is_none());
        assert_eq!((dump.g.rows, dump.g.cols), (64, 16));
    }
}
