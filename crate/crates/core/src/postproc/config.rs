use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture of the RRDB post-processor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrdbConfig {
    /// Number of residual-in-residual dense blocks in the trunk.
    pub l: usize,
    /// Trunk channel width.
    pub features: usize,
    /// Channels added by each inner dense convolution.
    pub growth: usize,
    /// Residual scaling at dense-block and RRDB level.
    pub beta: f64,
    /// Convolutions per dense block.
    pub dense_convs: usize,
    /// Dense blocks per RRDB.
    pub blocks_per_rrdb: usize,
}

fn conv_params(cin: usize, cout: usize) -> usize {
    9 * cin * cout + cout
}

impl RrdbConfig {
    /// Reference widths (64 features, growth 32).
    pub fn full(l: usize) -> Self {
        RrdbConfig {
            l,
            features: 64,
            growth: 32,
            beta: 0.2,
            dense_convs: 5,
            blocks_per_rrdb: 3,
        }
    }

    /// Desk-scale widths (32 features, growth 16).
    pub fn desk(l: usize) -> Self {
        RrdbConfig {
            features: 32,
            growth: 16,
            ..Self::full(l)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::Config("l must be at least 1".into()));
        }
        if self.features == 0 || self.growth == 0 || self.dense_convs == 0 || self.blocks_per_rrdb == 0 {
            return Err(Error::Config("widths and block counts must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }

    /// Parameters of one dense block.
    pub fn dense_block_parameters(&self) -> usize {
        let (f, g, d) = (self.features, self.growth, self.dense_convs);
        (0..d)
            .map(|i| conv_params(f + i * g, if i + 1 == d { f } else { g }))
            .sum()
    }

    pub fn rrdb_parameters(&self) -> usize {
        self.blocks_per_rrdb * self.dense_block_parameters()
    }

    /// Closed-form parameter count: head, `l` RRDBs, trunk conv, tail conv.
    pub fn parameter_count(&self) -> usize {
        let f = self.features;
        conv_params(3, f) + self.l * self.rrdb_parameters() + conv_params(f, f) + conv_params(f, 3)
    }

    /// Number of 3×3 convolutions on the longest input-to-output path.
    pub fn depth(&self) -> usize {
        3 + self.l * self.blocks_per_rrdb * self.dense_convs
    }

    /// Pixels beyond which an output sample no longer depends on the input.
    pub fn receptive_radius(&self) -> usize {
        self.depth()
    }
}
