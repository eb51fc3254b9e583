use crate::{Error, Result};

/// One convolution block: conv → batchnorm → ELU → max-pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub channels: usize,
    /// (height, width); both odd, zero-padded to keep the spatial size.
    pub kernel: (usize, usize),
    /// (frequency, time) pooling factors.
    pub pool: (usize, usize),
}

/// Network layout. Input is `(channels, mel bins, frames)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchSpec {
    pub input: (usize, usize, usize),
    pub blocks: Vec<BlockSpec>,
    pub n_outputs: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        ArchSpec::compact()
    }
}

impl ArchSpec {
    /// Five 32-channel 3×3 blocks over a 1×96×1360 log-mel input with 50
    /// sigmoid outputs.
    pub fn compact() -> Self {
        let pools = [(2, 4), (4, 4), (4, 5), (2, 4), (4, 4)];
        ArchSpec {
            input: (1, 96, 1360),
            blocks: pools
                .iter()
                .map(|&pool| BlockSpec {
                    channels: 32,
                    kernel: (3, 3),
                    pool,
                })
                .collect(),
            n_outputs: 50,
        }
    }

    /// Three 8-channel blocks over 1×96×128, used by the synthetic sweeps.
    pub fn small(n_outputs: usize) -> Self {
        ArchSpec {
            input: (1, 96, 128),
            blocks: [(4, 4), (4, 4), (2, 2)]
                .iter()
                .map(|&pool| BlockSpec {
                    channels: 8,
                    kernel: (3, 3),
                    pool,
                })
                .collect(),
            n_outputs,
        }
    }

    /// Two 4-channel blocks over 1×8×8; small enough for finite differences.
    pub fn tiny(n_outputs: usize) -> Self {
        ArchSpec {
            input: (1, 8, 8),
            blocks: vec![
                BlockSpec {
                    channels: 4,
                    kernel: (3, 3),
                    pool: (2, 2),
                };
                2
            ],
            n_outputs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Invalid("input dimensions must be positive".into()));
        }
        if self.blocks.is_empty() {
            return Err(Error::Invalid("at least one block is required".into()));
        }
        if self.n_outputs == 0 {
            return Err(Error::Invalid("n_outputs must be at least 1".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.channels == 0 || b.pool.0 == 0 || b.pool.1 == 0 {
                return Err(Error::Invalid(format!("block {i}: channels and pool sizes must be positive")));
            }
            if b.kernel.0 % 2 == 0 || b.kernel.1 % 2 == 0 {
                return Err(Error::Invalid(format!("block {i}: kernel sizes must be odd")));
            }
        }
        Ok(())
    }

    /// `(channels, height, width)` entering each block, then after the last.
    /// Ceil-mode pooling keeps every spatial size at least 1.
    pub fn shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![self.input];
        let (_, mut h, mut w) = self.input;
        for b in &self.blocks {
            h = h.div_ceil(b.pool.0);
            w = w.div_ceil(b.pool.1);
            out.push((b.channels, h, w));
        }
        out
    }

    /// Width of the representation feeding the dense layer.
    pub fn embedding_dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.channels)
    }
}
