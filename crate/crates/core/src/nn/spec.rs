use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pooling widths after the spatial and separable blocks.
pub const POOL_SPATIAL: usize = 4;
pub const POOL_SEPARABLE: usize = 8;
/// Kernel length of the depthwise half of the separable convolution.
pub const SEPARABLE_KERNEL: usize = 16;

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

/// Architecture hyper-parameters independent of the data shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchConfig {
    /// Temporal filter count.
    pub f1: usize,
    /// Depth multiplier of the spatial depthwise convolution.
    pub depth_multiplier: usize,
    /// Separable convolution output maps.
    pub f2: usize,
    /// Temporal kernel in samples; `None` means `round(fs / 2)`.
    pub temporal_kernel: Option<usize>,
    pub dropout: f64,
    pub use_spectral_block: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            f1: 8,
            depth_multiplier: 2,
            f2: 16,
            temporal_kernel: None,
            dropout: 0.25,
            use_spectral_block: true,
        }
    }
}

/// Full network description: architecture plus input/output shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub fs: f64,
    pub n_channels: usize,
    pub n_timepoints: usize,
    pub n_classes: usize,
    pub arch: ArchConfig,
}

impl NetworkSpec {
    pub fn new(fs: f64, n_channels: usize, n_timepoints: usize, n_classes: usize) -> Self {
        NetworkSpec {
            fs,
            n_channels,
            n_timepoints,
            n_classes,
            arch: ArchConfig::default(),
        }
    }

    pub fn with_arch(mut self, arch: ArchConfig) -> Self {
        self.arch = arch;
        self
    }

    pub fn temporal_kernel(&self) -> usize {
        self.arch
            .temporal_kernel
            .unwrap_or_else(|| (self.fs / 2.0).round().max(1.0) as usize)
    }

    /// Maps after the spatial depthwise convolution.
    pub fn spatial_maps(&self) -> usize {
        self.arch.f1 * self.arch.depth_multiplier
    }

    /// Time length after the first pooling.
    pub fn t_pool1(&self) -> usize {
        self.n_timepoints / POOL_SPATIAL
    }

    /// Time length after the second pooling.
    pub fn t_pool2(&self) -> usize {
        self.t_pool1() / POOL_SEPARABLE
    }

    /// Width of the flattened feature vector feeding the classifier.
    pub fn n_features(&self) -> usize {
        if self.arch.use_spectral_block {
            self.arch.f2 * self.t_pool2()
        } else {
            self.spatial_maps() * self.t_pool1()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.arch;
        if !(self.fs > 0.0) {
            return Err(Error::InvalidArgument("fs must be positive".into()));
        }
        if self.n_channels == 0 {
            return Err(Error::InvalidArgument("network needs at least one channel".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if a.f1 == 0 || a.depth_multiplier == 0 || a.f2 == 0 || self.temporal_kernel() == 0 {
            return Err(Error::InvalidArgument(
                "filter counts and kernel length must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&a.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                a.dropout
            )));
        }
        let needed = if a.use_spectral_block {
            POOL_SPATIAL * POOL_SEPARABLE
        } else {
            POOL_SPATIAL
        };
        if self.n_timepoints < needed {
            return Err(Error::TemporalUnderflow(format!(
                "{} samples cannot pass the pooling chain (needs >= {needed})",
                self.n_timepoints
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_kernel_is_half_fs() {
        let s = NetworkSpec::new(250.0, 1, 500, 9);
        assert_eq!(s.temporal_kernel(), 125);
        assert_eq!(s.n_features(), 16 * 15);
        let off = s.clone().with_arch(ArchConfig {
            use_spectral_block: false,
            ..Default::default()
        });
        assert_eq!(off.n_features(), 16 * 125);
    }

    #[test]
    fn short_input_underflows() {
        let err = NetworkSpec::new(250.0, 1, 16, 9).validate().unwrap_err();
        assert!(err.to_string().contains("temporal dimension underflow"));
        assert!(NetworkSpec::new(250.0, 1, 32, 9).validate().is_ok());
        assert!(NetworkSpec::new(250.0, 1, 500, 1).validate().is_err());
    }
}
