//! Command-line overrides for [`TrainConfig`]. Every field is optional; a
//! `--config` JSON file is applied first, then the flags.

use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use skewsplat::camera::KernelMode;
use skewsplat::train::TrainConfig;

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum KernelArg {
    Skew,
    Gaussian,
}

macro_rules! train_flags {
    ($($field:ident : $ty:ty),* $(,)?) => {
        #[derive(Args, Debug, Default)]
        pub struct TrainArgs {
            /// JSON file with any subset of the training fields.
            #[arg(long)]
            pub config: Option<PathBuf>,
            /// Disable the depth (`g_z`) densification criterion.
            #[arg(long)]
            pub no_depth_criterion: bool,
            #[arg(long, value_enum)]
            pub kernel: Option<KernelArg>,
            /// Background color as three comma-separated values in [0, 1].
            #[arg(long, value_delimiter = ',', num_args = 3)]
            pub background: Option<Vec<f64>>,
            $(#[arg(long)] pub $field: Option<$ty>,)*
        }

        impl TrainArgs {
            fn apply_flags(&self, cfg: &mut TrainConfig) {
                $(if let Some(v) = self.$field { cfg.$field = v.into(); })*
            }
        }
    };
}

train_flags! {
    iterations: usize,
    lr_position: f64,
    lr_position_final: f64,
    lr_scale: f64,
    lr_rot: f64,
    lr_opacity: f64,
    lr_sh: f64,
    lr_beta: f64,
    lr_dir: f64,
    tau_uv: f64,
    tau_z: f64,
    densify_interval: usize,
    densify_start: usize,
    densify_end: usize,
    prune_alpha: f64,
    split_scale_threshold: f64,
    max_primitives: usize,
    opacity_reset_interval: usize,
    lambda_ssim: f64,
    lambda_beta_reg: f64,
    lambda_op: f64,
    opacity_grad_damping: f64,
    dilation: f64,
    log_interval: usize,
}

impl TrainArgs {
    /// `base`, then the config file, then flags, then `seed`.
    pub fn resolve(&self, base: TrainConfig, seed: u64) -> anyhow::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut merged = serde_json::to_value(&base)?;
                let patch: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let serde_json::Value::Object(patch) = patch else { anyhow::bail!("{} must hold a JSON object", path.display()) };
                for (k, v) in patch {
                    merged[k] = v;
                }
                serde_json::from_value(merged).with_context(|| format!("invalid field in {}", path.display()))?
            }
            None => base,
        };
        self.apply_flags(&mut cfg);
        if self.no_depth_criterion {
            cfg.no_depth_criterion = true;
        }
        if let Some(k) = self.kernel {
            cfg.kernel = match k {
                KernelArg::Skew => KernelMode::Skew,
                KernelArg::Gaussian => KernelMode::Gaussian,
            };
        }
        if let Some(bg) = &self.background {
            cfg.background = [bg[0], bg[1], bg[2]];
        }
        cfg.seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}
