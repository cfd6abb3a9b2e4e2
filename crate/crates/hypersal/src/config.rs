//! Pipeline tunables and their flat `key = value` file form.
//!
//! Keys mirror the CLI flags with `_` in place of `-`. Lines starting with
//! `#` are comments. Floats are printed in shortest round-trip form, so
//! `parse(print(c)) == c`.

use std::fmt;
use std::fs;
use std::path::Path;

use hypersal_core::crf::CrfParams;
use hypersal_core::loss::{CrfLossParams, LossParams};
use hypersal_core::pseudo_label::PseudoLabelConfig;
use hypersal_core::saliency::DEFAULT_LEVELS;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Gaussian pyramid depth.
    pub levels: usize,
    pub scale: f64,
    pub tau: f64,
    /// `None` picks the default triple for the cube's band count.
    pub bands: Option<[usize; 3]>,
    pub sigma_i: f64,
    pub sigma_p: f64,
    pub sigma_i_spec: f64,
    pub sigma_p_spec: f64,
    pub k: usize,
    pub weight_falsecolor: f64,
    pub weight_spectral: f64,
    pub crf_iterations: usize,
    pub crf_w_spatial: f64,
    pub crf_w_bilateral: f64,
    pub crf_theta_gamma: f64,
    pub crf_theta_alpha: f64,
    pub crf_theta_beta: f64,
    pub crf_radius: usize,
    /// Threshold applied to each CRF marginal before intersecting.
    pub refine_tau: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let label = PseudoLabelConfig::default();
        let loss = LossParams::default();
        let crf = CrfParams::default();
        Self {
            levels: DEFAULT_LEVELS,
            scale: label.scale,
            tau: label.tau,
            bands: None,
            sigma_i: loss.falsecolor.sigma_i,
            sigma_p: loss.falsecolor.sigma_p,
            sigma_i_spec: loss.spectral.sigma_i,
            sigma_p_spec: loss.spectral.sigma_p,
            k: loss.falsecolor.k,
            weight_falsecolor: loss.falsecolor.weight,
            weight_spectral: loss.spectral.weight,
            crf_iterations: crf.iterations,
            crf_w_spatial: crf.w_spatial,
            crf_w_bilateral: crf.w_bilateral,
            crf_theta_gamma: crf.theta_gamma,
            crf_theta_alpha: crf.theta_alpha,
            crf_theta_beta: crf.theta_beta,
            crf_radius: crf.window_radius,
            refine_tau: 0.5,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bands(value: &str) -> Result<Option<[usize; 3]>> {
    if value == "auto" {
        return Ok(None);
    }
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts[..] {
        [r, g, b] => Ok(Some([
            parse_value("bands", r)?,
            parse_value("bands", g)?,
            parse_value("bands", b)?,
        ])),
        _ => Err(Error::Config(format!("`bands` must be `auto` or `r,g,b`, found `{value}`"))),
    }
}

impl PipelineConfig {
    /// Sets one key; `-` and `_` are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "levels" => self.levels = parse_value(&key, v)?,
            "scale" => self.scale = parse_value(&key, v)?,
            "tau" => self.tau = parse_value(&key, v)?,
            "bands" => self.bands = parse_bands(v)?,
            "sigma_i" => self.sigma_i = parse_value(&key, v)?,
            "sigma_p" => self.sigma_p = parse_value(&key, v)?,
            "sigma_i_spec" => self.sigma_i_spec = parse_value(&key, v)?,
            "sigma_p_spec" => self.sigma_p_spec = parse_value(&key, v)?,
            "k" => self.k = parse_value(&key, v)?,
            "weight_falsecolor" => self.weight_falsecolor = parse_value(&key, v)?,
            "weight_spectral" => self.weight_spectral = parse_value(&key, v)?,
            "crf_iterations" => self.crf_iterations = parse_value(&key, v)?,
            "crf_w_spatial" => self.crf_w_spatial = parse_value(&key, v)?,
            "crf_w_bilateral" => self.crf_w_bilateral = parse_value(&key, v)?,
            "crf_theta_gamma" => self.crf_theta_gamma = parse_value(&key, v)?,
            "crf_theta_alpha" => self.crf_theta_alpha = parse_value(&key, v)?,
            "crf_theta_beta" => self.crf_theta_beta = parse_value(&key, v)?,
            "crf_radius" => self.crf_radius = parse_value(&key, v)?,
            "refine_tau" => self.refine_tau = parse_value(&key, v)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.merge_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::Config("`levels` must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.refine_tau) {
            return Err(Error::Config("`refine_tau` must lie in [0, 1]".into()));
        }
        self.label_config().validate()?;
        self.crf_params().validate()?;
        let loss = self.loss_params();
        loss.falsecolor.validate()?;
        loss.spectral.validate()?;
        Ok(())
    }

    pub fn label_config(&self) -> PseudoLabelConfig {
        PseudoLabelConfig {
            scale: self.scale,
            tau: self.tau,
        }
    }

    pub fn crf_params(&self) -> CrfParams {
        CrfParams {
            iterations: self.crf_iterations,
            w_spatial: self.crf_w_spatial,
            w_bilateral: self.crf_w_bilateral,
            theta_gamma: self.crf_theta_gamma,
            theta_alpha: self.crf_theta_alpha,
            theta_beta: self.crf_theta_beta,
            window_radius: self.crf_radius,
        }
    }

    pub fn loss_params(&self) -> LossParams {
        LossParams {
            falsecolor: CrfLossParams {
                sigma_p: self.sigma_p,
                sigma_i: self.sigma_i,
                k: self.k,
                weight: self.weight_falsecolor,
            },
            spectral: CrfLossParams {
                sigma_p: self.sigma_p_spec,
                sigma_i: self.sigma_i_spec,
                k: self.k,
                weight: self.weight_spectral,
            },
        }
    }
}

impl fmt::Display for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bands = match self.bands {
            Some([r, g, b]) => format!("{r},{g},{b}"),
            None => "auto".into(),
        };
        writeln!(f, "levels = {}", self.levels)?;
        writeln!(f, "scale = {}", self.scale)?;
        writeln!(f, "tau = {}", self.tau)?;
        writeln!(f, "bands = {bands}")?;
        writeln!(f, "sigma_i = {}", self.sigma_i)?;
        writeln!(f, "sigma_p = {}", self.sigma_p)?;
        writeln!(f, "sigma_i_spec = {}", self.sigma_i_spec)?;
        writeln!(f, "sigma_p_spec = {}", self.sigma_p_spec)?;
        writeln!(f, "k = {}", self.k)?;
        writeln!(f, "weight_falsecolor = {}", self.weight_falsecolor)?;
        writeln!(f, "weight_spectral = {}", self.weight_spectral)?;
        writeln!(f, "crf_iterations = {}", self.crf_iterations)?;
        writeln!(f, "crf_w_spatial = {}", self.crf_w_spatial)?;
        writeln!(f, "crf_w_bilateral = {}", self.crf_w_bilateral)?;
        writeln!(f, "crf_theta_gamma = {}", self.crf_theta_gamma)?;
        writeln!(f, "crf_theta_alpha = {}", self.crf_theta_alpha)?;
        writeln!(f, "crf_theta_beta = {}", self.crf_theta_beta)?;
        writeln!(f, "crf_radius = {}", self.crf_radius)?;
        writeln!(f, "refine_tau = {}", self.refine_tau)?;
        Ok(())
    }
}
