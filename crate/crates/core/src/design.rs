//! Design rows: intercept, linear terms and truncated-power spline columns,
//! plus the layout of random-effect blocks.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Truncated power basis (x − κ_k)₊^degree with equally spaced interior knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    knots: Vec<f64>,
    degree: u32,
    lo: f64,
    hi: f64,
}

pub fn make_basis(x_lo: f64, x_hi: f64, k: usize, degree: u32) -> Result<SplineBasis> {
    if !(x_lo < x_hi) || !x_lo.is_finite() || !x_hi.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid basis range ({x_lo}, {x_hi})")));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("spline basis needs K ≥ 1".into()));
    }
    if degree == 0 {
        return Err(Error::InvalidParameter("spline degree must be positive".into()));
    }
    let knots = (1..=k)
        .map(|j| x_lo + (x_hi - x_lo) * j as f64 / (k + 1) as f64)
        .collect();
    Ok(SplineBasis {
        knots,
        degree,
        lo: x_lo,
        hi: x_hi,
    })
}

impl SplineBasis {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Basis values at `x`; `name` labels range errors.
    pub fn eval(&self, x: f64, name: &str) -> Result<Vec<f64>> {
        let slack = 1e-12 * (self.hi - self.lo);
        if !(x >= self.lo - slack && x <= self.hi + slack) {
            return Err(Error::Range {
                name: name.to_string(),
                value: x,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self
            .knots
            .iter()
            .map(|&k| (x - k).max(0.0).powi(self.degree as i32))
            .collect())
    }
}

/// Fixed-effect count p and random-effect block sizes K_1..K_R.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub p: usize,
    pub blocks: Vec<usize>,
}

impl BlockLayout {
    pub fn new(p: usize, blocks: Vec<usize>) -> Result<Self> {
        if blocks.contains(&0) {
            return Err(Error::InvalidParameter("empty random-effect block".into()));
        }
        Ok(BlockLayout { p, blocks })
    }

    pub fn fixed(p: usize) -> Self {
        BlockLayout { p, blocks: Vec::new() }
    }

    /// Design width P = p + ΣK_r.
    pub fn total(&self) -> usize {
        self.p + self.blocks.iter().sum::<usize>()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Coefficient indices of block r.
    pub fn block_range(&self, r: usize) -> Range<usize> {
        let start = self.p + self.blocks[..r].iter().sum::<usize>();
        start..start + self.blocks[r]
    }

    pub fn block_of(&self, index: usize) -> Option<usize> {
        (0..self.blocks.len()).find(|&r| self.block_range(r).contains(&index))
    }
}

/// [1, linear values, basis evaluations for each nonlinear value].
pub fn design_row(bases: &[SplineBasis], linear: &[f64], nonlinear: &[f64]) -> Result<Vec<f64>> {
    check_len("nonlinear predictors", bases.len(), nonlinear.len())?;
    let mut row = Vec::with_capacity(1 + linear.len() + bases.iter().map(SplineBasis::len).sum::<usize>());
    row.push(1.0);
    row.extend_from_slice(linear);
    for (j, (b, &x)) in bases.iter().zip(nonlinear).enumerate() {
        row.extend(b.eval(x, &format!("nonlinear predictor {j}"))?);
    }
    Ok(row)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Linear,
    Nonlinear,
    /// Integer group label 1..=levels entering as a random intercept.
    Group,
}

/// One predictor column as declared in the run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub name: String,
    pub effect: Effect,
    /// Basis size for nonlinear effects.
    #[serde(default, rename = "K", alias = "k")]
    pub k: Option<usize>,
    #[serde(default)]
    pub degree: Option<u32>,
    /// Fixed mapping range for a nonlinear predictor instead of the warm-up min/max.
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    /// Number of levels for group effects.
    #[serde(default)]
    pub levels: Option<usize>,
}

impl PredictorSpec {
    pub fn linear(name: &str) -> Self {
        PredictorSpec {
            name: name.into(),
            effect: Effect::Linear,
            k: None,
            degree: None,
            range: None,
            levels: None,
        }
    }

    pub fn nonlinear(name: &str, k: usize) -> Self {
        PredictorSpec {
            effect: Effect::Nonlinear,
            k: Some(k),
            ..Self::linear(name)
        }
    }

    pub fn group(name: &str, levels: usize) -> Self {
        PredictorSpec {
            effect: Effect::Group,
            levels: Some(levels),
            ..Self::linear(name)
        }
    }
}

/// Maps raw predictor values to design rows.
///
/// Row order: intercept, linear predictors as given, each nonlinear predictor
/// mapped to [0,1], then one spline block per nonlinear predictor and one
/// indicator block per group predictor, in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDesign {
    predictors: Vec<PredictorSpec>,
    /// (lo, hi) used to map each nonlinear predictor to the unit interval.
    scales: Vec<(f64, f64)>,
    bases: Vec<SplineBasis>,
    layout: BlockLayout,
}

impl ModelDesign {
    /// Builds the design, taking nonlinear ranges from `warm` rows (predictor
    /// values in declaration order) unless fixed by `range`.
    pub fn fit(predictors: &[PredictorSpec], warm: &[Vec<f64>]) -> Result<Self> {
        let mut scales = Vec::new();
        let mut bases = Vec::new();
        let mut n_linear = 0;
        let mut blocks_nl = Vec::new();
        let mut blocks_group = Vec::new();
        for (j, spec) in predictors.iter().enumerate() {
            match spec.effect {
                Effect::Linear => n_linear += 1,
                Effect::Nonlinear => {
                    let k = spec.k.ok_or_else(|| {
                        Error::Config(format!("nonlinear predictor `{}` needs K", spec.name))
                    })?;
                    let (lo, hi) = match spec.range {
                        Some([lo, hi]) => (lo, hi),
                        None => {
                            let vals = warm.iter().map(|r| r[j]);
                            let lo = vals.clone().fold(f64::INFINITY, f64::min);
                            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
                            if !(lo < hi) {
                                return Err(Error::Config(format!(
                                    "warm-up values of `{}` do not span a range",
                                    spec.name
                                )));
                            }
                            (lo, hi)
                        }
                    };
                    scales.push((lo, hi));
                    bases.push(make_basis(0.0, 1.0, k, spec.degree.unwrap_or(1))?);
                    blocks_nl.push(k);
                }
                Effect::Group => {
                    let levels = spec.levels.filter(|&l| l > 0).ok_or_else(|| {
                        Error::Config(format!("group predictor `{}` needs levels", spec.name))
                    })?;
                    blocks_group.push(levels);
                }
            }
        }
        blocks_nl.extend(blocks_group);
        let layout = BlockLayout::new(1 + n_linear + scales.len(), blocks_nl)?;
        Ok(ModelDesign {
            predictors: predictors.to_vec(),
            scales,
            bases,
            layout,
        })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn predictors(&self) -> &[PredictorSpec] {
        &self.predictors
    }

    pub fn scales(&self) -> &[(f64, f64)] {
        &self.scales
    }

    pub fn row(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_len("predictor values", self.predictors.len(), values.len())?;
        let mut linear = Vec::new();
        let mut scaled = Vec::new();
        let mut groups = Vec::new();
        for (spec, &v) in self.predictors.iter().zip(values) {
            match spec.effect {
                Effect::Linear => linear.push(v),
                Effect::Nonlinear => {
                    let (lo, hi) = self.scales[scaled.len()];
                    let s = (v - lo) / (hi - lo);
                    if !(-1e-12..=1.0 + 1e-12).contains(&s) {
                        return Err(Error::Range {
                            name: spec.name.clone(),
                            value: v,
                            lo,
                            hi,
                        });
                    }
                    scaled.push(s.clamp(0.0, 1.0));
                }
                Effect::Group => {
                    let levels = spec.levels.unwrap_or(0);
                    if v.fract() != 0.0 || v < 1.0 || v > levels as f64 {
                        return Err(Error::Range {
                            name: spec.name.clone(),
                            value: v,
                            lo: 1.0,
                            hi: levels as f64,
                        });
                    }
                    let mut ind = vec![0.0; levels];
                    ind[v as usize - 1] = 1.0;
                    groups.push(ind);
                }
            }
        }
        linear.extend_from_slice(&scaled);
        let mut row = Vec::with_capacity(self.layout.total());
        row.push(1.0);
        row.extend_from_slice(&linear);
        let nl_names = self
            .predictors
            .iter()
            .filter(|s| s.effect == Effect::Nonlinear)
            .map(|s| s.name.as_str());
        for ((b, &x), name) in self.bases.iter().zip(&scaled).zip(nl_names) {
            row.extend(b.eval(x, name)?);
        }
        for g in groups {
            row.extend(g);
        }
        Ok(row)
    }

    /// Labels of the P coefficient rows.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut names = vec!["intercept".to_string()];
        let by = |e: Effect| self.predictors.iter().filter(move |s| s.effect == e);
        names.extend(by(Effect::Linear).map(|s| s.name.clone()));
        names.extend(by(Effect::Nonlinear).map(|s| s.name.clone()));
        for s in by(Effect::Nonlinear) {
            names.extend((1..=s.k.unwrap_or(0)).map(|k| format!("{}.u{k}", s.name)));
        }
        for s in by(Effect::Group) {
            names.extend((1..=s.levels.unwrap_or(0)).map(|k| format!("{}.u{k}", s.name)));
        }
        names
    }

    /// Labels of the R random-effect blocks.
    pub fn block_names(&self) -> Vec<String> {
        let by = |e: Effect| self.predictors.iter().filter(move |s| s.effect == e);
        by(Effect::Nonlinear)
            .chain(by(Effect::Group))
            .map(|s| s.name.clone())
            .collect()
    }
}
