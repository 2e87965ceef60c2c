//! Fusion quality indices.
//!
//! Mutual information and entropy are in bits. Variances and covariances use
//! the population convention. The image quality index is computed globally
//! over the whole image.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::Image;

pub const GRAY_LEVELS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),
}

fn same_dims(a: &Image, b: &Image) -> Result<(), MetricError> {
    if a.dims() == b.dims() {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch(a.dims(), b.dims()))
    }
}

/// First and second moments of one image, plus its covariance with a partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageStats {
    pub mean: f64,
    pub variance: f64,
    pub covariance: f64,
}

/// Population statistics of a pair of equally sized samples:
/// `(stats of x, stats of y)`, both carrying the shared covariance.
pub fn pair_stats(x: &[f64], y: &[f64]) -> (ImageStats, ImageStats) {
    assert_eq!(x.len(), y.len(), "samples must have equal length");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        vx += da * da;
        vy += db * db;
        cxy += da * db;
    }
    let (vx, vy, cxy) = (vx / n, vy / n, cxy / n);
    (
        ImageStats {
            mean: mx,
            variance: vx,
            covariance: cxy,
        },
        ImageStats {
            mean: my,
            variance: vy,
            covariance: cxy,
        },
    )
}

fn as_f64(img: &Image) -> Vec<f64> {
    img.pixels().iter().map(|&p| f64::from(p)).collect()
}

/// Gray-level histogram with 256 bins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; GRAY_LEVELS],
    total: u64,
}

impl Histogram {
    pub fn of(img: &Image) -> Self {
        let mut counts = [0u64; GRAY_LEVELS];
        for &p in img.pixels() {
            counts[usize::from(p)] += 1;
        }
        Self {
            counts,
            total: img.len() as u64,
        }
    }

    pub fn counts(&self) -> &[u64; GRAY_LEVELS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Joint histogram of co-located gray levels, indexed `[m * 256 + n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHistogram {
    counts: Vec<u64>,
    total: u64,
}

impl JointHistogram {
    pub fn of(m: &Image, n: &Image) -> Result<Self, MetricError> {
        same_dims(m, n)?;
        let mut counts = vec![0u64; GRAY_LEVELS * GRAY_LEVELS];
        for (&a, &b) in m.pixels().iter().zip(n.pixels()) {
            counts[usize::from(a) * GRAY_LEVELS + usize::from(b)] += 1;
        }
        Ok(Self {
            counts,
            total: m.len() as u64,
        })
    }

    pub fn count(&self, x: u8, y: u8) -> u64 {
        self.counts[usize::from(x) * GRAY_LEVELS + usize::from(y)]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn marginal_first(&self) -> [u64; GRAY_LEVELS] {
        let mut out = [0u64; GRAY_LEVELS];
        for (x, row) in self.counts.chunks_exact(GRAY_LEVELS).enumerate() {
            out[x] = row.iter().sum();
        }
        out
    }

    pub fn marginal_second(&self) -> [u64; GRAY_LEVELS] {
        let mut out = [0u64; GRAY_LEVELS];
        for row in self.counts.chunks_exact(GRAY_LEVELS) {
            for (o, c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }
}

/// Global universal image quality index
/// `4 cov(x,y) mean(x) mean(y) / ((var x + var y)(mean(x)^2 + mean(y)^2))`.
///
/// When both images are constant the structural factors are taken as 1 and
/// the index reduces to `2 mean(x) mean(y) / (mean(x)^2 + mean(y)^2)`.
pub fn image_quality_index(x: &Image, y: &Image) -> Result<f64, MetricError> {
    same_dims(x, y)?;
    iqi_values(&as_f64(x), &as_f64(y))
}

pub fn iqi_values(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    let (sx, sy) = pair_stats(x, y);
    let lum = sx.mean * sx.mean + sy.mean * sy.mean;
    if lum == 0.0 {
        return Err(MetricError::DegenerateInput("both images have zero mean"));
    }
    let var = sx.variance + sy.variance;
    if var == 0.0 {
        return Ok(2.0 * sx.mean * sy.mean / lum);
    }
    Ok(4.0 * sx.covariance * sx.mean * sy.mean / (var * lum))
}

fn plogp_ratio(c: u64, n: u64, ca: u64, cb: u64) -> f64 {
    if c == 0 {
        return 0.0;
    }
    let p = c as f64 / n as f64;
    p * ((c as f64 * n as f64) / (ca as f64 * cb as f64)).log2()
}

/// Mutual information in bits. Symmetric in its arguments bit-for-bit.
pub fn mutual_information(m: &Image, n: &Image) -> Result<f64, MetricError> {
    let joint = JointHistogram::of(m, n)?;
    Ok(mutual_information_from(&joint))
}

pub fn mutual_information_from(joint: &JointHistogram) -> f64 {
    let ma = joint.marginal_first();
    let mb = joint.marginal_second();
    let n = joint.total;
    let term = |x: usize, y: usize| plogp_ratio(joint.counts[x * GRAY_LEVELS + y], n, ma[x], mb[y]);
    // cells (x, y) and (y, x) are summed as a pair so that transposing the
    // joint histogram leaves every partial sum unchanged
    let mut total = 0.0;
    for x in 0..GRAY_LEVELS {
        total += term(x, x);
        for y in x + 1..GRAY_LEVELS {
            total += term(x, y) + term(y, x);
        }
    }
    total.max(0.0)
}

/// Shannon entropy of the gray-level histogram, in bits.
pub fn entropy(img: &Image) -> f64 {
    let h = Histogram::of(img);
    let n = h.total as f64;
    -h.counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionFactor {
    pub i_af: f64,
    pub i_bf: f64,
    pub ff: f64,
}

pub fn fusion_factor(a: &Image, b: &Image, f: &Image) -> Result<FusionFactor, MetricError> {
    let i_af = mutual_information(a, f)?;
    let i_bf = mutual_information(b, f)?;
    Ok(FusionFactor {
        i_af,
        i_bf,
        ff: i_af + i_bf,
    })
}

pub fn fusion_symmetry(i_af: f64, i_bf: f64) -> Result<f64, MetricError> {
    let sum = i_af + i_bf;
    if sum == 0.0 {
        return Err(MetricError::DegenerateInput("I_AF + I_BF is zero"));
    }
    Ok((i_af / sum - 0.5).abs())
}

pub fn fusion_index(i_af: f64, i_bf: f64) -> Result<f64, MetricError> {
    if i_bf == 0.0 {
        return Err(MetricError::DivisionByZero("I_BF is zero"));
    }
    Ok(i_af / i_bf)
}

pub fn mse(r: &Image, f: &Image) -> Result<f64, MetricError> {
    same_dims(r, f)?;
    let sum: u64 = r
        .pixels()
        .iter()
        .zip(f.pixels())
        .map(|(&a, &b)| {
            let d = u64::from(a.abs_diff(b));
            d * d
        })
        .sum();
    Ok(sum as f64 / r.len() as f64)
}

pub fn rmse(r: &Image, f: &Image) -> Result<f64, MetricError> {
    mse(r, f).map(f64::sqrt)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsnrFormula {
    /// `10 log10(L^2 / MSE)`
    #[default]
    Standard,
    /// `20 log10(L^2 / MSE)`: the power ratio taken with the amplitude factor.
    Paper,
}

impl std::str::FromStr for PsnrFormula {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "standard" => Ok(Self::Standard),
            "paper" => Ok(Self::Paper),
            other => Err(format!("unknown PSNR formula `{other}`")),
        }
    }
}

pub fn psnr_from_mse(mse: f64, peak: f64, formula: PsnrFormula) -> f64 {
    if mse == 0.0 {
        return f64::INFINITY;
    }
    let factor = match formula {
        PsnrFormula::Standard => 10.0,
        PsnrFormula::Paper => 20.0,
    };
    factor * (peak * peak / mse).log10()
}

/// PSNR in decibels; identical images give `+inf`.
pub fn psnr(r: &Image, f: &Image, peak: f64, formula: PsnrFormula) -> Result<f64, MetricError> {
    Ok(psnr_from_mse(mse(r, f)?, peak, formula))
}

pub fn correlation_coefficient(x: &Image, y: &Image) -> Result<f64, MetricError> {
    same_dims(x, y)?;
    correlation_values(&as_f64(x), &as_f64(y))
}

pub fn correlation_values(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    let (sx, sy) = pair_stats(x, y);
    if sx.variance == 0.0 || sy.variance == 0.0 {
        return Err(MetricError::DegenerateInput(
            "constant image has no correlation",
        ));
    }
    Ok((sx.covariance / (sx.variance.sqrt() * sy.variance.sqrt())).clamp(-1.0, 1.0))
}

/// Row and column frequencies `(RF, CF)`.
pub fn row_column_frequency(f: &Image) -> (f64, f64) {
    let (rows, cols) = f.dims();
    let px = f.pixels();
    let sq = |a: u8, b: u8| {
        let d = u64::from(a.abs_diff(b));
        d * d
    };
    let mut horizontal = 0u64;
    let mut vertical = 0u64;
    for r in 0..rows {
        let row = &px[r * cols..(r + 1) * cols];
        horizontal += row.windows(2).map(|w| sq(w[1], w[0])).sum::<u64>();
        if r > 0 {
            let above = &px[(r - 1) * cols..r * cols];
            vertical += row.iter().zip(above).map(|(&b, &a)| sq(b, a)).sum::<u64>();
        }
    }
    let mn = (rows * cols) as f64;
    (
        (horizontal as f64 / mn).sqrt(),
        (vertical as f64 / mn).sqrt(),
    )
}

pub fn spatial_frequency(f: &Image) -> f64 {
    let (rf, cf) = row_column_frequency(f);
    (rf * rf + cf * cf).sqrt()
}

/// Which image the reference-based indices were measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    InputA,
    Explicit,
}

/// All ten indices for one `(A, B, F)` triple.
///
/// Indices that could not be computed hold NaN and are listed in `flags`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub iqi: f64,
    /// Mutual information between input A and the fused image (same as
    /// `i_af`).
    pub mim: f64,
    pub ff: f64,
    pub fs: f64,
    pub fi: f64,
    pub rmse: f64,
    pub psnr: f64,
    pub entropy: f64,
    pub cc: f64,
    pub sf: f64,
    pub i_af: f64,
    pub i_bf: f64,
    pub reference: ReferenceChoice,
    pub psnr_formula: PsnrFormula,
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub const COLUMNS: [&'static str; 10] = [
        "IQI", "MIM", "FF", "FS", "FI", "RMSE", "PSNR", "Entropy", "CC", "SF",
    ];

    /// The ten indices in table column order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.iqi,
            self.mim,
            self.ff,
            self.fs,
            self.fi,
            self.rmse,
            self.psnr,
            self.entropy,
            self.cc,
            self.sf,
        ]
    }

    /// Every numeric field by key: the ten indices, then the two MI terms.
    pub fn fields(&self) -> [(&'static str, f64); 12] {
        [
            ("iqi", self.iqi),
            ("mim", self.mim),
            ("ff", self.ff),
            ("fs", self.fs),
            ("fi", self.fi),
            ("rmse", self.rmse),
            ("psnr", self.psnr),
            ("entropy", self.entropy),
            ("cc", self.cc),
            ("sf", self.sf),
            ("i_af", self.i_af),
            ("i_bf", self.i_bf),
        ]
    }

    /// Structured key-value document (JSON) at full precision. Infinite values
    /// are written as the strings `"inf"`/`"-inf"`, NaN as `null`.
    pub fn to_structured(&self) -> String {
        serde_json::to_string_pretty(&serde_json::Value::Object(self.json_map()))
            .expect("json value")
    }

    fn json_map(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut map = serde_json::Map::new();
        for (k, v) in self.fields() {
            map.insert(k.to_string(), json_number(v));
        }
        map.insert(
            "reference".into(),
            serde_json::to_value(self.reference).expect("enum serializes"),
        );
        map.insert(
            "psnr_formula".into(),
            serde_json::to_value(self.psnr_formula).expect("enum serializes"),
        );
        map.insert(
            "flags".into(),
            serde_json::to_value(&self.flags).expect("strings serialize"),
        );
        map
    }
}

/// Structured counterpart of [`render_table`]: `{"rows": [{"method": .., ..}]}`.
pub fn render_structured(rows: &[(&str, &MetricsReport)]) -> String {
    let rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|(label, report)| {
            let mut map = serde_json::Map::new();
            map.insert(
                "method".into(),
                serde_json::Value::String(label.to_string()),
            );
            map.extend(report.json_map());
            serde_json::Value::Object(map)
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({ "rows": rows })).expect("json value")
}

pub(crate) fn json_number(v: f64) -> serde_json::Value {
    if v.is_nan() {
        serde_json::Value::Null
    } else if v.is_infinite() {
        serde_json::Value::String(if v > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        serde_json::json!(v)
    }
}

/// Four-decimal rendering used in tables.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "n/a".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{v:.4}")
    }
}

/// Space-aligned table with one row per labelled report.
pub fn render_table(rows: &[(&str, &MetricsReport)]) -> String {
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(rows.len() + 1);
    let mut header = vec!["Method".to_string()];
    header.extend(MetricsReport::COLUMNS.iter().map(|c| c.to_string()));
    cells.push(header);
    for (label, report) in rows {
        let mut line = vec![label.to_string()];
        line.extend(report.values().iter().map(|&v| format_value(v)));
        cells.push(line);
    }
    let ncol = cells[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|c| {
            cells
                .iter()
                .map(|row| row[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in &cells {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                line.push_str(&format!("{cell:<w$}", w = widths[0]));
            } else {
                line.push_str(&format!("  {cell:>w$}", w = widths[c]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_table(&[("Fused", self)]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluateOptions {
    pub psnr_formula: PsnrFormula,
    pub peak: f64,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            psnr_formula: PsnrFormula::Standard,
            peak: 255.0,
        }
    }
}

/// Computes every index for sources `a`, `b` and fused image `f`.
///
/// All images are cropped to their common top-left window first. IQI, RMSE,
/// PSNR and CC compare `reference` (input `a` when absent) against `f`.
pub fn evaluate_all(
    a: &Image,
    b: &Image,
    f: &Image,
    reference: Option<&Image>,
    opts: EvaluateOptions,
) -> MetricsReport {
    let mut rows = a.rows().min(b.rows()).min(f.rows());
    let mut cols = a.cols().min(b.cols()).min(f.cols());
    if let Some(r) = reference {
        rows = rows.min(r.rows());
        cols = cols.min(r.cols());
    }
    let a = a.window(rows, cols);
    let b = b.window(rows, cols);
    let f = f.window(rows, cols);
    let (reference_img, choice) = match reference {
        Some(r) => (r.window(rows, cols), ReferenceChoice::Explicit),
        None => (a.clone(), ReferenceChoice::InputA),
    };

    let mut flags = Vec::new();
    let mut take = |name: &str, r: Result<f64, MetricError>| match r {
        Ok(v) => v,
        Err(e) => {
            flags.push(format!("{name}: {e}"));
            f64::NAN
        }
    };

    let ff = fusion_factor(&a, &b, &f).expect("cropped to equal dimensions");
    let iqi = take("iqi", image_quality_index(&reference_img, &f));
    let fs = take("fs", fusion_symmetry(ff.i_af, ff.i_bf));
    let fi = take("fi", fusion_index(ff.i_af, ff.i_bf));
    let mse_val = mse(&reference_img, &f).expect("cropped to equal dimensions");
    let cc = take("cc", correlation_coefficient(&reference_img, &f));

    MetricsReport {
        iqi,
        mim: ff.i_af,
        ff: ff.ff,
        fs,
        fi,
        rmse: mse_val.sqrt(),
        psnr: psnr_from_mse(mse_val, opts.peak, opts.psnr_formula),
        entropy: entropy(&f),
        cc,
        sf: spatial_frequency(&f),
        i_af: ff.i_af,
        i_bf: ff.i_bf,
        reference: choice,
        psnr_formula: opts.psnr_formula,
        flags,
    }
}
