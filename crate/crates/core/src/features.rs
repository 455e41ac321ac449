//! Feature bags, factor labels, the block-statistics extractor and
//! per-domain standardisation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::imaging::RasterImage;
use crate::math;
use crate::matrix::Matrix;
use crate::NUM_FACTORS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("a bag needs at least one instance")]
    EmptyBag,
    #[error("{instances} instances but {tags} domain tags")]
    TagCount { instances: usize, tags: usize },
    #[error("{width}x{height} raster cannot be split into a {grid}x{grid} block grid")]
    Indivisible { width: usize, height: usize, grid: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("no normalisation statistics for domain {0}")]
    MissingStats(Domain),
    #[error("bags to join disagree on {0}")]
    JoinMismatch(&'static str),
    #[error("nothing to join")]
    NothingToJoin,
    #[error("unknown {field} label token {token:?}")]
    UnknownToken { field: &'static str, token: String },
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown stream mode {0:?}")]
    UnknownStreamMode(String),
}

/// Which transform produced an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Rgb = 0,
    Dft = 1,
    Dwt = 2,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Rgb, Domain::Dft, Domain::Dwt];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(usize::from(tag)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Rgb => "rgb",
            Domain::Dft => "dft",
            Domain::Dwt => "dwt",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| FeatureError::UnknownDomain(s.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    G1,
    G2,
    G3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subtype {
    LuminalA,
    LuminalB,
    TripleNegative,
    Her2Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    N0,
    /// One or two positive nodes.
    N1To2,
    /// More than two positive nodes.
    N2Plus,
}

/// Clinical labels as recorded, before binarisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawLabels {
    pub er: bool,
    pub pr: bool,
    pub her2: bool,
    pub grade: Grade,
    pub subtype: Subtype,
    pub nodes: NodeStatus,
}

impl RawLabels {
    /// Parses the six manifest tokens: `pos|neg` ×3, `G1|G2|G3`,
    /// `LumA|LumB|TN|HER2+`, `N0|N1-2|N2+`.
    pub fn parse(tokens: [&str; 6]) -> Result<Self, FeatureError> {
        fn receptor(field: &'static str, t: &str) -> Result<bool, FeatureError> {
            match t {
                "pos" => Ok(true),
                "neg" => Ok(false),
                _ => Err(FeatureError::UnknownToken { field, token: t.into() }),
            }
        }
        let [er, pr, her2, hg, ms, aln] = tokens;
        let grade = match hg {
            "G1" => Grade::G1,
            "G2" => Grade::G2,
            "G3" => Grade::G3,
            _ => return Err(FeatureError::UnknownToken { field: "hg", token: hg.into() }),
        };
        let subtype = match ms {
            "LumA" => Subtype::LuminalA,
            "LumB" => Subtype::LuminalB,
            "TN" => Subtype::TripleNegative,
            "HER2+" => Subtype::Her2Positive,
            _ => return Err(FeatureError::UnknownToken { field: "ms", token: ms.into() }),
        };
        let nodes = match aln {
            "N0" => NodeStatus::N0,
            "N1-2" => NodeStatus::N1To2,
            "N2+" => NodeStatus::N2Plus,
            _ => return Err(FeatureError::UnknownToken { field: "aln", token: aln.into() }),
        };
        Ok(Self {
            er: receptor("er", er)?,
            pr: receptor("pr", pr)?,
            her2: receptor("her2", her2)?,
            grade,
            subtype,
            nodes,
        })
    }

    /// Tokens in manifest column order.
    pub fn tokens(&self) -> [&'static str; 6] {
        let receptor = |b: bool| if b { "pos" } else { "neg" };
        [
            receptor(self.er),
            receptor(self.pr),
            receptor(self.her2),
            match self.grade {
                Grade::G1 => "G1",
                Grade::G2 => "G2",
                Grade::G3 => "G3",
            },
            match self.subtype {
                Subtype::LuminalA => "LumA",
                Subtype::LuminalB => "LumB",
                Subtype::TripleNegative => "TN",
                Subtype::Her2Positive => "HER2+",
            },
            match self.nodes {
                NodeStatus::N0 => "N0",
                NodeStatus::N1To2 => "N1-2",
                NodeStatus::N2Plus => "N2+",
            },
        ]
    }

    /// Binary targets in (ER, PR, HER2, HG, MS, ALN) order. Grade 3 is
    /// "poorly differentiated", triple-negative is the negative subtype and
    /// any node involvement is positive.
    pub fn to_binary(&self) -> FactorLabels {
        FactorLabels([
            u8::from(self.er),
            u8::from(self.pr),
            u8::from(self.her2),
            u8::from(self.grade == Grade::G3),
            u8::from(self.subtype != Subtype::TripleNegative),
            u8::from(self.nodes != NodeStatus::N0),
        ])
    }
}

/// Six binary targets, each 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FactorLabels(pub [u8; NUM_FACTORS]);

impl FactorLabels {
    pub fn get(&self, k: usize) -> bool {
        self.0[k] != 0
    }

    pub fn as_f64(&self) -> [f64; NUM_FACTORS] {
        self.0.map(f64::from)
    }
}

/// All patch feature vectors of one slide.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBag {
    wsi_id: String,
    instances: Matrix,
    domains: Vec<Domain>,
    labels: FactorLabels,
}

impl FeatureBag {
    pub fn new(wsi_id: impl Into<String>, instances: Matrix, domains: Vec<Domain>, labels: FactorLabels) -> Result<Self, FeatureError> {
        if instances.rows() == 0 {
            return Err(FeatureError::EmptyBag);
        }
        if domains.len() != instances.rows() {
            return Err(FeatureError::TagCount { instances: instances.rows(), tags: domains.len() });
        }
        Ok(Self { wsi_id: wsi_id.into(), instances, domains, labels })
    }

    /// Bag whose instances all come from `domain`.
    pub fn single_domain(wsi_id: impl Into<String>, instances: Matrix, domain: Domain, labels: FactorLabels) -> Result<Self, FeatureError> {
        let n = instances.rows();
        Self::new(wsi_id, instances, vec![domain; n], labels)
    }

    pub fn wsi_id(&self) -> &str {
        &self.wsi_id
    }

    pub fn instances(&self) -> &Matrix {
        &self.instances
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn labels(&self) -> FactorLabels {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.instances.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.instances.cols()
    }
}

pub const DEFAULT_GRID: usize = 4;

/// Statistics emitted per block, in output order.
pub const BLOCK_STATS: usize = 5;

/// Stand-in feature extractor: splits each channel into a `grid × grid`
/// block layout and emits `(mean, std, min, max, mean square)` per block.
///
/// Output is channel-major, then blocks in row-major order, giving
/// `channels · grid² · 5` values.
pub fn baseline_extract(stack: &RasterImage, grid: usize) -> Result<Vec<f64>, FeatureError> {
    let (w, h) = (stack.width(), stack.height());
    if grid == 0 || w % grid != 0 || h % grid != 0 || w == 0 || h == 0 {
        return Err(FeatureError::Indivisible { width: w, height: h, grid });
    }
    let (bw, bh) = (w / grid, h / grid);
    let count = (bw * bh) as f64;
    let mut out = Vec::with_capacity(stack.channels() * grid * grid * BLOCK_STATS);
    for c in 0..stack.channels() {
        let plane = stack.plane(c);
        for by in 0..grid {
            for bx in 0..grid {
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for y in by * bh..(by + 1) * bh {
                    for &v in &plane[y * w + bx * bw..y * w + (bx + 1) * bw] {
                        sum += v;
                        sum_sq += v * v;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                let mean = sum / count;
                let mut dev = 0.0;
                for y in by * bh..(by + 1) * bh {
                    for &v in &plane[y * w + bx * bw..y * w + (bx + 1) * bw] {
                        dev += (v - mean) * (v - mean);
                    }
                }
                out.extend_from_slice(&[mean, math::sqrt(dev / count), lo, hi, sum_sq / count]);
            }
        }
    }
    Ok(out)
}

/// Floor applied to standard deviations before dividing.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Moments {
    /// Moments over the rows of all matrices; `None` when there are none.
    pub fn over<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Option<Self> {
        let mut count = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for row in rows {
            if count == 0 {
                mean = vec![0.0; row.len()];
                m2 = vec![0.0; row.len()];
            }
            count += 1;
            // Welford update.
            for ((x, mu), s) in row.iter().zip(mean.iter_mut()).zip(m2.iter_mut()) {
                let delta = x - *mu;
                *mu += delta / count as f64;
                *s += delta * (x - *mu);
            }
        }
        if count == 0 {
            return None;
        }
        let std = m2.iter().map(|s| math::sqrt(s / count as f64)).collect();
        Some(Self { mean, std })
    }
}

/// Standardisation statistics keyed by domain, fitted on training bags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormStats {
    per_domain: [Option<Moments>; 3],
}

impl NormStats {
    /// Fits moments separately for each domain present in `train`.
    pub fn fit(train: &[FeatureBag]) -> Self {
        let mut per_domain: [Option<Moments>; 3] = Default::default();
        for domain in Domain::ALL {
            let rows = train.iter().flat_map(|bag| {
                bag.domains
                    .iter()
                    .enumerate()
                    .filter(move |(_, &d)| d == domain)
                    .map(move |(i, _)| bag.instances.row(i))
            });
            per_domain[domain as usize] = Moments::over(rows);
        }
        Self { per_domain }
    }

    pub fn get(&self, domain: Domain) -> Option<&Moments> {
        self.per_domain[domain as usize].as_ref()
    }

    pub fn set(&mut self, domain: Domain, moments: Moments) {
        self.per_domain[domain as usize] = Some(moments);
    }

    /// `x' = (x − mean) / max(std, 1e−8)` using the stats of each instance's
    /// domain.
    pub fn apply(&self, bag: &FeatureBag) -> Result<FeatureBag, FeatureError> {
        let mut out = bag.clone();
        for (i, &domain) in bag.domains.iter().enumerate() {
            let m = self.get(domain).ok_or(FeatureError::MissingStats(domain))?;
            if m.mean.len() != bag.dim() {
                return Err(FeatureError::Dimension { expected: m.mean.len(), actual: bag.dim() });
            }
            for ((x, mu), sd) in out.instances.row_mut(i).iter_mut().zip(&m.mean).zip(&m.std) {
                *x = (*x - mu) / sd.max(STD_FLOOR);
            }
        }
        Ok(out)
    }
}

/// Normalises every bag with statistics fitted on `train` only.
pub fn normalize_features(bags: &[FeatureBag], stats: &NormStats) -> Result<Vec<FeatureBag>, FeatureError> {
    bags.iter().map(|b| stats.apply(b)).collect()
}

/// How per-domain bags of one slide are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StreamMode {
    /// Instances of all domains pooled into one bag; dimension unchanged.
    #[default]
    BagUnion,
    /// Aligned instances concatenated feature-wise; count unchanged.
    InstanceConcat,
}

impl StreamMode {
    pub fn name(self) -> &'static str {
        match self {
            StreamMode::BagUnion => "bag-union",
            StreamMode::InstanceConcat => "instance-concat",
        }
    }
}

impl FromStr for StreamMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bag-union" => Ok(StreamMode::BagUnion),
            "instance-concat" => Ok(StreamMode::InstanceConcat),
            _ => Err(FeatureError::UnknownStreamMode(s.into())),
        }
    }
}

/// Joins the per-domain bags of one slide in the given order.
///
/// Instance-concat output is tagged with the first input's domain tags.
pub fn join_streams(parts: &[FeatureBag], mode: StreamMode) -> Result<FeatureBag, FeatureError> {
    let first = parts.first().ok_or(FeatureError::NothingToJoin)?;
    for p in &parts[1..] {
        if p.wsi_id != first.wsi_id {
            return Err(FeatureError::JoinMismatch("wsi id"));
        }
        if p.labels != first.labels {
            return Err(FeatureError::JoinMismatch("labels"));
        }
    }
    match mode {
        StreamMode::BagUnion => {
            let d = first.dim();
            let mut data = Vec::new();
            let mut domains = Vec::new();
            for p in parts {
                if p.dim() != d {
                    return Err(FeatureError::Dimension { expected: d, actual: p.dim() });
                }
                data.extend_from_slice(p.instances.as_slice());
                domains.extend_from_slice(&p.domains);
            }
            let instances = Matrix::from_vec(domains.len(), d, data).expect("rows of width d");
            FeatureBag::new(first.wsi_id.clone(), instances, domains, first.labels)
        }
        StreamMode::InstanceConcat => {
            let n = first.len();
            if parts.iter().any(|p| p.len() != n) {
                return Err(FeatureError::JoinMismatch("instance count"));
            }
            let d_out: usize = parts.iter().map(FeatureBag::dim).sum();
            let mut data = Vec::with_capacity(n * d_out);
            for i in 0..n {
                for p in parts {
                    data.extend_from_slice(p.instances.row(i));
                }
            }
            let instances = Matrix::from_vec(n, d_out, data).expect("rows of width d_out");
            FeatureBag::new(first.wsi_id.clone(), instances, first.domains.clone(), first.labels)
        }
    }
}
