//! JSON scenario files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::bundle::{Block, BundleSpec};
use crate::destab::DestabConfig;
use crate::error::{Error, Result};
use crate::flow::FlowControls;
use crate::geometry::TorusGeometry;
use crate::{io, presets};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    #[serde(default = "one")]
    pub n: usize,
    /// One period per torus factor; square unit-scale factors when absent.
    #[serde(default)]
    pub periods: Option<Vec<f64>>,
    pub grid: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BundleBlock {
    pub preset: String,
    /// Checked against the built bundle when given.
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default)]
    pub degrees: Option<Vec<i64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub amplitude: Option<f64>,
    /// Binary field files replacing the preset's `a`, one per `dz̄_j`,
    /// relative to the scenario file.
    #[serde(default)]
    pub a_files: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AnalysisBlock {
    #[serde(flatten)]
    pub destab: DestabConfig,
    /// Curvature concentration radius and threshold (`n = 2` only).
    pub concentration_radius: f64,
    pub concentration_eps: f64,
    /// The σ values used by `check uy`.
    pub uy_sigmas: Vec<f64>,
    pub uy_fields: usize,
    pub membership_sections: usize,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            destab: DestabConfig::default(),
            concentration_radius: 0.5,
            concentration_eps: 1.0,
            uy_sigmas: (1..=10).map(|k| k as f64 / 10.0).collect(),
            uy_fields: 1000,
            membership_sections: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SeriesMode {
    Exact,
    Float,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FrobeniusBlock {
    /// Problem file, relative to the scenario file.
    pub problem: PathBuf,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default = "default_mode")]
    pub mode: SeriesMode,
}

fn default_degree() -> u32 {
    8
}

fn default_mode() -> SeriesMode {
    SeriesMode::Exact
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub bundle: Option<BundleBlock>,
    #[serde(default)]
    pub flow: FlowControls,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub frobenius: Option<FrobeniusBlock>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// Keys whose absence is reported by name, before serde fills defaults.
const REQUIRED: &[&str] = &["geometry", "geometry.grid"];
const REQUIRED_IN_BUNDLE: &[&str] = &["bundle.preset"];

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn lookup<'a>(v: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(v, |cur, k| cur.get(k))
}

impl Scenario {
    pub fn from_str(text: &str) -> Result<(Self, String)> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Scenario {
            key: format!("line {} column {}", e.line(), e.column()),
            msg: e.to_string(),
        })?;
        if !value.is_object() {
            return Err(Error::Scenario {
                key: "<root>".into(),
                msg: "scenario must be a JSON object".into(),
            });
        }
        let mut required = REQUIRED.to_vec();
        if value.get("bundle").is_some() {
            required.extend_from_slice(REQUIRED_IN_BUNDLE);
        }
        for key in required {
            if lookup(&value, key).is_none() {
                return Err(Error::Scenario {
                    key: key.into(),
                    msg: "required key is missing".into(),
                });
            }
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.to_string();
            if let Some(field) = msg.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
            let last = path.rsplit('.').next().unwrap_or("");
            let key = match line_of(text, last) {
                Some(l) if !last.is_empty() && last != "?" => format!("{path} (line {l})"),
                _ => path,
            };
            Error::Scenario { key, msg }
        })?;
        sc.validate()?;
        Ok((sc, hash_text(text)))
    }

    /// Reads and validates a scenario, resolving relative paths against its
    /// directory. Returns the scenario and the SHA-256 of the file bytes.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (mut sc, hash) = Self::from_str(&text)?;
        sc.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok((sc, hash))
    }

    /// Makes the file references relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        if let Some(files) = self.bundle.as_mut().and_then(|b| b.a_files.as_mut()) {
            for f in files.iter_mut() {
                *f = base.join(&*f);
            }
        }
        if let Some(fb) = self.frobenius.as_mut() {
            fb.problem = base.join(&fb.problem);
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Scenario { key: key.into(), msg });
        let g = &self.geometry;
        if !(1..=2).contains(&g.n) {
            return bad("geometry.n", format!("n must be 1 or 2, got {}", g.n));
        }
        if let Some(p) = &g.periods {
            if p.len() != g.n || p.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad("geometry.periods", format!("need {} positive periods", g.n));
            }
        }
        if let Some(b) = &self.bundle {
            if !presets::PRESETS.contains(&b.preset.as_str()) {
                return bad(
                    "bundle.preset",
                    format!("unknown preset `{}`; available: {}", b.preset, presets::PRESETS.join(", ")),
                );
            }
            if let Some(a) = b.amplitude {
                if !(a.is_finite() && a >= 0.0) {
                    return bad("bundle.amplitude", "amplitude must be nonnegative".into());
                }
            }
            if let Some(files) = &b.a_files {
                if files.len() != g.n {
                    return bad("bundle.a_files", format!("need one file per variable ({})", g.n));
                }
                if b.degrees.is_none() {
                    return bad("bundle.a_files", "a_files need explicit bundle.degrees".into());
                }
            }
        }
        let f = &self.flow;
        let positive = [
            ("flow.t_max", f.t_max),
            ("flow.epsilon", f.epsilon),
            ("flow.blowup", f.blowup),
            ("flow.dt0", f.dt0.unwrap_or(1.0)),
            ("flow.monotone_tol", f.monotone_tol.max(f64::MIN_POSITIVE)),
        ];
        let a = &self.analysis;
        let d = &a.destab;
        let positive = positive.into_iter().chain([
            ("analysis.delta_conv", d.delta_conv),
            ("analysis.tau", d.tau),
            ("analysis.delta_mem", d.delta_mem),
            ("analysis.tol_slope", d.tol_slope),
            ("analysis.concentration_radius", a.concentration_radius),
            ("analysis.concentration_eps", a.concentration_eps),
        ]);
        for (key, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return bad(key, format!("must be positive, got {x}"));
            }
        }
        if d.sigma_schedule.is_empty()
            || d.sigma_schedule.iter().any(|s| !(*s > 0.0 && *s <= 1.0))
            || d.sigma_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("analysis.sigma_schedule", "needs strictly decreasing values in (0, 1]".into());
        }
        if a.uy_sigmas.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return bad("analysis.uy_sigmas", "values must lie in (0, 1]".into());
        }
        if let Some(fb) = &self.frobenius {
            if fb.degree < 1 {
                return bad("frobenius.degree", "truncation degree must be at least 1".into());
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<TorusGeometry> {
        let g = &self.geometry;
        match &g.periods {
            Some(p) => TorusGeometry::new(g.n, p, g.grid),
            None => TorusGeometry::standard(g.n, g.grid),
        }
    }

    pub fn bundle_block(&self) -> Result<&BundleBlock> {
        self.bundle.as_ref().ok_or_else(|| Error::Scenario {
            key: "bundle".into(),
            msg: "this command needs a bundle block".into(),
        })
    }

    pub fn bundle(&self) -> Result<BundleSpec> {
        let b = self.bundle_block()?;
        let geom = self.geometry()?;
        let spec = match &b.a_files {
            Some(files) => {
                let degrees = b.degrees.as_deref().unwrap_or_default();
                let blocks: Vec<Block> = degrees.iter().map(|&d| Block { rank: 1, degree: d }).collect();
                let a = files.iter().map(|f| io::read_field(f)).collect::<Result<Vec<_>>>()?;
                if a.iter().any(|f| f.geometry() != &geom) {
                    return Err(Error::Scenario {
                        key: "bundle.a_files".into(),
                        msg: "field files do not match the scenario geometry".into(),
                    });
                }
                BundleSpec::new(&geom, &blocks, a)?
            }
            None => presets::build(&b.preset, &geom, b.degrees.as_deref(), b.seed, b.amplitude)?,
        };
        if let Some(r) = b.rank {
            if r != spec.rank() {
                return Err(Error::Scenario {
                    key: "bundle.rank".into(),
                    msg: format!("preset has rank {}, scenario says {r}", spec.rank()),
                });
            }
        }
        Ok(spec)
    }
}

pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"geometry": {"grid": 16}, "bundle": {"preset": "split_1_-1"}}"#;

    #[test]
    fn defaults_fill_in() {
        let (sc, hash) = Scenario::from_str(MINIMAL).unwrap();
        assert_eq!(sc.geometry.n, 1);
        assert_eq!(sc.flow, FlowControls::default());
        assert_eq!(sc.analysis, AnalysisBlock::default());
        assert_eq!(hash.len(), 64);
        assert_eq!(sc.bundle().unwrap().rank(), 2);
    }

    #[test]
    fn missing_grid_is_named() {
        let err = Scenario::from_str(r#"{"geometry": {"n": 1}}"#).unwrap_err();
        match err {
            Error::Scenario { key, .. } => assert_eq!(key, "geometry.grid"),
            e => panic!("{e}"),
        }
        let err = Scenario::from_str(r#"{"geometry": {"grid": 8}, "bundle": {}}"#).unwrap_err();
        assert!(matches!(err, Error::Scenario { key, .. } if key == "bundle.preset"));
    }

    #[test]
    fn bad_values_are_named() {
        let cases = [
            (r#"{"geometry": {"grid": 8, "color": 1}}"#, "geometry"),
            (r#"{"geometry": {"grid": "x"}}"#, "geometry.grid"),
            (r#"{"geometry": {"grid": 8}, "flow": {"epsilon": -1}}"#, "flow.epsilon"),
            (r#"{"geometry": {"grid": 8}, "bundle": {"preset": "nope"}}"#, "bundle.preset"),
            (r#"{"geometry": {"grid": 8}, "analysis": {"tau": 0}}"#, "analysis.tau"),
        ];
        for (text, want) in cases {
            match Scenario::from_str(text).unwrap_err() {
                Error::Scenario { key, .. } => assert!(key.starts_with(want), "{key} vs {want}"),
                e => panic!("{e}"),
            }
        }
        let err = Scenario::from_str("{\n \"geometry\": {\"grid\": 8},\n}").unwrap_err();
        assert!(matches!(err, Error::Scenario { key, .. } if key.starts_with("line 3")));
    }

    #[test]
    fn rank_mismatch() {
        let text = r#"{"geometry": {"grid": 16}, "bundle": {"preset": "split_2_0", "rank": 3}}"#;
        let (sc, _) = Scenario::from_str(text).unwrap();
        assert!(matches!(sc.bundle(), Err(Error::Scenario { key, .. }) if key == "bundle.rank"));
    }
}
