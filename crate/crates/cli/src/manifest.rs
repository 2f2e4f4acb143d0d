use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};
use sylvadi::adi::{AdiConfig, InnerSolvers, Strategy, SylvesterProblem};
use sylvadi::problems::ProblemSpec;
use sylvadi::shifts::{DEFAULT_DIRECT_RITZ, DEFAULT_INVERSE_RITZ, DEFAULT_PAIRS};
use sylvadi::sparse::{read_block, read_matrix_market};

/// Matrix Market files of a generalized equation; `m` and `c` default to
/// identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFiles {
    pub a: PathBuf,
    pub b: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<PathBuf>,
    pub f: PathBuf,
    pub g: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Generate(ProblemSpec),
    SpecFile(PathBuf),
    Files(MatrixFiles),
}

impl ProblemSource {
    /// Anchors relative paths at `base` and inlines spec files.
    pub fn resolve(self, base: &Path) -> anyhow::Result<Self> {
        let at = |p: PathBuf| -> anyhow::Result<PathBuf> {
            let full = if p.is_absolute() { p } else { base.join(p) };
            ensure!(full.exists(), "{} does not exist", full.display());
            Ok(full)
        };
        Ok(match self {
            ProblemSource::Generate(spec) => ProblemSource::Generate(spec),
            ProblemSource::SpecFile(p) => {
                let p = at(p)?;
                ProblemSource::Generate(ProblemSpec::read(&p).with_context(|| format!("reading {}", p.display()))?)
            }
            ProblemSource::Files(f) => ProblemSource::Files(MatrixFiles {
                a: at(f.a)?,
                b: at(f.b)?,
                m: f.m.map(at).transpose()?,
                c: f.c.map(at).transpose()?,
                f: at(f.f)?,
                g: at(f.g)?,
            }),
        })
    }

    pub fn load(&self) -> anyhow::Result<SylvesterProblem> {
        match self {
            ProblemSource::Generate(spec) => {
                let g = spec.generate()?;
                Ok(SylvesterProblem::standard(g.a, g.b, &g.f, &g.g)?)
            }
            ProblemSource::SpecFile(p) => ProblemSource::Generate(ProblemSpec::read(p)?).load(),
            ProblemSource::Files(f) => {
                let read = |p: &PathBuf| read_matrix_market(p).with_context(|| format!("reading {}", p.display()));
                let a = read(&f.a)?;
                let b = read(&f.b)?;
                let m = f.m.as_ref().map(read).transpose()?;
                let c = f.c.as_ref().map(read).transpose()?;
                let fb = read_block(&f.f).with_context(|| format!("reading {}", f.f.display()))?;
                let gb = read_block(&f.g).with_context(|| format!("reading {}", f.g.display()))?;
                Ok(SylvesterProblem::new(a, b, m, c, fb, gb)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftParams {
    pub direct: usize,
    pub inverse: usize,
    pub pairs: usize,
}

impl Default for ShiftParams {
    fn default() -> Self {
        Self {
            direct: DEFAULT_DIRECT_RITZ,
            inverse: DEFAULT_INVERSE_RITZ,
            pairs: DEFAULT_PAIRS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSource {
    File(PathBuf),
    Generate(ShiftParams),
}

impl Default for ShiftSource {
    fn default() -> Self {
        ShiftSource::Generate(ShiftParams::default())
    }
}

/// A batch of strategies run on one problem with one shift sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub problem: ProblemSource,
    pub strategies: Vec<Strategy>,
    #[serde(default)]
    pub config: AdiConfig,
    #[serde(default)]
    pub solvers: InnerSolvers,
    #[serde(default)]
    pub shifts: ShiftSource,
    pub out: PathBuf,
    /// Run strategies concurrently; timings then share the machine.
    #[serde(default)]
    pub parallel: bool,
    /// Write `Z`, `Y`, `Γ` and the iteration state for every strategy.
    #[serde(default)]
    pub save_factors: bool,
}

impl RunManifest {
    /// Reads, resolves paths against the manifest's directory, and validates.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        manifest.problem = manifest.problem.resolve(base)?;
        if let ShiftSource::File(p) = &manifest.shifts {
            let full = if p.is_absolute() { p.clone() } else { base.join(p) };
            ensure!(full.exists(), "shift file {} does not exist", full.display());
            manifest.shifts = ShiftSource::File(full);
        }
        if manifest.out.is_relative() {
            manifest.out = base.join(&manifest.out);
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.strategies.is_empty() {
            bail!("the manifest lists no strategies");
        }
        for s in &self.strategies {
            self.config_for(*s)
                .validate()
                .with_context(|| format!("strategy {}", s.label()))?;
        }
        if let ShiftSource::Generate(p) = &self.shifts {
            ensure!(p.pairs > 0, "shift generation needs at least one pair");
            ensure!(p.direct + p.inverse > 0, "shift generation needs Ritz values");
        }
        Ok(())
    }

    pub fn config_for(&self, strategy: Strategy) -> AdiConfig {
        self.config.with_strategy(strategy)
    }

    /// One directory name per strategy, disambiguated on repeats.
    pub fn slugs(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.strategies {
            let base = s.slug();
            let taken = out
                .iter()
                .filter(|o| **o == base || o.starts_with(&format!("{base}-")))
                .count();
            out.push(if taken == 0 {
                base
            } else {
                format!("{base}-{}", taken + 1)
            });
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(strategies: &str) -> String {
        format!(
            r#"{{"problem": {{"generate": {{"dimension": "2d", "n0_A": 3, "n0_B": 2, "r": 1, "seed": 0}}}},
                "strategies": {strategies}, "out": "out"}}"#
        )
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let m: RunManifest = serde_json::from_str(&minimal(r#"[{"kind": "dynamic_mid_bl"}]"#)).unwrap();
        assert_eq!(m.shifts, ShiftSource::default());
        assert_eq!(m.config, AdiConfig::default());
        assert!(!m.parallel);
        m.validate().unwrap();
    }

    #[test]
    fn empty_strategy_list_is_rejected() {
        let m: RunManifest = serde_json::from_str(&minimal("[]")).unwrap();
        assert!(m.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal("[]").replacen('{', r#"{"bogus": 1, "#, 1);
        assert!(serde_json::from_str::<RunManifest>(&text).is_err());
    }

    #[test]
    fn repeated_strategies_get_distinct_directories() {
        let m: RunManifest = serde_json::from_str(&minimal(
            r#"[{"kind": "dynamic_mid"}, {"kind": "dynamic_mid"}, {"kind": "dynamic_b"}]"#,
        ))
        .unwrap();
        assert_eq!(m.slugs(), ["dynamicmid", "dynamicmid-2", "dynamicb"]);
    }

    #[test]
    fn missing_matrix_file_fails_resolution() {
        let dir = tempfile::tempdir().unwrap();
        let src = ProblemSource::Files(MatrixFiles {
            a: "A.mtx".into(),
            b: "B.mtx".into(),
            m: None,
            c: None,
            f: "f.mtx".into(),
            g: "g.mtx".into(),
        });
        assert!(src.resolve(dir.path()).is_err());
    }

    #[test]
    fn shipped_manifests_are_valid() {
        for text in [
            include_str!("../../../manifests/laplacian_3d.json"),
            include_str!("../../../manifests/convdiff_3d.json"),
            include_str!("../../../manifests/mixed_direct.json"),
            include_str!("../../../manifests/machine_tool.json"),
        ] {
            let m: RunManifest = serde_json::from_str(text).unwrap();
            m.validate().unwrap();
        }
    }
}
