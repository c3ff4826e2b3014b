//! Problem-file schema and validation.
//!
//! Problems are versioned JSON documents; unknown keys are rejected and
//! schema violations report the JSON pointer of the offending field.
//! Polynomials use the term-list encoding `[{"alpha": [..], "c": ..}, ..]`.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use semialg_core::hierarchy::{HierarchyConfig, Scheme};
use semialg_core::moments::{Convention, MeasureKind, MeasureSpec};
use semialg_core::poly::{Poly, Term};
use semialg_core::sdp::SolverConfig;
use semialg_core::SemiAlgebraicSet;

pub const PROBLEM_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub measure: MeasureSection,
    pub set: SetSection,
    #[serde(default)]
    pub hierarchy: HierarchySection,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Optional explicit complement cells (each a list of polynomials);
    /// when absent the staircase decomposition is used.
    #[serde(default)]
    pub cells: Option<Vec<Vec<Vec<Term>>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub kind: MeasureKind,
    pub n: usize,
    pub param: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<Convention>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSection {
    pub gs: Vec<Vec<Term>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchySection {
    pub d_min: u32,
    pub d_max: u32,
    pub scheme: Scheme,
    pub objective_f: Option<Vec<Term>>,
    pub f_stokes: Option<Vec<Term>>,
    pub compute_lower: bool,
    pub lower_uses_f_squared: bool,
}

impl Default for HierarchySection {
    fn default() -> Self {
        HierarchySection {
            d_min: 2,
            d_max: 5,
            scheme: Scheme::Scheme3,
            objective_f: None,
            f_stokes: None,
            compute_lower: true,
            lower_uses_f_squared: false,
        }
    }
}

/// Fully validated problem, converted to core types.
pub struct Problem {
    pub spec: MeasureSpec,
    pub set: SemiAlgebraicSet,
    pub config: HierarchyConfig,
    pub cells: Option<Vec<SemiAlgebraicSet>>,
}

/// Parse and validate; schema errors carry a JSON pointer to the field.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ProblemFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = format!("/{}", e.path().to_string().replace('.', "/"));
        anyhow!("schema violation at {pointer}: {}", e.inner())
    })?;
    validate(file)
}

fn validate(file: ProblemFile) -> Result<Problem> {
    if file.version != PROBLEM_VERSION {
        bail!(
            "unsupported problem version {} (expected {PROBLEM_VERSION})",
            file.version
        );
    }
    let n = file.measure.n;
    let spec = match file.measure.kind {
        MeasureKind::Gaussian => MeasureSpec::gaussian(
            n,
            file.measure.param,
            file.measure
                .convention
                .unwrap_or(Convention::StandardNormalized),
        )
        .context("at /measure")?,
        MeasureKind::Exponential => {
            if file.measure.convention.is_some() {
                bail!("at /measure/convention: conventions apply to gaussian measures only");
            }
            MeasureSpec::exponential(n, file.measure.param).context("at /measure")?
        }
    };

    let gs = parse_polys(n, &file.set.gs).context("at /set/gs")?;
    let set = SemiAlgebraicSet::new(n, gs).context("at /set")?;

    let h = &file.hierarchy;
    let mut config = HierarchyConfig::new(h.d_min, h.d_max);
    config.scheme = h.scheme;
    config.compute_lower = h.compute_lower;
    config.lower_uses_f_squared = h.lower_uses_f_squared;
    config.solver = file.solver;
    if let Some(terms) = &h.objective_f {
        config.objective_f =
            Some(Poly::from_term_list(n, terms).context("at /hierarchy/objective_f")?);
    }
    if let Some(terms) = &h.f_stokes {
        config.f_stokes = Some(Poly::from_term_list(n, terms).context("at /hierarchy/f_stokes")?);
    }

    let cells = match &file.cells {
        None => None,
        Some(cells) => {
            let mut out = Vec::with_capacity(cells.len());
            for (i, cell) in cells.iter().enumerate() {
                let gs = parse_polys(n, cell).with_context(|| format!("at /cells/{i}"))?;
                out.push(
                    SemiAlgebraicSet::new(n, gs).with_context(|| format!("at /cells/{i}"))?,
                );
            }
            Some(out)
        }
    };

    Ok(Problem {
        spec,
        set,
        config,
        cells,
    })
}

fn parse_polys(n: usize, lists: &[Vec<Term>]) -> Result<Vec<Poly>> {
    lists
        .iter()
        .enumerate()
        .map(|(i, terms)| {
            Poly::from_term_list(n, terms).with_context(|| format!("polynomial {i}"))
        })
        .collect()
}

/// Round-trip serialization used by the fixture tests.
pub fn serialize_problem(file: &ProblemFile) -> String {
    serde_json::to_string_pretty(file).expect("problem serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALFPLANE: &str = r#"{
        "version": 1,
        "measure": {"kind": "gaussian", "n": 2, "param": 1.0, "convention": "paper_experimental"},
        "set": {"gs": [[{"alpha": [1, 0], "c": 1.0}, {"alpha": [0, 1], "c": 2.0}, {"alpha": [0, 0], "c": -1.0}]]},
        "hierarchy": {"d_min": 3, "d_max": 4}
    }"#;

    #[test]
    fn parses_a_valid_problem() {
        let p = parse_problem(HALFPLANE).unwrap();
        assert_eq!(p.spec.n, 2);
        assert_eq!(p.set.constraints().len(), 1);
        assert_eq!(p.config.d_min, 3);
        assert!(p.cells.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_pointer() {
        let bad = HALFPLANE.replace("\"d_min\": 3", "\"d_min\": 3, \"bogus\": 1");
        let err = parse_problem(&bad).unwrap_err().to_string();
        assert!(err.contains("/hierarchy"), "{err}");
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn version_and_measure_validation() {
        let bad = HALFPLANE.replace("\"version\": 1", "\"version\": 7");
        assert!(parse_problem(&bad).is_err());
        let bad = HALFPLANE.replace("1.0, \"convention\"", "-1.0, \"convention\"");
        assert!(parse_problem(&bad).is_err());
    }

    #[test]
    fn problem_round_trip_preserves_the_document() {
        let de = &mut serde_json::Deserializer::from_str(HALFPLANE);
        let file: ProblemFile = serde_path_to_error::deserialize(de).unwrap();
        let text = serialize_problem(&file);
        let reparsed = parse_problem(&text).unwrap();
        assert_eq!(reparsed.spec.n, 2);
        assert_eq!(reparsed.config.d_max, 4);
    }
}
